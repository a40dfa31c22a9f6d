#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "coral/data.hpp"
#include "coral/param_store.hpp"
#include "coral/rng.hpp"

namespace coral {

struct ModelDims {
  int32_t learners = 0;   // M
  int32_t questions = 0;  // N
  int32_t concepts = 0;   // C
  int32_t dim = 20;       // d, latent size per concept
  int32_t hidden = 16;    // width of the psi / phi hidden layers
};

// Handle over the parameter store plus cached array ids. Arrays:
//   state.mu, state.logvar   M x C x d posterior tables
//   q.h                      N x d question embeddings
//   psi.*                    ability head, softplus output
//   phi.*                    response head, sigmoid output, weights >= 0
//   agg.w, agg.b             per-concept channel projections (C x d x d)
struct ModelRef {
  ParamStore* params = nullptr;
  ModelDims dims;
  int id_mu = -1, id_logvar = -1, id_h = -1;
  int id_psi_w1 = -1, id_psi_b1 = -1, id_psi_w2 = -1, id_psi_b2 = -1;
  int id_phi_w1 = -1, id_phi_b1 = -1, id_phi_w2 = -1, id_phi_b2 = -1;
  int id_agg_w = -1, id_agg_b = -1;

  int64_t state_offset(int32_t u, int32_t c) const {
    return (int64_t(u) * dims.concepts + c) * dims.dim;
  }
  std::span<const double> mu_row(int32_t u, int32_t c) const;
  std::span<const double> logvar_row(int32_t u, int32_t c) const;
  std::span<const double> h_row(int32_t q) const;
};

// Registers every model array and initializes it: posterior means from a
// 4-component Gaussian mixture (means +-0.5 and +-0.17 on the diagonal,
// component spread 0.1), log-variances at -4, nets with Xavier fans, and
// phi weights folded to their absolute value so the monotonicity
// constraint holds from the first step.
ModelRef init_model(ParamStore& params, const ModelDims& dims, RngStream stream);

// Rebuilds a ModelRef over an already-populated store (checkpoint load).
ModelRef attach_model(ParamStore& params, const ModelDims& dims);

// theta contribution of one concept state: softplus MLP, always > 0.
double psi_value(const ModelRef& m, std::span<const double> z);

// Response head on v = theta * z - h_i: sigmoid MLP in (0, 1).
double phi_value(const ModelRef& m, std::span<const double> v);

// theta_u = sum over all concepts of psi(z_u^{(c)}); z_u is C x d.
double ability_value(const ModelRef& m, std::span<const double> z_u);

// Mean of phi(theta * z_u^{(c)} - h_i) over the question's tagged concepts.
double predict_response_value(const ModelRef& m, std::span<const double> z_u,
                              double theta, int32_t question, const QMatrix& qm);

struct EncoderLossResult {
  double bce = 0.0;  // mean over records
  double kl = 0.0;   // summed per distinct learner, divided by record count
  // Sampled z per learner appearing in the batch, C x d each, keyed by
  // ascending learner index.
  std::vector<int32_t> batch_learners;
  std::vector<double> sampled_z;
};

// Value-level encoder pass over a batch of records: samples z with the
// given stream (one derived stream per (learner, concept)), predicts each
// record through psi/phi, and reports the two encoder loss terms.
EncoderLossResult encoder_loss(const ModelRef& m, const QMatrix& qm,
                               std::span<const Interaction> batch,
                               RngStream eps_root);

}  // namespace coral
