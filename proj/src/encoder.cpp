#include "coral/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "coral/errors.hpp"

namespace coral {

namespace {

constexpr double kInitLogvar = -4.0;
constexpr double kMixtureSpread = 0.1;
constexpr double kMixtureMeans[4] = {-0.5, -0.17, 0.17, 0.5};

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

void xavier_fill(std::span<double> w, int64_t fan_in, int64_t fan_out,
                 RngStream& stream, bool fold_nonneg) {
  double limit = std::sqrt(6.0 / double(fan_in + fan_out));
  for (double& x : w) {
    x = stream.next_uniform(-limit, limit);
    if (fold_nonneg) x = std::fabs(x);
  }
}

}  // namespace

std::span<const double> ModelRef::mu_row(int32_t u, int32_t c) const {
  const ParamArray& a = params->array(id_mu);
  return {a.value.data() + state_offset(u, c), size_t(dims.dim)};
}

std::span<const double> ModelRef::logvar_row(int32_t u, int32_t c) const {
  const ParamArray& a = params->array(id_logvar);
  return {a.value.data() + state_offset(u, c), size_t(dims.dim)};
}

std::span<const double> ModelRef::h_row(int32_t q) const {
  const ParamArray& a = params->array(id_h);
  return {a.value.data() + int64_t(q) * dims.dim, size_t(dims.dim)};
}

ModelRef attach_model(ParamStore& params, const ModelDims& dims) {
  if (dims.learners < 1 || dims.questions < 1 || dims.concepts < 1 ||
      dims.dim < 1 || dims.hidden < 1) {
    throw ConfigError("model dimensions must be positive");
  }
  ModelRef m;
  m.params = &params;
  m.dims = dims;
  m.id_mu = params.id_of("state.mu");
  m.id_logvar = params.id_of("state.logvar");
  m.id_h = params.id_of("q.h");
  m.id_psi_w1 = params.id_of("psi.w1");
  m.id_psi_b1 = params.id_of("psi.b1");
  m.id_psi_w2 = params.id_of("psi.w2");
  m.id_psi_b2 = params.id_of("psi.b2");
  m.id_phi_w1 = params.id_of("phi.w1");
  m.id_phi_b1 = params.id_of("phi.b1");
  m.id_phi_w2 = params.id_of("phi.w2");
  m.id_phi_b2 = params.id_of("phi.b2");
  m.id_agg_w = params.id_of("agg.w");
  m.id_agg_b = params.id_of("agg.b");
  return m;
}

ModelRef init_model(ParamStore& params, const ModelDims& dims, RngStream stream) {
  if (dims.learners < 1 || dims.questions < 1 || dims.concepts < 1 ||
      dims.dim < 1 || dims.hidden < 1) {
    throw ConfigError("model dimensions must be positive");
  }
  int64_t M = dims.learners, N = dims.questions, C = dims.concepts;
  int64_t d = dims.dim, h = dims.hidden;

  params.register_array("state.mu", {M, C, d});
  params.register_array("state.logvar", {M, C, d});
  params.register_array("q.h", {N, d});
  params.register_array("psi.w1", {h, d});
  params.register_array("psi.b1", {h});
  params.register_array("psi.w2", {1, h});
  params.register_array("psi.b2", {1});
  params.register_array("phi.w1", {h, d}, /*non_negative=*/true);
  params.register_array("phi.b1", {h});
  params.register_array("phi.w2", {1, h}, /*non_negative=*/true);
  params.register_array("phi.b2", {1});
  params.register_array("agg.w", {C, d, d});
  params.register_array("agg.b", {C, d});

  ModelRef m = attach_model(params, dims);

  // Posterior means: pick one of four diagonal mixture components per
  // (learner, concept) row, then add component-level spread.
  RngStream mix = stream.derive("state.init");
  ParamArray& mu = params.array(m.id_mu);
  for (int32_t u = 0; u < dims.learners; ++u) {
    for (int32_t c = 0; c < dims.concepts; ++c) {
      RngStream row = mix.derive(uint64_t(u)).derive(uint64_t(c));
      double center = kMixtureMeans[row.next_below(4)];
      double* dst = mu.value.data() + m.state_offset(u, c);
      for (int32_t i = 0; i < dims.dim; ++i) {
        dst[i] = center + kMixtureSpread * row.next_normal();
      }
    }
  }
  ParamArray& lv = params.array(m.id_logvar);
  std::fill(lv.value.begin(), lv.value.end(), kInitLogvar);

  RngStream net = stream.derive("net.init");
  {
    RngStream s = net.derive("q.h");
    double limit = 1.0 / std::sqrt(double(d));
    for (double& x : params.array(m.id_h).value) x = s.next_uniform(-limit, limit);
  }
  {
    RngStream s = net.derive("psi");
    xavier_fill(params.array(m.id_psi_w1).value, d, h, s, false);
    xavier_fill(params.array(m.id_psi_w2).value, h, 1, s, false);
  }
  {
    RngStream s = net.derive("phi");
    xavier_fill(params.array(m.id_phi_w1).value, d, h, s, true);
    xavier_fill(params.array(m.id_phi_w2).value, h, 1, s, true);
  }
  {
    RngStream s = net.derive("agg");
    xavier_fill(params.array(m.id_agg_w).value, d, d, s, false);
  }
  return m;
}

namespace {

// One hidden layer: act(w1 x + b1), then w2 . a + b2.
double mlp_head(const ParamStore& p, int id_w1, int id_b1, int id_w2, int id_b2,
                std::span<const double> x, int32_t hidden, bool sigmoid_hidden) {
  const double* w1 = p.array(id_w1).value.data();
  const double* b1 = p.array(id_b1).value.data();
  const double* w2 = p.array(id_w2).value.data();
  double b2 = p.array(id_b2).value[0];
  int32_t d = int32_t(x.size());
  double out = b2;
  for (int32_t j = 0; j < hidden; ++j) {
    double acc = b1[j];
    const double* row = w1 + int64_t(j) * d;
    for (int32_t i = 0; i < d; ++i) acc += row[i] * x[size_t(i)];
    double a = sigmoid_hidden ? stable_sigmoid(acc) : std::tanh(acc);
    out += w2[j] * a;
  }
  return out;
}

}  // namespace

double psi_value(const ModelRef& m, std::span<const double> z) {
  if (int32_t(z.size()) != m.dims.dim) throw ConfigError("psi: bad input size");
  return stable_softplus(mlp_head(*m.params, m.id_psi_w1, m.id_psi_b1,
                                  m.id_psi_w2, m.id_psi_b2, z, m.dims.hidden,
                                  /*sigmoid_hidden=*/false));
}

double phi_value(const ModelRef& m, std::span<const double> v) {
  if (int32_t(v.size()) != m.dims.dim) throw ConfigError("phi: bad input size");
  return stable_sigmoid(mlp_head(*m.params, m.id_phi_w1, m.id_phi_b1,
                                 m.id_phi_w2, m.id_phi_b2, v, m.dims.hidden,
                                 /*sigmoid_hidden=*/true));
}

double ability_value(const ModelRef& m, std::span<const double> z_u) {
  if (int32_t(z_u.size()) != m.dims.concepts * m.dims.dim) {
    throw ConfigError("ability: expected C x d states");
  }
  double theta = 0.0;
  for (int32_t c = 0; c < m.dims.concepts; ++c) {
    theta += psi_value(m, z_u.subspan(size_t(c) * size_t(m.dims.dim),
                                      size_t(m.dims.dim)));
  }
  return theta;
}

double predict_response_value(const ModelRef& m, std::span<const double> z_u,
                              double theta, int32_t question, const QMatrix& qm) {
  if (int32_t(z_u.size()) != m.dims.concepts * m.dims.dim) {
    throw ConfigError("predict_response: expected C x d states");
  }
  const auto& tags = qm.tagged(question);
  std::span<const double> h = m.h_row(question);
  std::vector<double> v(size_t(m.dims.dim));
  double acc = 0.0;
  for (int32_t c : tags) {
    std::span<const double> z =
        z_u.subspan(size_t(c) * size_t(m.dims.dim), size_t(m.dims.dim));
    for (int32_t i = 0; i < m.dims.dim; ++i) {
      v[size_t(i)] = theta * z[size_t(i)] - h[size_t(i)];
    }
    acc += phi_value(m, v);
  }
  return acc / double(tags.size());
}

EncoderLossResult encoder_loss(const ModelRef& m, const QMatrix& qm,
                               std::span<const Interaction> batch,
                               RngStream eps_root) {
  if (batch.empty()) throw ConfigError("encoder_loss: empty batch");
  int32_t C = m.dims.concepts, d = m.dims.dim;

  std::vector<int32_t> learners;
  learners.reserve(batch.size());
  for (const Interaction& r : batch) learners.push_back(r.learner);
  std::sort(learners.begin(), learners.end());
  learners.erase(std::unique(learners.begin(), learners.end()), learners.end());

  EncoderLossResult out;
  out.batch_learners = learners;
  out.sampled_z.resize(learners.size() * size_t(C) * size_t(d));

  std::vector<double> eps(static_cast<size_t>(d));
  std::unordered_map<int32_t, size_t> slot;
  slot.reserve(learners.size());
  for (size_t s = 0; s < learners.size(); ++s) {
    int32_t u = learners[s];
    slot.emplace(u, s);
    RngStream per_u = eps_root.derive(uint64_t(u));
    double* z_u = out.sampled_z.data() + s * size_t(C) * size_t(d);
    for (int32_t c = 0; c < C; ++c) {
      per_u.derive(uint64_t(c)).fill_normal(eps);
      reparameterize(m.mu_row(u, c), m.logvar_row(u, c), eps,
                     {z_u + size_t(c) * size_t(d), size_t(d)});
    }
    out.kl += gaussian_kl(
        {m.params->array(m.id_mu).value.data() + m.state_offset(u, 0),
         size_t(C) * size_t(d)},
        {m.params->array(m.id_logvar).value.data() + m.state_offset(u, 0),
         size_t(C) * size_t(d)});
  }
  out.kl /= double(batch.size());

  constexpr double kEps = 1e-12;
  double bce = 0.0;
  for (const Interaction& r : batch) {
    const double* z_u =
        out.sampled_z.data() + slot[r.learner] * size_t(C) * size_t(d);
    std::span<const double> z(z_u, size_t(C) * size_t(d));
    double theta = ability_value(m, z);
    double p = predict_response_value(m, z, theta, r.question, qm);
    p = std::min(std::max(p, kEps), 1.0 - kEps);
    bce += r.correct ? -std::log(p) : -std::log(1.0 - p);
  }
  out.bce = bce / double(batch.size());
  return out;
}

}  // namespace coral
