#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "coral/rng.hpp"

namespace coral {

struct ParamArray {
  std::string name;
  std::vector<int64_t> shape;
  bool non_negative = false;
  std::vector<double> value;
  std::vector<double> adam_m;
  std::vector<double> adam_v;

  int64_t size() const { return int64_t(value.size()); }
};

// Named dense double arrays with fixed shapes, an optional non-negativity
// flag, and per-array Adam moment buffers. Registration order fixes the
// array ids, which keeps serialization and gradient layouts stable.
class ParamStore {
 public:
  int register_array(std::string name, std::vector<int64_t> shape,
                     bool non_negative = false);

  int id_of(std::string_view name) const;  // throws ConfigError if unknown
  bool has(std::string_view name) const;

  ParamArray& array(int id) { return arrays_[size_t(id)]; }
  const ParamArray& array(int id) const { return arrays_[size_t(id)]; }
  ParamArray& array(std::string_view name) { return arrays_[size_t(id_of(name))]; }
  const ParamArray& array(std::string_view name) const {
    return arrays_[size_t(id_of(name))];
  }

  int count() const { return int(arrays_.size()); }

 private:
  std::vector<ParamArray> arrays_;
  std::unordered_map<std::string, int> index_;
};

// Gradient buffers aligned with the store's array ids.
struct GradResult {
  double loss = 0.0;
  std::vector<std::vector<double>> grads;
};

GradResult make_zero_grads(const ParamStore& params);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam update over every array in the store; step_index
// starts at 1. Arrays flagged non-negative are clamped at zero after the
// step. A non-finite gradient entry aborts with the parameter's name.
void adam_step(ParamStore& params, const GradResult& grads, double lr,
               int64_t step_index, const AdamConfig& cfg = {});

// KL(N(mu, diag(exp(logvar))) || N(0, I)) summed over entries.
double gaussian_kl(std::span<const double> mu, std::span<const double> logvar);

// z = mu + exp(logvar / 2) * eps, elementwise.
void reparameterize(std::span<const double> mu, std::span<const double> logvar,
                    std::span<const double> eps, std::span<double> out);

std::vector<double> reparameterize(std::span<const double> mu,
                                   std::span<const double> logvar,
                                   RngStream stream);

}  // namespace coral
