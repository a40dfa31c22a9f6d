#include "coral/param_store.hpp"

#include <cmath>

#include "coral/errors.hpp"

namespace coral {

int ParamStore::register_array(std::string name, std::vector<int64_t> shape,
                               bool non_negative) {
  if (index_.count(name)) {
    throw ConfigError("parameter registered twice: " + name);
  }
  int64_t n = 1;
  for (int64_t s : shape) {
    if (s <= 0) throw ConfigError("non-positive dimension in " + name);
    n *= s;
  }
  ParamArray a;
  a.name = name;
  a.shape = std::move(shape);
  a.non_negative = non_negative;
  a.value.assign(size_t(n), 0.0);
  a.adam_m.assign(size_t(n), 0.0);
  a.adam_v.assign(size_t(n), 0.0);
  int id = int(arrays_.size());
  index_.emplace(a.name, id);
  arrays_.push_back(std::move(a));
  return id;
}

int ParamStore::id_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) {
    throw ConfigError("unknown parameter: " + std::string(name));
  }
  return it->second;
}

bool ParamStore::has(std::string_view name) const {
  return index_.count(std::string(name)) != 0;
}

GradResult make_zero_grads(const ParamStore& params) {
  GradResult r;
  r.grads.resize(size_t(params.count()));
  for (int i = 0; i < params.count(); ++i) {
    r.grads[size_t(i)].assign(params.array(i).value.size(), 0.0);
  }
  return r;
}

void adam_step(ParamStore& params, const GradResult& grads, double lr,
               int64_t step_index, const AdamConfig& cfg) {
  if (step_index < 1) throw ConfigError("adam step index must start at 1");
  if (int(grads.grads.size()) != params.count()) {
    throw ConfigError("gradient buffers do not match parameter store");
  }
  double bc1 = 1.0 - std::pow(cfg.beta1, double(step_index));
  double bc2 = 1.0 - std::pow(cfg.beta2, double(step_index));
  for (int id = 0; id < params.count(); ++id) {
    ParamArray& a = params.array(id);
    const std::vector<double>& g = grads.grads[size_t(id)];
    if (g.size() != a.value.size()) {
      throw ConfigError("gradient shape mismatch for " + a.name);
    }
    for (size_t i = 0; i < a.value.size(); ++i) {
      if (!std::isfinite(g[i])) {
        throw NumericError("non-finite gradient in " + a.name + "[" +
                           std::to_string(i) + "]");
      }
      a.adam_m[i] = cfg.beta1 * a.adam_m[i] + (1.0 - cfg.beta1) * g[i];
      a.adam_v[i] = cfg.beta2 * a.adam_v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      double mhat = a.adam_m[i] / bc1;
      double vhat = a.adam_v[i] / bc2;
      a.value[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
      if (a.non_negative && a.value[i] < 0.0) a.value[i] = 0.0;
    }
  }
}

double gaussian_kl(std::span<const double> mu, std::span<const double> logvar) {
  if (mu.size() != logvar.size()) {
    throw ConfigError("gaussian_kl: mu and logvar sizes differ");
  }
  double acc = 0.0;
  for (size_t i = 0; i < mu.size(); ++i) {
    acc += 0.5 * (mu[i] * mu[i] + std::exp(logvar[i]) - logvar[i] - 1.0);
  }
  return acc;
}

void reparameterize(std::span<const double> mu, std::span<const double> logvar,
                    std::span<const double> eps, std::span<double> out) {
  if (mu.size() != logvar.size() || mu.size() != eps.size() ||
      mu.size() != out.size()) {
    throw ConfigError("reparameterize: size mismatch");
  }
  for (size_t i = 0; i < mu.size(); ++i) {
    out[i] = mu[i] + std::exp(0.5 * logvar[i]) * eps[i];
  }
}

std::vector<double> reparameterize(std::span<const double> mu,
                                   std::span<const double> logvar,
                                   RngStream stream) {
  std::vector<double> eps(mu.size());
  stream.fill_normal(eps);
  std::vector<double> out(mu.size());
  reparameterize(mu, logvar, eps, out);
  return out;
}

}  // namespace coral
