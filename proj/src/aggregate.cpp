#include "coral/aggregate.hpp"

#include <algorithm>
#include <cmath>

#include "coral/errors.hpp"

namespace coral {

namespace {

constexpr double kNormFloor = 1e-8;

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

void l2_normalize_inplace(std::span<double> v) {
  double norm2 = 0.0;
  for (double x : v) norm2 += x * x;
  double norm = std::max(std::sqrt(norm2), kNormFloor);
  for (double& x : v) x /= norm;
}

}  // namespace

void channel_project_value(const ModelRef& m, int32_t c,
                           std::span<const double> z, std::span<double> out) {
  int32_t d = m.dims.dim;
  if (int32_t(z.size()) != d || int32_t(out.size()) != d) {
    throw ConfigError("channel_project: bad sizes");
  }
  if (c < 0 || c >= m.dims.concepts) throw ConfigError("channel_project: bad concept");
  const double* w = m.params->array(m.id_agg_w).value.data() +
                    int64_t(c) * d * d;
  const double* b = m.params->array(m.id_agg_b).value.data() + int64_t(c) * d;
  for (int32_t r = 0; r < d; ++r) {
    double acc = b[r];
    const double* row = w + int64_t(r) * d;
    for (int32_t i = 0; i < d; ++i) acc += row[i] * z[size_t(i)];
    out[size_t(r)] = stable_sigmoid(acc);
  }
  l2_normalize_inplace(out);
}

std::vector<double> f_softmax(std::span<const NeighborEntry> neighbors) {
  std::vector<double> w(neighbors.size());
  if (neighbors.empty()) return w;
  double mx = neighbors[0].f;
  for (const NeighborEntry& e : neighbors) mx = std::max(mx, e.f);
  double total = 0.0;
  for (size_t i = 0; i < neighbors.size(); ++i) {
    w[i] = std::exp(neighbors[i].f - mx);
    total += w[i];
  }
  for (double& x : w) x /= total;
  return w;
}

std::vector<double> attention_weights(std::span<const double> zhat_u,
                                      std::span<const double> zhat_neighbors,
                                      std::span<const double> f_weights,
                                      int32_t dim) {
  size_t n = f_weights.size();
  if (zhat_neighbors.size() != n * size_t(dim) ||
      zhat_u.size() != size_t(dim)) {
    throw ConfigError("attention_weights: bad sizes");
  }
  std::vector<double> s(n);
  double total = 0.0;
  for (size_t v = 0; v < n; ++v) {
    double acc = 0.0;
    const double* zv = zhat_neighbors.data() + v * size_t(dim);
    for (int32_t i = 0; i < dim; ++i) acc += zhat_u[size_t(i)] * zv[i];
    s[v] = acc;
    total += acc;
  }
  for (size_t v = 0; v < n; ++v) {
    s[v] = s[v] / total + f_weights[v];
  }
  return s;
}

std::vector<double> aggregate_all(const ModelRef& m, const CollabGraph& graph,
                                  std::span<const double> features, int32_t layers,
                                  bool parallel) {
  int32_t M = m.dims.learners, C = m.dims.concepts, d = m.dims.dim;
  size_t table = size_t(M) * size_t(C) * size_t(d);
  if (features.size() != table) throw ConfigError("aggregate_all: bad feature table");
  if (layers < 1) throw ConfigError("aggregate_all: layers must be >= 1");

  std::vector<double> residual(table, 0.0);
  if (graph.empty() || graph.k <= 0) return residual;
  if (graph.learners != M || graph.concepts != C) {
    throw ConfigError("aggregate_all: graph shape mismatch");
  }

  int64_t pairs = int64_t(M) * C;

  // Channel-projected states, shared by every layer's f term and the
  // first layer's dot-ratio term.
  std::vector<double> zhat(table);
#pragma omp parallel for schedule(static) if (parallel)
  for (int64_t i = 0; i < pairs; ++i) {
    int32_t c = int32_t(i % C);
    size_t off = size_t(i) * size_t(d);
    channel_project_value(m, c, features.subspan(off, size_t(d)),
                          {zhat.data() + off, size_t(d)});
  }

  // `current` holds unit-norm node values feeding the next layer: zhat at
  // layer 1, renormalized previous outputs afterwards.
  std::vector<double> current = zhat;
  std::vector<double> next(table);

  for (int32_t layer = 1; layer <= layers; ++layer) {
    if (layer > 1) {
      std::copy(residual.begin(), residual.end(), current.begin());
#pragma omp parallel for schedule(static) if (parallel)
      for (int64_t i = 0; i < pairs; ++i) {
        l2_normalize_inplace({current.data() + size_t(i) * size_t(d), size_t(d)});
      }
    }
#pragma omp parallel for schedule(dynamic, 16) if (parallel)
    for (int64_t i = 0; i < pairs; ++i) {
      int32_t u = int32_t(i / C), c = int32_t(i % C);
      double* out = next.data() + size_t(i) * size_t(d);
      std::fill(out, out + d, 0.0);
      const auto& nbrs = graph.at(u, c);
      if (nbrs.empty()) continue;

      const double* yu = current.data() + size_t(i) * size_t(d);
      std::vector<double> fw = f_softmax(nbrs);
      double total = 0.0;
      std::vector<double> dots(nbrs.size());
      for (size_t j = 0; j < nbrs.size(); ++j) {
        const double* yv = current.data() +
                           (size_t(nbrs[j].v) * size_t(C) + size_t(c)) * size_t(d);
        double acc = 0.0;
        for (int32_t t = 0; t < d; ++t) acc += yu[t] * yv[t];
        dots[j] = acc;
        total += acc;
      }
      double inv_n = 1.0 / double(nbrs.size());
      for (size_t j = 0; j < nbrs.size(); ++j) {
        double s = dots[j] / total + fw[j];
        const double* yv = current.data() +
                           (size_t(nbrs[j].v) * size_t(C) + size_t(c)) * size_t(d);
        for (int32_t t = 0; t < d; ++t) out[t] += s * yv[t] * inv_n;
      }
    }
    std::swap(residual, next);
  }
  return residual;
}

std::vector<double> fuse_states(std::span<const double> features,
                                std::span<const double> residuals) {
  if (features.size() != residuals.size()) {
    throw ConfigError("fuse_states: size mismatch");
  }
  std::vector<double> out(features.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = features[i] + residuals[i];
  return out;
}

}  // namespace coral
