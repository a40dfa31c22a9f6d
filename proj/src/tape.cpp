#include "coral/tape.hpp"

#include <cmath>
#include <cstring>

#include "coral/errors.hpp"

namespace coral {

namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

constexpr double kNormFloor = 1e-8;
constexpr double kProbEps = 1e-12;

}  // namespace

void Tape::reset() {
  nodes_.clear();
  values_.clear();
  grads_.clear();
  leaves_.clear();
  leaf_memo_.clear();
}

Tape::Var Tape::push(Op op, int32_t size, int32_t a, int32_t b, int32_t c) {
  Node n;
  n.op = op;
  n.a = a;
  n.b = b;
  n.c = c;
  n.size = size;
  n.off = int64_t(values_.size());
  values_.resize(values_.size() + size_t(size), 0.0);
  int32_t id = int32_t(nodes_.size());
  nodes_.push_back(n);
  return Var{id, size};
}

Tape::Var Tape::leaf(std::string_view name) {
  int id = params_->id_of(name);
  return leaf_slice(id, 0, int32_t(params_->array(id).size()));
}

Tape::Var Tape::leaf_slice(int param_id, int64_t offset, int32_t len) {
  auto key = std::make_pair(param_id, offset);
  auto it = leaf_memo_.find(key);
  if (it != leaf_memo_.end()) {
    return Var{it->second, nodes_[size_t(it->second)].size};
  }
  const ParamArray& arr = params_->array(param_id);
  if (offset < 0 || offset + len > arr.size()) {
    throw ConfigError("leaf slice out of range for " + arr.name);
  }
  Var v = push(Op::kLeaf, len);
  Node& n = nodes_[size_t(v.id)];
  n.param_id = param_id;
  n.param_off = offset;
  std::memcpy(data(v.id), arr.value.data() + offset, size_t(len) * sizeof(double));
  leaves_.push_back(v.id);
  leaf_memo_.emplace(key, v.id);
  return v;
}

Tape::Var Tape::constant(std::span<const double> values) {
  Var v = push(Op::kConst, int32_t(values.size()));
  std::memcpy(data(v.id), values.data(), values.size() * sizeof(double));
  return v;
}

Tape::Var Tape::constant_scalar(double x) {
  Var v = push(Op::kConst, 1);
  data(v.id)[0] = x;
  return v;
}

Tape::Var Tape::add(Var a, Var b) {
  if (a.size != b.size) throw ConfigError("add: size mismatch");
  Var v = push(Op::kAdd, a.size, a.id, b.id);
  const double* pa = data(a.id);
  const double* pb = data(b.id);
  double* out = data(v.id);
  for (int32_t i = 0; i < a.size; ++i) out[i] = pa[i] + pb[i];
  return v;
}

Tape::Var Tape::sub(Var a, Var b) {
  if (a.size != b.size) throw ConfigError("sub: size mismatch");
  Var v = push(Op::kSub, a.size, a.id, b.id);
  const double* pa = data(a.id);
  const double* pb = data(b.id);
  double* out = data(v.id);
  for (int32_t i = 0; i < a.size; ++i) out[i] = pa[i] - pb[i];
  return v;
}

Tape::Var Tape::mul(Var a, Var b) {
  if (a.size != b.size) throw ConfigError("mul: size mismatch");
  Var v = push(Op::kMul, a.size, a.id, b.id);
  const double* pa = data(a.id);
  const double* pb = data(b.id);
  double* out = data(v.id);
  for (int32_t i = 0; i < a.size; ++i) out[i] = pa[i] * pb[i];
  return v;
}

Tape::Var Tape::scale(Var vec, Var s) {
  check_scalar(s, "scale");
  Var v = push(Op::kScale, vec.size, vec.id, s.id);
  const double* pa = data(vec.id);
  double sv = data(s.id)[0];
  double* out = data(v.id);
  for (int32_t i = 0; i < vec.size; ++i) out[i] = pa[i] * sv;
  return v;
}

Tape::Var Tape::scale_const(Var a, double c) {
  Var v = push(Op::kScaleConst, a.size, a.id);
  nodes_[size_t(v.id)].aux = c;
  const double* pa = data(a.id);
  double* out = data(v.id);
  for (int32_t i = 0; i < a.size; ++i) out[i] = pa[i] * c;
  return v;
}

Tape::Var Tape::add_const(Var a, double c) {
  Var v = push(Op::kAddConst, a.size, a.id);
  nodes_[size_t(v.id)].aux = c;
  const double* pa = data(a.id);
  double* out = data(v.id);
  for (int32_t i = 0; i < a.size; ++i) out[i] = pa[i] + c;
  return v;
}

Tape::Var Tape::matvec(Var w, int32_t rows, int32_t cols, Var x) {
  if (w.size != rows * cols || x.size != cols) {
    throw ConfigError("matvec: shape mismatch");
  }
  Var v = push(Op::kMatVec, rows, w.id, x.id);
  Node& n = nodes_[size_t(v.id)];
  n.rows = rows;
  n.cols = cols;
  const double* pw = data(w.id);
  const double* px = data(x.id);
  double* out = data(v.id);
  for (int32_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    const double* row = pw + int64_t(r) * cols;
    for (int32_t c = 0; c < cols; ++c) acc += row[c] * px[c];
    out[r] = acc;
  }
  return v;
}

Tape::Var Tape::dot(Var a, Var b) {
  if (a.size != b.size) throw ConfigError("dot: size mismatch");
  Var v = push(Op::kDot, 1, a.id, b.id);
  const double* pa = data(a.id);
  const double* pb = data(b.id);
  double acc = 0.0;
  for (int32_t i = 0; i < a.size; ++i) acc += pa[i] * pb[i];
  data(v.id)[0] = acc;
  return v;
}

Tape::Var Tape::sum(Var a) {
  Var v = push(Op::kSum, 1, a.id);
  const double* pa = data(a.id);
  double acc = 0.0;
  for (int32_t i = 0; i < a.size; ++i) acc += pa[i];
  data(v.id)[0] = acc;
  return v;
}

Tape::Var Tape::sigmoid(Var a) {
  Var v = push(Op::kSigmoid, a.size, a.id);
  const double* pa = data(a.id);
  double* out = data(v.id);
  for (int32_t i = 0; i < a.size; ++i) out[i] = stable_sigmoid(pa[i]);
  return v;
}

Tape::Var Tape::softplus(Var a) {
  Var v = push(Op::kSoftplus, a.size, a.id);
  const double* pa = data(a.id);
  double* out = data(v.id);
  for (int32_t i = 0; i < a.size; ++i) out[i] = stable_softplus(pa[i]);
  return v;
}

Tape::Var Tape::tanh(Var a) {
  Var v = push(Op::kTanh, a.size, a.id);
  const double* pa = data(a.id);
  double* out = data(v.id);
  for (int32_t i = 0; i < a.size; ++i) out[i] = std::tanh(pa[i]);
  return v;
}

Tape::Var Tape::l2_normalize(Var a) {
  Var v = push(Op::kL2Norm, a.size, a.id);
  const double* pa = data(a.id);
  double* out = data(v.id);
  double norm2 = 0.0;
  for (int32_t i = 0; i < a.size; ++i) norm2 += pa[i] * pa[i];
  double norm = std::max(std::sqrt(norm2), kNormFloor);
  nodes_[size_t(v.id)].aux = norm;
  for (int32_t i = 0; i < a.size; ++i) out[i] = pa[i] / norm;
  return v;
}

Tape::Var Tape::div_scalar(Var num, Var den) {
  check_scalar(num, "div_scalar");
  check_scalar(den, "div_scalar");
  Var v = push(Op::kDivScalar, 1, num.id, den.id);
  data(v.id)[0] = data(num.id)[0] / data(den.id)[0];
  return v;
}

Tape::Var Tape::bce(Var p, double label) {
  check_scalar(p, "bce");
  Var v = push(Op::kBce, 1, p.id);
  nodes_[size_t(v.id)].aux = label;
  double pv = std::min(std::max(data(p.id)[0], kProbEps), 1.0 - kProbEps);
  data(v.id)[0] = -(label * std::log(pv) + (1.0 - label) * std::log(1.0 - pv));
  return v;
}

Tape::Var Tape::gaussian_kl(Var mu, Var logvar) {
  if (mu.size != logvar.size) throw ConfigError("gaussian_kl: size mismatch");
  Var v = push(Op::kGaussKl, 1, mu.id, logvar.id);
  data(v.id)[0] = coral::gaussian_kl(
      std::span<const double>(data(mu.id), size_t(mu.size)),
      std::span<const double>(data(logvar.id), size_t(logvar.size)));
  return v;
}

Tape::Var Tape::reparameterize(Var mu, Var logvar, std::span<const double> eps) {
  if (mu.size != logvar.size || size_t(mu.size) != eps.size()) {
    throw ConfigError("reparameterize: size mismatch");
  }
  Var e = constant(eps);
  Var v = push(Op::kReparam, mu.size, mu.id, logvar.id, e.id);
  coral::reparameterize(
      std::span<const double>(data(mu.id), size_t(mu.size)),
      std::span<const double>(data(logvar.id), size_t(logvar.size)),
      std::span<const double>(data(e.id), size_t(mu.size)),
      std::span<double>(data(v.id), size_t(mu.size)));
  return v;
}

double Tape::scalar(Var v) const {
  check_scalar(v, "scalar");
  return data(v.id)[0];
}

std::span<const double> Tape::value(Var v) const {
  return {data(v.id), size_t(v.size)};
}

void Tape::check_scalar(Var v, const char* what) {
  if (v.size != 1) {
    throw ConfigError(std::string(what) + ": expected a scalar node");
  }
}

void Tape::backward(Var root) {
  check_scalar(root, "backward");
  grads_.assign(values_.size(), 0.0);
  grads_[size_t(nodes_[size_t(root.id)].off)] = 1.0;

  for (int32_t id = int32_t(nodes_.size()) - 1; id >= 0; --id) {
    const Node& n = nodes_[size_t(id)];
    const double* g = grads_.data() + n.off;
    const double* y = values_.data() + n.off;
    switch (n.op) {
      case Op::kLeaf:
      case Op::kConst:
        break;
      case Op::kAdd: {
        double* ga = grad(n.a);
        double* gb = grad(n.b);
        for (int32_t i = 0; i < n.size; ++i) {
          ga[i] += g[i];
          gb[i] += g[i];
        }
        break;
      }
      case Op::kSub: {
        double* ga = grad(n.a);
        double* gb = grad(n.b);
        for (int32_t i = 0; i < n.size; ++i) {
          ga[i] += g[i];
          gb[i] -= g[i];
        }
        break;
      }
      case Op::kMul: {
        double* ga = grad(n.a);
        double* gb = grad(n.b);
        const double* va = data(n.a);
        const double* vb = data(n.b);
        for (int32_t i = 0; i < n.size; ++i) {
          ga[i] += g[i] * vb[i];
          gb[i] += g[i] * va[i];
        }
        break;
      }
      case Op::kScale: {
        double* ga = grad(n.a);
        double* gs = grad(n.b);
        const double* va = data(n.a);
        double sv = data(n.b)[0];
        double acc = 0.0;
        for (int32_t i = 0; i < n.size; ++i) {
          ga[i] += g[i] * sv;
          acc += g[i] * va[i];
        }
        gs[0] += acc;
        break;
      }
      case Op::kScaleConst: {
        double* ga = grad(n.a);
        for (int32_t i = 0; i < n.size; ++i) ga[i] += g[i] * n.aux;
        break;
      }
      case Op::kAddConst: {
        double* ga = grad(n.a);
        for (int32_t i = 0; i < n.size; ++i) ga[i] += g[i];
        break;
      }
      case Op::kMatVec: {
        double* gw = grad(n.a);
        double* gx = grad(n.b);
        const double* w = data(n.a);
        const double* x = data(n.b);
        for (int32_t r = 0; r < n.rows; ++r) {
          double gr = g[r];
          if (gr == 0.0) continue;
          double* gwrow = gw + int64_t(r) * n.cols;
          const double* wrow = w + int64_t(r) * n.cols;
          for (int32_t c = 0; c < n.cols; ++c) {
            gwrow[c] += gr * x[c];
            gx[c] += gr * wrow[c];
          }
        }
        break;
      }
      case Op::kDot: {
        double* ga = grad(n.a);
        double* gb = grad(n.b);
        const double* va = data(n.a);
        const double* vb = data(n.b);
        double gs = g[0];
        int32_t len = nodes_[size_t(n.a)].size;
        for (int32_t i = 0; i < len; ++i) {
          ga[i] += gs * vb[i];
          gb[i] += gs * va[i];
        }
        break;
      }
      case Op::kSum: {
        double* ga = grad(n.a);
        double gs = g[0];
        int32_t len = nodes_[size_t(n.a)].size;
        for (int32_t i = 0; i < len; ++i) ga[i] += gs;
        break;
      }
      case Op::kSigmoid: {
        double* ga = grad(n.a);
        for (int32_t i = 0; i < n.size; ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
        break;
      }
      case Op::kSoftplus: {
        double* ga = grad(n.a);
        const double* va = data(n.a);
        for (int32_t i = 0; i < n.size; ++i) {
          ga[i] += g[i] * stable_sigmoid(va[i]);
        }
        break;
      }
      case Op::kTanh: {
        double* ga = grad(n.a);
        for (int32_t i = 0; i < n.size; ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
        break;
      }
      case Op::kL2Norm: {
        // y = x / n with n = max(||x||, floor). Above the floor the
        // Jacobian is (I - y y^T) / n; at the floor it is I / floor.
        double* ga = grad(n.a);
        const double norm = n.aux;
        if (norm > kNormFloor) {
          double ydotg = 0.0;
          for (int32_t i = 0; i < n.size; ++i) ydotg += y[i] * g[i];
          for (int32_t i = 0; i < n.size; ++i) {
            ga[i] += (g[i] - y[i] * ydotg) / norm;
          }
        } else {
          for (int32_t i = 0; i < n.size; ++i) ga[i] += g[i] / norm;
        }
        break;
      }
      case Op::kDivScalar: {
        double* gnum = grad(n.a);
        double* gden = grad(n.b);
        double num = data(n.a)[0];
        double den = data(n.b)[0];
        gnum[0] += g[0] / den;
        gden[0] -= g[0] * num / (den * den);
        break;
      }
      case Op::kBce: {
        double* gp = grad(n.a);
        double pv = std::min(std::max(data(n.a)[0], kProbEps), 1.0 - kProbEps);
        gp[0] += g[0] * (pv - n.aux) / (pv * (1.0 - pv));
        break;
      }
      case Op::kGaussKl: {
        double* gmu = grad(n.a);
        double* glv = grad(n.b);
        const double* mu = data(n.a);
        const double* lv = data(n.b);
        double gs = g[0];
        int32_t len = nodes_[size_t(n.a)].size;
        for (int32_t i = 0; i < len; ++i) {
          gmu[i] += gs * mu[i];
          glv[i] += gs * 0.5 * (std::exp(lv[i]) - 1.0);
        }
        break;
      }
      case Op::kReparam: {
        double* gmu = grad(n.a);
        double* glv = grad(n.b);
        const double* mu = data(n.a);
        for (int32_t i = 0; i < n.size; ++i) {
          gmu[i] += g[i];
          // d z / d logvar = (z - mu) / 2
          glv[i] += g[i] * 0.5 * (y[i] - mu[i]);
        }
        break;
      }
    }
  }
}

void Tape::scatter_grads(GradResult& out) const {
  for (int32_t id : leaves_) {
    const Node& n = nodes_[size_t(id)];
    std::vector<double>& dst = out.grads[size_t(n.param_id)];
    const double* g = grads_.data() + n.off;
    for (int32_t i = 0; i < n.size; ++i) dst[size_t(n.param_off + i)] += g[i];
  }
}

void Tape::visit_leaf_grads(
    const std::function<void(int, int64_t, std::span<const double>)>& fn) const {
  for (int32_t id : leaves_) {
    const Node& n = nodes_[size_t(id)];
    fn(n.param_id, n.param_off,
       std::span<const double>(grads_.data() + n.off, size_t(n.size)));
  }
}

GradResult evaluate_with_gradients(const ParamStore& params,
                                   const std::function<Var(Tape&)>& forward) {
  Tape tape(&params);
  Var root = forward(tape);
  if (root.size != 1) {
    throw ConfigError("evaluate_with_gradients: forward map must end in a scalar");
  }
  tape.backward(root);
  GradResult out = make_zero_grads(params);
  out.loss = tape.scalar(root);
  tape.scatter_grads(out);
  return out;
}

}  // namespace coral
