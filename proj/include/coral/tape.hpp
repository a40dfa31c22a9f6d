#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "coral/param_store.hpp"

namespace coral {

// Reverse-mode accumulation over a small fused operator set. Nodes are
// evaluated eagerly at creation, values and adjoints live in two flat
// arenas, and backward() runs one reverse sweep from a scalar root.
//
// Leaves are slices of ParamStore arrays; after backward() their adjoints
// can be scattered into GradResult buffers. A tape captures parameter
// values at leaf-creation time, so rebuilding the tape re-evaluates the
// function at the store's current values.
class Tape {
 public:
  struct Var {
    int32_t id = -1;
    int32_t size = 0;
  };

  explicit Tape(const ParamStore* params) : params_(params) {}

  // Keeps arena capacity; invalidates all Vars.
  void reset();

  // Leaf over a whole array or a slice of it. Repeated requests for the
  // same slice return the same node.
  Var leaf(std::string_view name);
  Var leaf_slice(int param_id, int64_t offset, int32_t len);

  Var constant(std::span<const double> values);
  Var constant_scalar(double v);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var vec, Var scalar);          // vec * scalar node
  Var scale_const(Var a, double c);        // a * c
  Var add_const(Var a, double c);          // a + c
  Var matvec(Var w, int32_t rows, int32_t cols, Var x);
  Var dot(Var a, Var b);
  Var sum(Var a);
  Var sigmoid(Var a);
  Var softplus(Var a);
  Var tanh(Var a);
  Var l2_normalize(Var a);                 // x / max(||x||, 1e-8)
  Var div_scalar(Var num, Var den);        // scalars
  Var bce(Var p, double label);            // scalar p, label in {0,1}
  Var gaussian_kl(Var mu, Var logvar);
  Var reparameterize(Var mu, Var logvar, std::span<const double> eps);

  double scalar(Var v) const;
  std::span<const double> value(Var v) const;

  // Seeds d(root)=1 and sweeps in reverse creation order. root must be a
  // scalar node.
  void backward(Var root);

  // Adds leaf adjoints into grad buffers aligned with the parameter store.
  void scatter_grads(GradResult& out) const;

  // Visits (param_id, offset, adjoint values) for every parameter leaf.
  void visit_leaf_grads(
      const std::function<void(int, int64_t, std::span<const double>)>& fn) const;

  size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op : uint8_t {
    kLeaf,
    kConst,
    kAdd,
    kSub,
    kMul,
    kScale,
    kScaleConst,
    kAddConst,
    kMatVec,
    kDot,
    kSum,
    kSigmoid,
    kSoftplus,
    kTanh,
    kL2Norm,
    kDivScalar,
    kBce,
    kGaussKl,
    kReparam,
  };

  struct Node {
    Op op;
    int32_t a = -1;
    int32_t b = -1;
    int32_t c = -1;
    int32_t size = 0;
    int64_t off = 0;       // offset into values_/grads_
    double aux = 0.0;      // label, scale constant, cached norm
    int32_t rows = 0;      // matvec
    int32_t cols = 0;
    int32_t param_id = -1;  // leaves
    int64_t param_off = 0;
  };

  Var push(Op op, int32_t size, int32_t a = -1, int32_t b = -1, int32_t c = -1);
  double* data(int32_t id) { return values_.data() + nodes_[size_t(id)].off; }
  const double* data(int32_t id) const {
    return values_.data() + nodes_[size_t(id)].off;
  }
  double* grad(int32_t id) { return grads_.data() + nodes_[size_t(id)].off; }
  static void check_scalar(Var v, const char* what);

  const ParamStore* params_;
  std::vector<Node> nodes_;
  std::vector<double> values_;
  std::vector<double> grads_;
  std::vector<int32_t> leaves_;
  std::map<std::pair<int, int64_t>, int32_t> leaf_memo_;
};

using Var = Tape::Var;

// Builds the forward map on a fresh tape, requires a scalar root, runs one
// backward sweep, and returns the loss with dense gradients for every
// array in the store.
GradResult evaluate_with_gradients(const ParamStore& params,
                                   const std::function<Var(Tape&)>& forward);

}  // namespace coral
