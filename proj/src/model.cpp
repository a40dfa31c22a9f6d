#include "coral/model.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <unordered_map>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "coral/errors.hpp"

namespace coral {

namespace {

constexpr int32_t kChunkLearners = 32;  // fixed so results ignore thread count

// Sparse leaf gradients of one chunk, drained into the shared buffers in
// chunk order.
struct ChunkGrads {
  struct Ref {
    int param_id;
    int64_t offset;
    int32_t len;
    size_t data_off;
  };
  std::vector<Ref> refs;
  std::vector<double> data;
  double enc_sum = 0.0;
  double kl_sum = 0.0;
  double dec_sum = 0.0;
};

struct ChunkRecords {
  int32_t learner;
  std::vector<Interaction> records;  // batch order
};

// Builds the differentiable forward for one chunk of learners.
class ChunkBuilder {
 public:
  ChunkBuilder(const ModelRef& m, const QMatrix& qm, const CollabGraph* graph,
               const BatchEvalConfig& cfg, int64_t batch_size)
      : m_(m),
        qm_(qm),
        graph_(graph),
        cfg_(cfg),
        batch_size_(batch_size),
        tape_(m.params),
        layer_memo_(size_t(std::max<int32_t>(cfg.layers, 1))) {}

  Tape& tape() { return tape_; }

  // Scalar root of the chunk objective. Also exposes the raw term sums.
  Var build(std::span<const ChunkRecords> groups, double* enc_sum,
            double* kl_sum, double* dec_sum) {
    Var enc = tape_.constant_scalar(0.0);
    Var kl = tape_.constant_scalar(0.0);
    Var dec = tape_.constant_scalar(0.0);

    for (const ChunkRecords& g : groups) {
      int32_t u = g.learner;
      Var theta = ability(u, /*fused=*/false);
      Var theta_t = graph_ ? ability(u, /*fused=*/true) : theta;
      kl = tape_.add(kl, learner_kl(u));
      for (const Interaction& r : g.records) {
        enc = tape_.add(enc, tape_.bce(predict(u, r.question, theta, false),
                                       double(r.correct)));
        Var p_dec = graph_ ? predict(u, r.question, theta_t, true)
                           : predict(u, r.question, theta, false);
        dec = tape_.add(dec, tape_.bce(p_dec, double(r.correct)));
      }
    }

    *enc_sum = tape_.scalar(enc);
    *kl_sum = tape_.scalar(kl);
    *dec_sum = tape_.scalar(dec);

    double inv_b = 1.0 / double(batch_size_);
    Var root = tape_.add(tape_.scale_const(enc, cfg_.alpha * inv_b),
                         tape_.scale_const(kl, cfg_.beta * inv_b));
    return tape_.add(root, tape_.scale_const(dec, inv_b));
  }

 private:
  int64_t key(int32_t u, int32_t c) const {
    return int64_t(u) * m_.dims.concepts + c;
  }

  Var net_leaf(int id) {
    return tape_.leaf_slice(id, 0, int32_t(m_.params->array(id).size()));
  }

  // Sampled (or mean) state for one (learner, concept) row.
  Var z(int32_t u, int32_t c) {
    auto it = z_memo_.find(key(u, c));
    if (it != z_memo_.end()) return it->second;
    int32_t d = m_.dims.dim;
    Var mu = tape_.leaf_slice(m_.id_mu, m_.state_offset(u, c), d);
    Var out;
    if (cfg_.sample) {
      Var lv = tape_.leaf_slice(m_.id_logvar, m_.state_offset(u, c), d);
      eps_buf_.resize(size_t(d));
      cfg_.eps_root.derive(uint64_t(u)).derive(uint64_t(c))
          .fill_normal(eps_buf_);
      out = tape_.reparameterize(mu, lv, eps_buf_);
    } else {
      out = mu;
    }
    z_memo_.emplace(key(u, c), out);
    return out;
  }

  Var zhat(int32_t u, int32_t c) {
    auto it = zhat_memo_.find(key(u, c));
    if (it != zhat_memo_.end()) return it->second;
    int32_t d = m_.dims.dim;
    Var w = tape_.leaf_slice(m_.id_agg_w, int64_t(c) * d * d, d * d);
    Var b = tape_.leaf_slice(m_.id_agg_b, int64_t(c) * d, d);
    Var g = tape_.sigmoid(tape_.add(tape_.matvec(w, d, d, z(u, c)), b));
    Var out = tape_.l2_normalize(g);
    zhat_memo_.emplace(key(u, c), out);
    return out;
  }

  // Unit-norm node value feeding layer `level` (1-based): the channel
  // projection for the first layer, renormalized previous outputs after.
  Var node_input(int32_t level, int32_t u, int32_t c) {
    if (level == 1) return zhat(u, c);
    return tape_.l2_normalize(layer_out(level - 1, u, c));
  }

  Var layer_out(int32_t level, int32_t u, int32_t c) {
    auto& memo = layer_memo_[size_t(level - 1)];
    auto it = memo.find(key(u, c));
    if (it != memo.end()) return it->second;

    const auto& nbrs = graph_->at(u, c);
    Var out;
    if (nbrs.empty()) {
      zero_buf_.assign(size_t(m_.dims.dim), 0.0);
      out = tape_.constant(zero_buf_);
    } else {
      Var y_u = node_input(level, u, c);
      std::vector<Var> y_v(nbrs.size());
      for (size_t j = 0; j < nbrs.size(); ++j) {
        y_v[j] = node_input(level, nbrs[j].v, c);
      }
      std::vector<double> fw = f_softmax(nbrs);
      std::vector<Var> dots(nbrs.size());
      Var total = tape_.dot(y_u, y_v[0]);
      dots[0] = total;
      for (size_t j = 1; j < nbrs.size(); ++j) {
        dots[j] = tape_.dot(y_u, y_v[j]);
        total = tape_.add(total, dots[j]);
      }
      Var acc;
      for (size_t j = 0; j < nbrs.size(); ++j) {
        Var s = tape_.add_const(tape_.div_scalar(dots[j], total), fw[j]);
        Var term = tape_.scale(y_v[j], s);
        acc = (j == 0) ? term : tape_.add(acc, term);
      }
      out = tape_.scale_const(acc, 1.0 / double(nbrs.size()));
    }
    memo.emplace(key(u, c), out);
    return out;
  }

  // z + r after the configured number of layers; plain z when the list is
  // empty so the collaborative and encoder-only paths coincide exactly.
  Var fused(int32_t u, int32_t c) {
    auto it = fused_memo_.find(key(u, c));
    if (it != fused_memo_.end()) return it->second;
    Var base = z(u, c);
    Var out = graph_->at(u, c).empty()
                  ? base
                  : tape_.add(base, layer_out(cfg_.layers, u, c));
    fused_memo_.emplace(key(u, c), out);
    return out;
  }

  Var psi(Var x) {
    int32_t d = m_.dims.dim, h = m_.dims.hidden;
    Var a = tape_.tanh(tape_.add(
        tape_.matvec(net_leaf(m_.id_psi_w1), h, d, x), net_leaf(m_.id_psi_b1)));
    return tape_.softplus(tape_.add(
        tape_.matvec(net_leaf(m_.id_psi_w2), 1, h, a), net_leaf(m_.id_psi_b2)));
  }

  Var phi(Var x) {
    int32_t d = m_.dims.dim, h = m_.dims.hidden;
    Var a = tape_.sigmoid(tape_.add(
        tape_.matvec(net_leaf(m_.id_phi_w1), h, d, x), net_leaf(m_.id_phi_b1)));
    return tape_.sigmoid(tape_.add(
        tape_.matvec(net_leaf(m_.id_phi_w2), 1, h, a), net_leaf(m_.id_phi_b2)));
  }

  Var ability(int32_t u, bool use_fused) {
    auto& memo = use_fused ? theta_fused_memo_ : theta_memo_;
    auto it = memo.find(u);
    if (it != memo.end()) return it->second;
    Var acc;
    for (int32_t c = 0; c < m_.dims.concepts; ++c) {
      Var t = psi(use_fused ? fused(u, c) : z(u, c));
      acc = (c == 0) ? t : tape_.add(acc, t);
    }
    memo.emplace(u, acc);
    return acc;
  }

  Var learner_kl(int32_t u) {
    Var acc;
    for (int32_t c = 0; c < m_.dims.concepts; ++c) {
      int32_t d = m_.dims.dim;
      Var mu = tape_.leaf_slice(m_.id_mu, m_.state_offset(u, c), d);
      Var lv = tape_.leaf_slice(m_.id_logvar, m_.state_offset(u, c), d);
      Var t = tape_.gaussian_kl(mu, lv);
      acc = (c == 0) ? t : tape_.add(acc, t);
    }
    return acc;
  }

  Var predict(int32_t u, int32_t q, Var theta, bool use_fused) {
    const auto& tags = qm_.tagged(q);
    Var h = tape_.leaf_slice(m_.id_h, int64_t(q) * m_.dims.dim, m_.dims.dim);
    Var acc;
    bool first = true;
    for (int32_t c : tags) {
      Var state = use_fused ? fused(u, c) : z(u, c);
      Var p = phi(tape_.sub(tape_.scale(state, theta), h));
      acc = first ? p : tape_.add(acc, p);
      first = false;
    }
    return tape_.scale_const(acc, 1.0 / double(tags.size()));
  }

  const ModelRef& m_;
  const QMatrix& qm_;
  const CollabGraph* graph_;
  const BatchEvalConfig& cfg_;
  int64_t batch_size_;
  Tape tape_;
  std::unordered_map<int64_t, Var> z_memo_;
  std::unordered_map<int64_t, Var> zhat_memo_;
  std::vector<std::unordered_map<int64_t, Var>> layer_memo_;
  std::unordered_map<int64_t, Var> fused_memo_;
  std::unordered_map<int32_t, Var> theta_memo_;
  std::unordered_map<int32_t, Var> theta_fused_memo_;
  std::vector<double> eps_buf_;
  std::vector<double> zero_buf_;
};

std::vector<std::vector<ChunkRecords>> chunk_batch(
    std::span<const Interaction> batch) {
  std::unordered_map<int32_t, size_t> pos;
  std::vector<ChunkRecords> groups;
  for (const Interaction& r : batch) {
    auto it = pos.find(r.learner);
    if (it == pos.end()) {
      pos.emplace(r.learner, groups.size());
      groups.push_back(ChunkRecords{r.learner, {r}});
    } else {
      groups[it->second].records.push_back(r);
    }
  }
  std::sort(groups.begin(), groups.end(),
            [](const ChunkRecords& a, const ChunkRecords& b) {
              return a.learner < b.learner;
            });

  std::vector<std::vector<ChunkRecords>> chunks;
  for (size_t i = 0; i < groups.size(); i += kChunkLearners) {
    size_t end = std::min(groups.size(), i + kChunkLearners);
    chunks.emplace_back(groups.begin() + long(i), groups.begin() + long(end));
  }
  return chunks;
}

LossBreakdown run_batch(const ModelRef& m, const QMatrix& qm,
                        const CollabGraph* graph,
                        std::span<const Interaction> batch,
                        const BatchEvalConfig& cfg, GradResult* out) {
  if (batch.empty()) throw ConfigError("empty batch");
  if (graph && graph->empty()) graph = nullptr;

  auto chunks = chunk_batch(batch);
  int64_t n_chunks = int64_t(chunks.size());
  std::vector<ChunkGrads> results(static_cast<size_t>(n_chunks));
  std::exception_ptr err;

#pragma omp parallel for schedule(dynamic) if (cfg.parallel && n_chunks > 1)
  for (int64_t i = 0; i < n_chunks; ++i) {
    try {
      ChunkBuilder builder(m, qm, graph, cfg, int64_t(batch.size()));
      ChunkGrads& cg = results[size_t(i)];
      Var root = builder.build(chunks[size_t(i)], &cg.enc_sum, &cg.kl_sum,
                               &cg.dec_sum);
      if (out) {
        builder.tape().backward(root);
        builder.tape().visit_leaf_grads(
            [&cg](int param_id, int64_t offset, std::span<const double> g) {
              cg.refs.push_back({param_id, offset, int32_t(g.size()),
                                 cg.data.size()});
              cg.data.insert(cg.data.end(), g.begin(), g.end());
            });
      }
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);

  // Fold chunks in index order so the sums never depend on scheduling.
  LossBreakdown b;
  b.n_records = int64_t(batch.size());
  for (const ChunkGrads& cg : results) {
    b.bce_encoder += cg.enc_sum;
    b.kl += cg.kl_sum;
    b.bce_decoder += cg.dec_sum;
  }
  double inv = 1.0 / double(batch.size());
  b.bce_encoder *= inv;
  b.kl *= inv;
  b.bce_decoder *= inv;
  b.total = cfg.alpha * b.bce_encoder + cfg.beta * b.kl + b.bce_decoder;
  if (!std::isfinite(b.total)) {
    throw NumericError("non-finite loss: bce_encoder=" +
                       std::to_string(b.bce_encoder) +
                       " kl=" + std::to_string(b.kl) +
                       " bce_decoder=" + std::to_string(b.bce_decoder));
  }

  if (out) {
    for (const ChunkGrads& cg : results) {
      for (const ChunkGrads::Ref& ref : cg.refs) {
        double* dst = out->grads[size_t(ref.param_id)].data() + ref.offset;
        const double* src = cg.data.data() + ref.data_off;
        for (int32_t t = 0; t < ref.len; ++t) dst[t] += src[t];
      }
    }
    out->loss = b.total;
  }
  return b;
}

}  // namespace

LossBreakdown batch_gradients(const ModelRef& m, const QMatrix& qm,
                              const CollabGraph* graph,
                              std::span<const Interaction> batch,
                              const BatchEvalConfig& cfg, GradResult& out) {
  return run_batch(m, qm, graph, batch, cfg, &out);
}

LossBreakdown batch_loss(const ModelRef& m, const QMatrix& qm,
                         const CollabGraph* graph,
                         std::span<const Interaction> batch,
                         const BatchEvalConfig& cfg) {
  return run_batch(m, qm, graph, batch, cfg, nullptr);
}

std::vector<double> fused_means(const ModelRef& m, const CollabGraph* graph,
                                int32_t layers, bool parallel) {
  const std::vector<double>& mu = m.params->array(m.id_mu).value;
  if (!graph || graph->empty() || graph->k <= 0) {
    return mu;
  }
  std::vector<double> residual = aggregate_all(m, *graph, mu, layers, parallel);
  return fuse_states(mu, residual);
}

std::vector<double> predict_records(const ModelRef& m, const QMatrix& qm,
                                    const CollabGraph* graph,
                                    std::span<const Interaction> records,
                                    int32_t layers, bool parallel) {
  std::vector<double> fused = fused_means(m, graph, layers, parallel);
  size_t row = size_t(m.dims.concepts) * size_t(m.dims.dim);

  // theta per learner actually appearing in the record list.
  std::vector<int32_t> learners;
  learners.reserve(records.size());
  for (const Interaction& r : records) learners.push_back(r.learner);
  std::sort(learners.begin(), learners.end());
  learners.erase(std::unique(learners.begin(), learners.end()), learners.end());

  std::vector<double> theta_of(size_t(m.dims.learners), 0.0);
  int64_t n_learners = int64_t(learners.size());
#pragma omp parallel for schedule(static) if (parallel)
  for (int64_t i = 0; i < n_learners; ++i) {
    int32_t u = learners[size_t(i)];
    theta_of[size_t(u)] = ability_value(
        m, std::span<const double>(fused.data() + size_t(u) * row, row));
  }

  std::vector<double> probs(records.size());
  int64_t n_records = int64_t(records.size());
#pragma omp parallel for schedule(static) if (parallel)
  for (int64_t i = 0; i < n_records; ++i) {
    const Interaction& r = records[size_t(i)];
    std::span<const double> z(fused.data() + size_t(r.learner) * row, row);
    probs[size_t(i)] =
        predict_response_value(m, z, theta_of[size_t(r.learner)], r.question, qm);
  }
  return probs;
}

}  // namespace coral
