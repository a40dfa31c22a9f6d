#include "coral/graph.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <sstream>

#include "coral/errors.hpp"
#include "coral/io_util.hpp"

namespace coral {

namespace {
constexpr double kNormFloor = 1e-8;
}

CandidatePolicy CandidatePolicy::parse(const std::string& text) {
  auto bad = [&]() -> ConfigError {
    return ConfigError("bad policy '" + text +
                       "'; expected base | n-sample:<n> | m-select:<m> | "
                       "full-kit:<n>:<m>");
  };
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : text) {
    if (ch == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  parts.push_back(cur);

  auto parse_int = [&](const std::string& s) {
    try {
      size_t pos = 0;
      long v = std::stol(s, &pos);
      if (pos != s.size() || v < 1) throw std::invalid_argument(s);
      return int32_t(v);
    } catch (const std::exception&) {
      throw bad();
    }
  };

  CandidatePolicy p;
  if (parts[0] == "base" && parts.size() == 1) {
    p.kind = Kind::kBase;
  } else if (parts[0] == "n-sample" && parts.size() == 2) {
    p.kind = Kind::kNSample;
    p.n = parse_int(parts[1]);
  } else if (parts[0] == "m-select" && parts.size() == 2) {
    p.kind = Kind::kMSelect;
    p.m = parse_int(parts[1]);
  } else if (parts[0] == "full-kit" && parts.size() == 3) {
    p.kind = Kind::kFullKit;
    p.n = parse_int(parts[1]);
    p.m = parse_int(parts[2]);
  } else {
    throw bad();
  }
  return p;
}

std::string CandidatePolicy::to_string() const {
  switch (kind) {
    case Kind::kBase:
      return "base";
    case Kind::kNSample:
      return "n-sample:" + std::to_string(n);
    case Kind::kMSelect:
      return "m-select:" + std::to_string(m);
    case Kind::kFullKit:
      return "full-kit:" + std::to_string(n) + ":" + std::to_string(m);
  }
  return "base";
}

void relative_feature(std::span<const double> z_u, std::span<const double> z_v,
                      std::span<double> out) {
  if (z_u.size() != z_v.size() || z_u.size() != out.size()) {
    throw ConfigError("relative_feature: size mismatch");
  }
  bool self = z_u.data() == z_v.data();
  double norm2 = 0.0;
  if (self) {
    for (size_t i = 0; i < z_u.size(); ++i) norm2 += z_u[i] * z_u[i];
  } else {
    for (size_t i = 0; i < z_u.size(); ++i) {
      double dlt = z_u[i] - z_v[i];
      norm2 += dlt * dlt;
    }
  }
  double norm = std::max(std::sqrt(norm2), kNormFloor);
  if (self) {
    for (size_t i = 0; i < z_u.size(); ++i) out[i] = z_u[i] / norm;
  } else {
    for (size_t i = 0; i < z_u.size(); ++i) out[i] = (z_u[i] - z_v[i]) / norm;
  }
}

std::vector<double> context_vector(int32_t u, std::span<const int32_t> context,
                                   std::span<const double> z, int32_t dim) {
  std::vector<double> rc(size_t(dim), 0.0);
  std::vector<double> feat(static_cast<size_t>(dim));
  std::span<const double> z_u = z.subspan(size_t(u) * size_t(dim), size_t(dim));
  bool has_self = false;
  for (int32_t v : context) {
    if (v == u) {
      has_self = true;
      relative_feature(z_u, z_u, feat);
    } else {
      relative_feature(z_u, z.subspan(size_t(v) * size_t(dim), size_t(dim)), feat);
    }
    for (int32_t i = 0; i < dim; ++i) rc[size_t(i)] += feat[size_t(i)];
  }
  if (!has_self) throw ConfigError("context_vector: context must contain u");
  return rc;
}

double match_score(std::span<const double> z_v, std::span<const double> rc) {
  if (z_v.size() != rc.size()) throw ConfigError("match_score: size mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < z_v.size(); ++i) acc += z_v[i] * rc[i];
  return acc;
}

std::vector<NeighborEntry> select_neighbors(int32_t u, std::span<const double> z,
                                            int32_t m_learners, int32_t dim,
                                            int32_t k, const CandidatePolicy& policy,
                                            RngStream stream,
                                            uint64_t* scoring_ops) {
  if (size_t(m_learners) * size_t(dim) != z.size()) {
    throw ConfigError("select_neighbors: feature table size mismatch");
  }
  std::vector<NeighborEntry> picked;
  if (k <= 0 || m_learners <= 1) return picked;

  auto row = [&](int32_t v) {
    return z.subspan(size_t(v) * size_t(dim), size_t(dim));
  };

  // Context starts as {u}; rc accumulates one relative feature per member.
  std::vector<double> rc(static_cast<size_t>(dim));
  relative_feature(row(u), row(u), rc);

  std::vector<int32_t> remaining;
  remaining.reserve(size_t(m_learners) - 1);
  for (int32_t v = 0; v < m_learners; ++v) {
    if (v != u) remaining.push_back(v);
  }

  int32_t per_step = 1;  // selections absorbed per scoring round
  if (policy.kind == CandidatePolicy::Kind::kMSelect ||
      policy.kind == CandidatePolicy::Kind::kFullKit) {
    per_step = policy.m;
  }
  bool sampled = policy.kind == CandidatePolicy::Kind::kNSample ||
                 policy.kind == CandidatePolicy::Kind::kFullKit;

  std::vector<double> feat(static_cast<size_t>(dim));
  std::vector<std::pair<double, int32_t>> scored;
  std::vector<int32_t> pool;

  while (int32_t(picked.size()) < k && !remaining.empty()) {
    // Candidate set for this round.
    if (sampled) {
      int32_t want = std::min<int32_t>(policy.n, int32_t(remaining.size()));
      pool = remaining;
      for (int32_t i = 0; i < want; ++i) {
        int32_t j = i + int32_t(stream.next_below(uint64_t(int32_t(pool.size()) - i)));
        std::swap(pool[size_t(i)], pool[size_t(j)]);
      }
      pool.resize(size_t(want));
      std::sort(pool.begin(), pool.end());
    } else {
      pool = remaining;
    }

    scored.clear();
    scored.reserve(pool.size());
    for (int32_t v : pool) {
      scored.emplace_back(match_score(row(v), rc), v);
    }
    if (scoring_ops) *scoring_ops += pool.size();

    int32_t take = std::min<int32_t>(per_step, int32_t(scored.size()));
    take = std::min<int32_t>(take, k - int32_t(picked.size()));
    // Highest score first; equal scores fall back to the smaller index.
    std::partial_sort(scored.begin(), scored.begin() + take, scored.end(),
                      [](const auto& a, const auto& b) {
                        if (a.first != b.first) return a.first > b.first;
                        return a.second < b.second;
                      });

    for (int32_t i = 0; i < take; ++i) {
      NeighborEntry e;
      e.v = scored[size_t(i)].second;
      e.f = scored[size_t(i)].first;
      e.step = int32_t(picked.size()) + 1;
      picked.push_back(e);
    }
    // Absorb this round's selections into the context, then drop them
    // from the candidate pool.
    for (int32_t i = 0; i < take; ++i) {
      int32_t v = scored[size_t(i)].second;
      relative_feature(row(u), row(v), feat);
      for (int32_t j = 0; j < dim; ++j) rc[size_t(j)] += feat[size_t(j)];
      remaining.erase(std::find(remaining.begin(), remaining.end(), v));
    }
  }
  return picked;
}

namespace {

template <typename PerPair>
CollabGraph build_common(int32_t m_learners, int32_t concepts, int32_t k,
                         const std::string& policy_desc, uint64_t seed,
                         bool parallel, PerPair per_pair) {
  CollabGraph g;
  g.learners = m_learners;
  g.concepts = concepts;
  g.k = k;
  g.seed = seed;
  g.policy = policy_desc;
  g.lists.resize(size_t(m_learners) * size_t(concepts));

  std::vector<uint64_t> ops(g.lists.size(), 0);
  auto t0 = std::chrono::steady_clock::now();
  std::exception_ptr err;

  int64_t total = int64_t(g.lists.size());
#pragma omp parallel for schedule(dynamic, 8) if (parallel)
  for (int64_t i = 0; i < total; ++i) {
    try {
      int32_t u = int32_t(i / concepts);
      int32_t c = int32_t(i % concepts);
      g.lists[size_t(i)] = per_pair(u, c, &ops[size_t(i)]);
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);

  for (uint64_t o : ops) g.scoring_ops += o;
  g.build_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return g;
}

std::vector<double> concept_slice(std::span<const double> means, int32_t m_learners,
                                  int32_t concepts, int32_t dim, int32_t c) {
  std::vector<double> z(size_t(m_learners) * size_t(dim));
  for (int32_t u = 0; u < m_learners; ++u) {
    const double* src =
        means.data() + (size_t(u) * size_t(concepts) + size_t(c)) * size_t(dim);
    std::copy(src, src + dim, z.data() + size_t(u) * size_t(dim));
  }
  return z;
}

}  // namespace

CollabGraph build_graph(std::span<const double> means, int32_t m_learners,
                        int32_t concepts, int32_t dim, int32_t k,
                        const CandidatePolicy& policy, uint64_t seed,
                        bool parallel) {
  if (size_t(m_learners) * size_t(concepts) * size_t(dim) != means.size()) {
    throw ConfigError("build_graph: mean table size mismatch");
  }
  // Per-concept feature tables, extracted once and shared by every row.
  std::vector<std::vector<double>> z_by_concept(static_cast<size_t>(concepts));
  for (int32_t c = 0; c < concepts; ++c) {
    z_by_concept[size_t(c)] = concept_slice(means, m_learners, concepts, dim, c);
  }
  RngStream root = RngStream(seed).derive("graph");
  return build_common(
      m_learners, concepts, k, policy.to_string(), seed, parallel,
      [&](int32_t u, int32_t c, uint64_t* ops) {
        RngStream stream = root.derive(uint64_t(u)).derive(uint64_t(c));
        return select_neighbors(u, z_by_concept[size_t(c)], m_learners, dim, k,
                                policy, stream, ops);
      });
}

CollabGraph build_graph_serial(std::span<const double> means, int32_t m_learners,
                               int32_t concepts, int32_t dim, int32_t k,
                               const CandidatePolicy& policy, uint64_t seed) {
  return build_graph(means, m_learners, concepts, dim, k, policy, seed, false);
}

CollabGraph build_knn_graph(std::span<const double> means, int32_t m_learners,
                            int32_t concepts, int32_t dim, int32_t k,
                            bool parallel) {
  if (size_t(m_learners) * size_t(concepts) * size_t(dim) != means.size()) {
    throw ConfigError("build_knn_graph: mean table size mismatch");
  }
  std::vector<std::vector<double>> z_by_concept(static_cast<size_t>(concepts));
  for (int32_t c = 0; c < concepts; ++c) {
    z_by_concept[size_t(c)] = concept_slice(means, m_learners, concepts, dim, c);
  }
  return build_common(
      m_learners, concepts, k, "knn", 0, parallel,
      [&](int32_t u, int32_t c, uint64_t* ops) {
        const std::vector<double>& z = z_by_concept[size_t(c)];
        const double* zu = z.data() + size_t(u) * size_t(dim);
        std::vector<std::pair<double, int32_t>> dist;
        dist.reserve(size_t(m_learners) - 1);
        for (int32_t v = 0; v < m_learners; ++v) {
          if (v == u) continue;
          const double* zv = z.data() + size_t(v) * size_t(dim);
          double d2 = 0.0;
          for (int32_t i = 0; i < dim; ++i) {
            double dlt = zu[i] - zv[i];
            d2 += dlt * dlt;
          }
          dist.emplace_back(d2, v);
        }
        *ops += dist.size();
        int32_t take = std::min<int32_t>(k, int32_t(dist.size()));
        std::partial_sort(dist.begin(), dist.begin() + take, dist.end(),
                          [](const auto& a, const auto& b) {
                            if (a.first != b.first) return a.first < b.first;
                            return a.second < b.second;
                          });
        std::vector<NeighborEntry> out;
        out.reserve(size_t(take));
        for (int32_t i = 0; i < take; ++i) {
          NeighborEntry e;
          e.v = dist[size_t(i)].second;
          e.f = 0.0;  // uniform attention in the knn ablation
          e.step = i + 1;
          out.push_back(e);
        }
        return out;
      });
}

void export_neighbors_csv(const CollabGraph& graph, const IdMap& learners,
                          const IdMap& concepts, const std::string& path) {
  std::ostringstream out;
  out << "learner_id,concept_id,rank,neighbor_id,f_score\n";
  for (int32_t u = 0; u < graph.learners; ++u) {
    for (int32_t c = 0; c < graph.concepts; ++c) {
      for (const NeighborEntry& e : graph.at(u, c)) {
        out << learners.names[size_t(u)] << ',' << concepts.names[size_t(c)]
            << ',' << e.step << ',' << learners.names[size_t(e.v)] << ','
            << format_double(e.f) << '\n';
      }
    }
  }
  atomic_write_file(path, out.str());
}

}  // namespace coral
