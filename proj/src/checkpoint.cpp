#include <cstring>
#include <string>

#include "json.hpp"

#include "coral/errors.hpp"
#include "coral/io_util.hpp"
#include "coral/trainer.hpp"

// Checkpoint container: 8-byte magic, u32 format version, u64 header
// length, a JSON header (config, dims, id maps, parameter manifest, graph
// metadata), then raw f64/i32 payloads in manifest order. Roughly a
// "zip with one index entry"; the header carries everything needed to
// interpret the byte layout that follows.

namespace coral {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'C', 'O', 'R', 'A', 'L', 'C', 'K', 'P'};

void put_u32(std::string& out, uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

void put_u64(std::string& out, uint64_t v) {
  char b[8];
  std::memcpy(b, &v, 8);
  out.append(b, 8);
}

void put_i32(std::string& out, int32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

void put_f64(std::string& out, double v) {
  char b[8];
  std::memcpy(b, &v, 8);
  out.append(b, 8);
}

void put_f64_array(std::string& out, const std::vector<double>& v) {
  out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
}

struct Reader {
  const std::string& buf;
  size_t pos = 0;

  void need(size_t n) const {
    if (pos + n > buf.size()) throw DataError("truncated checkpoint");
  }
  uint32_t u32() {
    need(4);
    uint32_t v;
    std::memcpy(&v, buf.data() + pos, 4);
    pos += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v;
    std::memcpy(&v, buf.data() + pos, 8);
    pos += 8;
    return v;
  }
  int32_t i32() {
    need(4);
    int32_t v;
    std::memcpy(&v, buf.data() + pos, 4);
    pos += 4;
    return v;
  }
  double f64() {
    need(8);
    double v;
    std::memcpy(&v, buf.data() + pos, 8);
    pos += 8;
    return v;
  }
  void f64_array(std::vector<double>& out, size_t n) {
    need(n * sizeof(double));
    out.resize(n);
    std::memcpy(out.data(), buf.data() + pos, n * sizeof(double));
    pos += n * sizeof(double);
  }
};

json config_to_json(const TrainConfig& cfg) {
  return json{{"d", cfg.dim},
              {"hidden", cfg.hidden},
              {"layers", cfg.layers},
              {"batch", cfg.batch},
              {"lr", cfg.lr},
              {"alpha", cfg.alpha},
              {"beta", cfg.beta},
              {"k", cfg.k},
              {"knn_k", cfg.knn_k},
              {"epochs", cfg.epochs},
              {"patience", cfg.patience},
              {"seed", cfg.seed},
              {"policy", cfg.policy.to_string()},
              {"ablation", ablation_name(cfg.ablation)}};
}

TrainConfig config_from_json(const json& j) {
  TrainConfig cfg;
  cfg.dim = j.at("d").get<int32_t>();
  cfg.hidden = j.at("hidden").get<int32_t>();
  cfg.layers = j.at("layers").get<int32_t>();
  cfg.batch = j.at("batch").get<int32_t>();
  cfg.lr = j.at("lr").get<double>();
  cfg.alpha = j.at("alpha").get<double>();
  cfg.beta = j.at("beta").get<double>();
  cfg.k = j.at("k").get<int32_t>();
  cfg.knn_k = j.at("knn_k").get<int32_t>();
  cfg.epochs = j.at("epochs").get<int32_t>();
  cfg.patience = j.at("patience").get<int32_t>();
  cfg.seed = j.at("seed").get<uint64_t>();
  cfg.policy = CandidatePolicy::parse(j.at("policy").get<std::string>());
  cfg.ablation = parse_ablation(j.at("ablation").get<std::string>());
  return cfg;
}

IdMap idmap_from_json(const json& names) {
  IdMap m;
  for (const json& n : names) m.add_or_get(n.get<std::string>());
  return m;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  json header;
  header["config"] = config_to_json(ckpt.config);
  header["dims"] = {{"learners", ckpt.dims.learners},
                    {"questions", ckpt.dims.questions},
                    {"concepts", ckpt.dims.concepts},
                    {"d", ckpt.dims.dim},
                    {"hidden", ckpt.dims.hidden}};
  header["learner_ids"] = ckpt.learners.names;
  header["question_ids"] = ckpt.questions.names;
  header["concept_ids"] = ckpt.concepts.names;
  header["epoch"] = ckpt.epoch;
  if (ckpt.has_val_auc) header["best_val_auc"] = ckpt.best_val_auc;

  json manifest = json::array();
  for (int i = 0; i < ckpt.params.count(); ++i) {
    const ParamArray& a = ckpt.params.array(i);
    manifest.push_back({{"name", a.name},
                        {"shape", a.shape},
                        {"non_negative", a.non_negative}});
  }
  header["params"] = manifest;

  std::vector<int64_t> counts;
  counts.reserve(ckpt.graph.lists.size());
  for (const auto& list : ckpt.graph.lists) counts.push_back(int64_t(list.size()));
  header["graph"] = {{"learners", ckpt.graph.learners},
                     {"concepts", ckpt.graph.concepts},
                     {"k", ckpt.graph.k},
                     {"seed", ckpt.graph.seed},
                     {"policy", ckpt.graph.policy},
                     {"scoring_ops", ckpt.graph.scoring_ops},
                     {"counts", counts}};

  std::string head = header.dump();
  std::string out;
  out.reserve(head.size() + 64);
  out.append(kMagic, sizeof(kMagic));
  put_u32(out, Checkpoint::kVersion);
  put_u64(out, uint64_t(head.size()));
  out += head;

  for (int i = 0; i < ckpt.params.count(); ++i) {
    const ParamArray& a = ckpt.params.array(i);
    put_f64_array(out, a.value);
    put_f64_array(out, a.adam_m);
    put_f64_array(out, a.adam_v);
  }
  for (const auto& list : ckpt.graph.lists) {
    for (const NeighborEntry& e : list) {
      put_i32(out, e.v);
      put_i32(out, e.step);
      put_f64(out, e.f);
    }
  }
  atomic_write_file(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::string buf = read_file(path);
  Reader r{buf};
  r.need(sizeof(kMagic));
  if (std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0) {
    throw DataError(path + ": not a checkpoint file");
  }
  r.pos = sizeof(kMagic);
  uint32_t version = r.u32();
  if (version != Checkpoint::kVersion) {
    throw ConfigError(path + ": checkpoint version " + std::to_string(version) +
                      ", this build reads version " +
                      std::to_string(Checkpoint::kVersion));
  }
  uint64_t head_len = r.u64();
  r.need(head_len);
  json header;
  try {
    header = json::parse(buf.begin() + long(r.pos), buf.begin() + long(r.pos + head_len));
  } catch (const json::exception& e) {
    throw DataError(path + ": bad checkpoint header: " + e.what());
  }
  r.pos += head_len;

  Checkpoint ckpt;
  try {
    ckpt.config = config_from_json(header.at("config"));
    const json& d = header.at("dims");
    ckpt.dims.learners = d.at("learners").get<int32_t>();
    ckpt.dims.questions = d.at("questions").get<int32_t>();
    ckpt.dims.concepts = d.at("concepts").get<int32_t>();
    ckpt.dims.dim = d.at("d").get<int32_t>();
    ckpt.dims.hidden = d.at("hidden").get<int32_t>();
    ckpt.learners = idmap_from_json(header.at("learner_ids"));
    ckpt.questions = idmap_from_json(header.at("question_ids"));
    ckpt.concepts = idmap_from_json(header.at("concept_ids"));
    ckpt.epoch = header.at("epoch").get<int32_t>();
    if (header.contains("best_val_auc")) {
      ckpt.best_val_auc = header.at("best_val_auc").get<double>();
      ckpt.has_val_auc = true;
    }

    for (const json& p : header.at("params")) {
      ckpt.params.register_array(p.at("name").get<std::string>(),
                                 p.at("shape").get<std::vector<int64_t>>(),
                                 p.at("non_negative").get<bool>());
    }

    const json& g = header.at("graph");
    ckpt.graph.learners = g.at("learners").get<int32_t>();
    ckpt.graph.concepts = g.at("concepts").get<int32_t>();
    ckpt.graph.k = g.at("k").get<int32_t>();
    ckpt.graph.seed = g.at("seed").get<uint64_t>();
    ckpt.graph.policy = g.at("policy").get<std::string>();
    ckpt.graph.scoring_ops = g.at("scoring_ops").get<uint64_t>();
    std::vector<int64_t> counts = g.at("counts").get<std::vector<int64_t>>();
    if (int64_t(counts.size()) !=
        int64_t(ckpt.graph.learners) * int64_t(ckpt.graph.concepts)) {
      throw DataError(path + ": graph list count mismatch");
    }
    ckpt.graph.lists.resize(counts.size());

    for (int i = 0; i < ckpt.params.count(); ++i) {
      ParamArray& a = ckpt.params.array(i);
      size_t n = a.value.size();
      r.f64_array(a.value, n);
      r.f64_array(a.adam_m, n);
      r.f64_array(a.adam_v, n);
    }
    for (size_t i = 0; i < counts.size(); ++i) {
      auto& list = ckpt.graph.lists[i];
      list.resize(size_t(counts[i]));
      for (NeighborEntry& e : list) {
        e.v = r.i32();
        e.step = r.i32();
        e.f = r.f64();
      }
    }
  } catch (const json::exception& e) {
    throw DataError(path + ": bad checkpoint header: " + e.what());
  }
  if (r.pos != buf.size()) {
    throw DataError(path + ": trailing bytes after checkpoint payload");
  }
  // Force the id lookups now so a manifest missing model arrays fails at
  // load time, not at first use, and cross-check the recorded dimensions.
  ModelRef probe = attach_model(ckpt.params, ckpt.dims);
  int64_t state_want = int64_t(ckpt.dims.learners) *
                       int64_t(ckpt.dims.concepts) * int64_t(ckpt.dims.dim);
  if (int64_t(ckpt.params.array(probe.id_mu).value.size()) != state_want ||
      ckpt.learners.size() != ckpt.dims.learners ||
      ckpt.questions.size() != ckpt.dims.questions ||
      ckpt.concepts.size() != ckpt.dims.concepts) {
    throw DataError(path + ": checkpoint contents do not match recorded dimensions");
  }
  return ckpt;
}

}  // namespace coral
