// SPDX-License-Identifier: Apache-2.0

#include "gtn/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace gtn {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& why) {
  throw std::invalid_argument("config: field '" + field + "': " + why);
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(key, e.what());
  }
}

const std::set<std::string> kKnownMethods = {"no-kd", "vanilla-kd", "dkd", "sftn", "gtn"};

DatasetSpec parse_dataset(const json& j) {
  DatasetSpec d;
  d.kind = get_or<std::string>(j, "kind", "spiral");
  if (d.kind != "spiral" && d.kind != "blobs" && d.kind != "csv" && d.kind != "idx-images") {
    fail("dataset.kind", "unknown kind '" + d.kind + "'");
  }
  d.classes = get_or<int>(j, "classes", 4);
  d.points_per_class = get_or<int>(j, "points_per_class", 250);
  d.noise = get_or<float>(j, "noise", 0.1f);
  d.dims = get_or<int>(j, "dims", 2);
  d.separation = get_or<float>(j, "separation", 4.0f);
  d.path = get_or<std::string>(j, "path", "");
  d.labels_path = get_or<std::string>(j, "labels_path", "");
  d.label_column = get_or<int>(j, "label_column", -1);
  if ((d.kind == "spiral" || d.kind == "blobs") && d.classes < 2) {
    fail("dataset.classes", "need at least 2 classes");
  }
  if (d.kind == "csv" && d.path.empty()) fail("dataset.path", "required for csv datasets");
  if (d.kind == "idx-images" && (d.path.empty() || d.labels_path.empty())) {
    fail("dataset.path", "image and label paths required for idx datasets");
  }
  return d;
}

TrainConfig parse_train(const json& j, const json& loss) {
  TrainConfig t;
  t.epochs = get_or<int>(j, "epochs", 60);
  t.batch_size = get_or<int>(j, "batch_size", 32);
  t.learning_rate = get_or<float>(j, "learning_rate", 0.05f);
  t.momentum = get_or<float>(j, "momentum", 0.9f);
  const std::string sched = get_or<std::string>(j, "schedule", "cosine");
  if (sched == "cosine") {
    t.schedule = LrSchedule::kCosine;
  } else if (sched == "constant") {
    t.schedule = LrSchedule::kConstant;
  } else {
    fail("train.schedule", "expected 'cosine' or 'constant', got '" + sched + "'");
  }
  t.alternation_period = get_or<int>(j, "alternation_period", 2);
  t.phi_freeze_epochs = get_or<int>(j, "phi_freeze_epochs", 0);
  t.phi_step_size = get_or<float>(j, "phi_step_size", 0.1f);
  t.branch_count = get_or<int>(j, "branches", 0);

  t.loss.alpha = get_or<float>(loss, "alpha", 1.0f);
  t.loss.temperature = get_or<float>(loss, "temperature", 4.0f);
  t.loss.dkd_alpha = get_or<float>(loss, "dkd_alpha", 1.0f);
  t.loss.dkd_beta = get_or<float>(loss, "dkd_beta", 2.0f);
  try {
    t.validate();
    if (t.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  } catch (const std::exception& e) {
    fail("train", e.what());
  }
  return t;
}

}  // namespace

json block_spec_to_json(const BlockSpec& spec) {
  json j{{"kind", block_kind_name(spec.kind)}, {"in", spec.in_dim}, {"out", spec.out_dim}};
  if (spec.kind == BlockKind::kDenseResidual || spec.kind == BlockKind::kConvResidual) {
    j["width"] = spec.width;
    j["depth"] = spec.depth;
  }
  return j;
}

BlockSpec block_spec_from_json(const json& j) {
  BlockSpec s;
  s.kind = block_kind_from_name(j.at("kind").get<std::string>());
  s.in_dim = get_or<int>(j, "in", 1);
  s.out_dim = get_or<int>(j, "out", 1);
  s.width = get_or<int>(j, "width", 1);
  s.depth = get_or<int>(j, "depth", 1);
  return s;
}

json teacher_spec_to_json(const TeacherSpec& spec) {
  json blocks = json::array();
  for (const auto& b : spec.blocks) blocks.push_back(block_spec_to_json(b));
  return json{{"blocks", blocks}, {"classes", spec.classes}};
}

TeacherSpec teacher_spec_from_json(const json& j) {
  TeacherSpec spec;
  spec.classes = get_or<int>(j, "classes", 2);
  if (j.contains("blocks") && j.at("blocks").is_array()) {
    for (const auto& bj : j.at("blocks")) spec.blocks.push_back(block_spec_from_json(bj));
  } else {
    // Generator shorthand: first block adapts input_dim, the rest keep width.
    const int input_dim = get_or<int>(j, "input_dim", 2);
    const int feature_dim = get_or<int>(j, "feature_dim", 16);
    const int blocks = get_or<int>(j, "blocks", 4);
    const int depth = get_or<int>(j, "block_depth", 2);
    const int hidden = get_or<int>(j, "hidden_width", feature_dim);
    const bool conv = get_or<std::string>(j, "kind", "dense") == "conv";
    if (blocks < 1) fail("teacher.blocks", "need at least one block");
    const BlockKind kind = conv ? BlockKind::kConvResidual : BlockKind::kDenseResidual;
    for (int i = 0; i < blocks; ++i) {
      BlockSpec b;
      b.kind = kind;
      b.in_dim = i == 0 ? input_dim : feature_dim;
      b.out_dim = feature_dim;
      b.width = hidden;
      b.depth = depth;
      spec.blocks.push_back(b);
    }
  }
  for (std::size_t i = 0; i < spec.blocks.size(); ++i) {
    try {
      validate_block_spec(spec.blocks[i]);
    } catch (const std::exception& e) {
      fail("teacher.blocks[" + std::to_string(i) + "]", e.what());
    }
  }
  if (spec.classes < 2) fail("teacher.classes", "need at least 2 classes");
  return spec;
}

json supernet_spec_to_json(const SupernetSpec& spec) {
  json layers = json::array();
  for (const auto& layer : spec.layers) {
    json cands = json::array();
    for (const auto& c : layer) {
      json cj{{"kind", block_kind_name(c.kind)}};
      if (c.kind == BlockKind::kDenseResidual || c.kind == BlockKind::kConvResidual) {
        cj["width"] = c.width;
        cj["depth"] = c.depth;
      }
      cands.push_back(cj);
    }
    layers.push_back(cands);
  }
  return json{{"feature_dim", spec.feature_dim}, {"layer_candidates", layers}};
}

SupernetSpec supernet_spec_from_json(const json& j) {
  SupernetSpec spec;
  spec.feature_dim = get_or<int>(j, "feature_dim", 16);
  auto parse_candidate = [&](const json& cj) {
    BlockSpec b;
    b.kind = block_kind_from_name(cj.at("kind").get<std::string>());
    b.width = get_or<int>(cj, "width", 1);
    b.depth = get_or<int>(cj, "depth", 1);
    b.in_dim = spec.feature_dim;
    b.out_dim = spec.feature_dim;
    return b;
  };
  if (j.contains("layer_candidates")) {
    for (const auto& lj : j.at("layer_candidates")) {
      std::vector<BlockSpec> layer;
      for (const auto& cj : lj) layer.push_back(parse_candidate(cj));
      spec.layers.push_back(std::move(layer));
    }
  } else if (j.contains("candidates")) {
    // Shorthand: the same candidate set repeated `layers` times.
    const int depth = get_or<int>(j, "layers", 3);
    if (depth < 1) fail("supernet.layers", "need at least one layer");
    std::vector<BlockSpec> layer;
    for (const auto& cj : j.at("candidates")) layer.push_back(parse_candidate(cj));
    for (int l = 0; l < depth; ++l) spec.layers.push_back(layer);
  } else {
    fail("supernet", "expected 'layer_candidates' or 'candidates'");
  }
  try {
    spec = normalize_supernet_spec(std::move(spec));
  } catch (const std::exception& e) {
    fail("supernet", e.what());
  }
  return spec;
}

ExperimentConfig parse_config(const json& doc) {
  ExperimentConfig cfg;
  if (doc.contains("seeds")) {
    cfg.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
  } else if (doc.contains("seed")) {
    cfg.seeds = {doc.at("seed").get<std::uint64_t>()};
  }
  if (cfg.seeds.empty()) fail("seeds", "need at least one seed");

  cfg.dataset = parse_dataset(doc.value("dataset", json::object()));
  cfg.teacher = teacher_spec_from_json(doc.value("teacher", json::object()));
  if (!doc.contains("supernet")) fail("supernet", "required");
  cfg.supernet = supernet_spec_from_json(doc.at("supernet"));

  if (doc.contains("pool")) {
    cfg.pool = doc.at("pool").get<std::vector<ArchitectureSample>>();
  }
  if (cfg.pool.empty()) fail("pool", "need at least one student architecture");
  for (std::size_t i = 0; i < cfg.pool.size(); ++i) {
    const auto& sample = cfg.pool[i];
    if (static_cast<int>(sample.size()) != cfg.supernet.depth()) {
      fail("pool[" + std::to_string(i) + "]",
           "sample length " + std::to_string(sample.size()) + " vs supernet depth " +
               std::to_string(cfg.supernet.depth()));
    }
    for (std::size_t l = 0; l < sample.size(); ++l) {
      const int k = static_cast<int>(cfg.supernet.layers[l].size());
      if (sample[l] < 0 || sample[l] >= k) {
        fail("pool[" + std::to_string(i) + "]",
             "candidate index " + std::to_string(sample[l]) + " out of range at layer " +
                 std::to_string(l));
      }
    }
  }

  cfg.methods = get_or<std::vector<std::string>>(
      doc, "methods", {"no-kd", "vanilla-kd", "dkd", "sftn", "gtn"});
  for (const auto& m : cfg.methods) {
    if (!kKnownMethods.count(m)) fail("methods", "unknown method '" + m + "'");
  }

  cfg.sftn_reference_students = get_or<std::vector<int>>(doc, "sftn_reference_students", {});
  for (int r : cfg.sftn_reference_students) {
    if (r < 0 || r >= static_cast<int>(cfg.pool.size())) {
      fail("sftn_reference_students",
           "reference student " + std::to_string(r) + " is not in the pool (size " +
               std::to_string(cfg.pool.size()) + ")");
    }
  }
  const bool wants_sftn =
      std::find(cfg.methods.begin(), cfg.methods.end(), "sftn") != cfg.methods.end();
  if (wants_sftn && cfg.sftn_reference_students.empty()) {
    fail("sftn_reference_students", "required when methods include 'sftn'");
  }

  cfg.train = parse_train(doc.value("train", json::object()), doc.value("loss", json::object()));
  if (cfg.train.branch_count > 0) {
    if (cfg.train.branch_count > static_cast<int>(cfg.teacher.blocks.size()) - 1) {
      fail("train.branches", "exceeds teacher cut points");
    }
    if (cfg.train.branch_count > cfg.supernet.depth()) {
      fail("train.branches", "exceeds supernet depth");
    }
  }

  cfg.base_kd = get_or<std::string>(doc, "base_kd", "vanilla");
  if (cfg.base_kd != "vanilla" && cfg.base_kd != "dkd") {
    fail("base_kd", "expected 'vanilla' or 'dkd'");
  }

  cfg.device_budgets_mb =
      get_or<std::vector<double>>(doc, "device_budgets_mb", {4.0, 8.0, 1024.0});

  if (doc.contains("nas")) {
    const json& nj = doc.at("nas");
    cfg.nas.enabled = get_or<bool>(nj, "enabled", true);
    cfg.nas.supernet =
        nj.contains("supernet") ? supernet_spec_from_json(nj.at("supernet")) : cfg.supernet;
    if (nj.contains("budgets")) {
      const auto b = nj.at("budgets").get<std::vector<int>>();
      if (b.size() != 3) fail("nas.budgets", "expected exactly three budgets");
      cfg.nas.budgets = {b[0], b[1], b[2]};
    }
    for (int b : cfg.nas.budgets) {
      if (b < 1 || b > cfg.nas.supernet.depth()) {
        fail("nas.budgets", "budget " + std::to_string(b) + " out of range for supernet depth " +
                                std::to_string(cfg.nas.supernet.depth()));
      }
    }
    if (!(cfg.nas.budgets[0] >= cfg.nas.budgets[1] && cfg.nas.budgets[1] >= cfg.nas.budgets[2])) {
      fail("nas.budgets", "budgets must be non-increasing (large, medium, small)");
    }
    cfg.nas.epochs = get_or<int>(nj, "epochs", 30);
    cfg.nas.seeds = get_or<std::vector<std::uint64_t>>(nj, "seeds", {1, 2, 3});
    if (cfg.nas.seeds.empty()) fail("nas.seeds", "need at least one seed");
  }

  cfg.out_dir = get_or<std::string>(doc, "out_dir", "out");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  json doc;
  try {
    doc = json::parse(in, nullptr, /*allow_exceptions=*/true, /*ignore_comments=*/true);
  } catch (const json::exception& e) {
    throw std::runtime_error("config: parse error in " + path + ": " + e.what());
  }
  return parse_config(doc);
}

json normalized_json(const ExperimentConfig& cfg) {
  json d{{"kind", cfg.dataset.kind},
         {"classes", cfg.dataset.classes},
         {"points_per_class", cfg.dataset.points_per_class},
         {"noise", cfg.dataset.noise},
         {"dims", cfg.dataset.dims},
         {"separation", cfg.dataset.separation},
         {"path", cfg.dataset.path},
         {"labels_path", cfg.dataset.labels_path},
         {"label_column", cfg.dataset.label_column}};
  json t{{"epochs", cfg.train.epochs},
         {"batch_size", cfg.train.batch_size},
         {"learning_rate", cfg.train.learning_rate},
         {"momentum", cfg.train.momentum},
         {"schedule", cfg.train.schedule == LrSchedule::kCosine ? "cosine" : "constant"},
         {"alternation_period", cfg.train.alternation_period},
         {"phi_freeze_epochs", cfg.train.phi_freeze_epochs},
         {"phi_step_size", cfg.train.phi_step_size},
         {"branches", cfg.train.branch_count}};
  json l{{"alpha", cfg.train.loss.alpha},
         {"temperature", cfg.train.loss.temperature},
         {"dkd_alpha", cfg.train.loss.dkd_alpha},
         {"dkd_beta", cfg.train.loss.dkd_beta}};
  json out{{"seeds", cfg.seeds},
           {"dataset", d},
           {"teacher", teacher_spec_to_json(cfg.teacher)},
           {"supernet", supernet_spec_to_json(cfg.supernet)},
           {"pool", cfg.pool},
           {"methods", cfg.methods},
           {"sftn_reference_students", cfg.sftn_reference_students},
           {"train", t},
           {"loss", l},
           {"base_kd", cfg.base_kd},
           {"device_budgets_mb", cfg.device_budgets_mb},
           {"out_dir", cfg.out_dir}};
  if (cfg.nas.enabled) {
    out["nas"] = json{{"enabled", true},
                      {"supernet", supernet_spec_to_json(cfg.nas.supernet)},
                      {"budgets", cfg.nas.budgets},
                      {"epochs", cfg.nas.epochs},
                      {"seeds", cfg.nas.seeds}};
  }
  return out;
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t config_hash(const ExperimentConfig& cfg) { return fnv1a64(normalized_json(cfg).dump()); }

}  // namespace gtn
