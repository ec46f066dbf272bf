// SPDX-License-Identifier: Apache-2.0

#include "gtn/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "gtn/checkpoint.hpp"
#include "gtn/distill.hpp"
#include "gtn/nas.hpp"

namespace gtn {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t cell_seed(const std::string& cell_id) { return fnv1a64(cell_id); }

std::vector<CellRecord> read_cells(const std::string& path) {
  std::vector<CellRecord> cells;
  std::ifstream in(path);
  if (!in) return cells;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      cells.push_back(cell_from_json(json::parse(line)));
    } catch (const std::exception&) {
      // Torn tail line from an interrupted run; everything before it stands.
      break;
    }
  }
  return cells;
}

namespace {

int worker_count() {
  const char* env = std::getenv("GTN_THREADS");
  if (!env) return 1;
  const int n = std::atoi(env);
  return n < 1 ? 1 : n;
}

std::string sanitize(std::string s) {
  for (auto& c : s) {
    if (c == '/' || c == ':' || c == '=') c = '-';
  }
  return s;
}

struct CellStore {
  explicit CellStore(const std::string& path) : path_(path) {
    for (auto& c : read_cells(path)) cells_[c.id] = std::move(c);
  }

  bool has_ok(const std::string& id) const {
    auto it = cells_.find(id);
    return it != cells_.end() && it->second.error.empty();
  }

  const CellRecord* find(const std::string& id) const {
    auto it = cells_.find(id);
    return it == cells_.end() ? nullptr : &it->second;
  }

  void put(CellRecord cell) {
    std::lock_guard<std::mutex> lk(mu_);
    std::ofstream out(path_, std::ios::app);
    out << cell_to_json(cell).dump() << "\n";
    cells_[cell.id] = std::move(cell);
  }

  std::vector<CellRecord> all() const {
    std::vector<CellRecord> v;
    for (const auto& [_, c] : cells_) v.push_back(c);
    return v;
  }

 private:
  std::string path_;
  std::map<std::string, CellRecord> cells_;
  std::mutex mu_;
};

void run_parallel(const std::vector<std::function<void()>>& tasks) {
  const int threads = std::min<int>(worker_count(), static_cast<int>(tasks.size()));
  if (threads <= 1) {
    for (const auto& t : tasks) t();
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (int i = 0; i < threads; ++i) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t idx = next.fetch_add(1);
        if (idx >= tasks.size()) return;
        tasks[idx]();
      }
    });
  }
  for (auto& t : pool) t.join();
}

struct TeacherTask {
  std::string key;     // e.g. "vanilla/seed=1", "sftn:r0/seed=1"
  std::string method;  // "vanilla" | "gtn" | "sftn:rK"
  std::uint64_t seed = 0;
  int reference = -1;  // sftn pool index
};

class PipelineRun {
 public:
  explicit PipelineRun(const ExperimentConfig& cfg)
      : cfg_(cfg), store_((fs::path(cfg.out_dir) / "cells.jsonl").string()) {}

  ExperimentReport run();

 private:
  bool has(const std::string& method) const {
    return std::find(cfg_.methods.begin(), cfg_.methods.end(), method) != cfg_.methods.end();
  }

  const Dataset& dataset_for(std::uint64_t seed) { return datasets_.at(seed); }

  std::string teacher_ckpt_path(const std::string& key) const {
    return (fs::path(cfg_.out_dir) / ("teacher_" + sanitize(key) + ".gtn")).string();
  }

  void run_teacher(const TeacherTask& task);
  void run_distill(const std::string& column, const std::string& teacher_key,
                   const std::string& student_id, const ArchitectureSample& arch,
                   KdMethod method, std::uint64_t seed, const SupernetSpec& pool_spec);
  void run_search(const std::string& slot, int budget);

  ExperimentConfig cfg_;
  CellStore store_;
  std::map<std::uint64_t, Dataset> datasets_;
  std::map<std::string, ArchitectureSample> nas_samples_;
  std::mutex nas_mu_;
};

void PipelineRun::run_teacher(const TeacherTask& task) {
  const std::string id = "teacher/" + task.key;
  if (store_.has_ok(id) && fs::exists(teacher_ckpt_path(task.key))) {
    try {
      load_checkpoint(teacher_ckpt_path(task.key));
      return;
    } catch (const CheckpointError&) {
      // Unreadable file: retrain below.
    }
  }

  CellRecord cell;
  cell.id = id;
  cell.stage = "teacher";
  cell.method = task.method;
  cell.seed = task.seed;
  try {
    const Dataset& data = dataset_for(task.seed);
    TrainConfig tc = cfg_.train;
    tc.seed = cell_seed(id);
    TrainResult result;
    if (task.method == "vanilla") {
      result = train_vanilla(tc, cfg_.teacher, data.train);
    } else if (task.method == "gtn") {
      result = train_gtn(tc, cfg_.teacher, cfg_.supernet, data.train);
    } else {
      result = train_sftn(tc, cfg_.teacher, cfg_.supernet,
                          cfg_.pool.at(static_cast<std::size_t>(task.reference)), data.train);
    }
    cell.accuracy_pct = evaluate(result.teacher, data.test) * 100.0;
    cell.seconds = result.seconds;
    save_checkpoint(result.teacher, teacher_ckpt_path(task.key),
                    json{{"cell", id}, {"seed", task.seed}}.dump());
  } catch (const std::exception& e) {
    cell.error = e.what();
  }
  store_.put(std::move(cell));
}

void PipelineRun::run_distill(const std::string& column, const std::string& teacher_key,
                              const std::string& student_id, const ArchitectureSample& arch,
                              KdMethod method, std::uint64_t seed, const SupernetSpec& pool_spec) {
  const std::string id = "distill/" + column + "/student=" + student_id + "/seed=" + std::to_string(seed);
  if (store_.has_ok(id)) return;

  CellRecord cell;
  cell.id = id;
  cell.stage = "distill";
  cell.method = column;
  cell.student = student_id;
  cell.seed = seed;
  try {
    const Dataset& data = dataset_for(seed);
    DistillJob job;
    job.method = method;
    job.student_arch = arch;
    job.pool = pool_spec;
    job.cfg = cfg_.train;
    job.cfg.seed = cell_seed(id);
    TeacherNet teacher;
    if (method != KdMethod::kNone) {
      // Per-job clone from disk: jobs never share mutable teacher state.
      teacher = load_checkpoint(teacher_ckpt_path(teacher_key));
      job.teacher = &teacher;
    }
    const DistillResult result = distill(job, data);
    cell.accuracy_pct = result.test_accuracy * 100.0;
    cell.seconds = result.seconds;
  } catch (const std::exception& e) {
    cell.error = e.what();
  }
  store_.put(std::move(cell));
}

void PipelineRun::run_search(const std::string& slot, int budget) {
  const std::uint64_t seed = cfg_.nas.seeds.front();
  const std::string id = "nas-search/" + slot + "/seed=" + std::to_string(seed);
  if (const CellRecord* done = store_.find(id); done && done->error.empty() && !done->arch.empty()) {
    std::lock_guard<std::mutex> lk(nas_mu_);
    nas_samples_[slot] = done->arch;
    return;
  }

  CellRecord cell;
  cell.id = id;
  cell.stage = "nas-search";
  cell.method = "search";
  cell.student = "nas-" + slot;
  cell.seed = seed;
  try {
    SearchBudget b;
    b.max_searchable_layers = budget;
    b.epochs = cfg_.nas.epochs;
    b.seed = cell_seed(id);
    const Dataset& data = dataset_for(cfg_.seeds.front());
    cell.arch = search(cfg_.nas.supernet, data, b, cfg_.train);
    std::lock_guard<std::mutex> lk(nas_mu_);
    nas_samples_[slot] = cell.arch;
  } catch (const std::exception& e) {
    cell.error = e.what();
  }
  store_.put(std::move(cell));
}

ExperimentReport PipelineRun::run() {
  fs::create_directories(cfg_.out_dir);

  std::set<std::uint64_t> data_seeds(cfg_.seeds.begin(), cfg_.seeds.end());
  for (std::uint64_t s : data_seeds) datasets_.emplace(s, make_dataset(cfg_.dataset, s));

  const bool need_vanilla = has("vanilla-kd") || has("dkd") || cfg_.nas.enabled;
  const bool need_gtn = has("gtn") || cfg_.nas.enabled;

  // Phase 1: teachers.
  std::vector<TeacherTask> teacher_tasks;
  for (std::uint64_t seed : cfg_.seeds) {
    const std::string suffix = "/seed=" + std::to_string(seed);
    if (need_vanilla) teacher_tasks.push_back({"vanilla" + suffix, "vanilla", seed, -1});
    if (need_gtn) teacher_tasks.push_back({"gtn" + suffix, "gtn", seed, -1});
    if (has("sftn")) {
      for (int r : cfg_.sftn_reference_students) {
        teacher_tasks.push_back(
            {"sftn:r" + std::to_string(r) + suffix, "sftn:r" + std::to_string(r), seed, r});
      }
    }
  }
  std::vector<std::function<void()>> tasks;
  for (const auto& t : teacher_tasks) tasks.push_back([this, t] { run_teacher(t); });
  run_parallel(tasks);

  // Phase 2: pool distillations and searches.
  tasks.clear();
  const KdMethod base = kd_method_from_name(cfg_.base_kd);
  for (std::uint64_t seed : cfg_.seeds) {
    const std::string tsuffix = "/seed=" + std::to_string(seed);
    for (std::size_t i = 0; i < cfg_.pool.size(); ++i) {
      const std::string sid = "s" + std::to_string(i);
      const ArchitectureSample arch = cfg_.pool[i];
      if (has("no-kd")) {
        tasks.push_back([=, this] {
          run_distill("no-kd", "", sid, arch, KdMethod::kNone, seed, cfg_.supernet);
        });
      }
      if (has("vanilla-kd")) {
        tasks.push_back([=, this] {
          run_distill("vanilla-kd", "vanilla" + tsuffix, sid, arch, KdMethod::kVanilla, seed,
                      cfg_.supernet);
        });
      }
      if (has("dkd")) {
        tasks.push_back([=, this] {
          run_distill("dkd", "vanilla" + tsuffix, sid, arch, KdMethod::kDkd, seed, cfg_.supernet);
        });
      }
      if (has("sftn")) {
        for (int r : cfg_.sftn_reference_students) {
          const std::string col = "sftn:r" + std::to_string(r);
          tasks.push_back([=, this] {
            run_distill(col, col + tsuffix, sid, arch, base, seed, cfg_.supernet);
          });
        }
      }
      if (has("gtn")) {
        tasks.push_back([=, this] {
          run_distill("gtn", "gtn" + tsuffix, sid, arch, base, seed, cfg_.supernet);
        });
      }
    }
  }
  if (cfg_.nas.enabled) {
    const char* slots[3] = {"l", "m", "s"};
    for (int i = 0; i < 3; ++i) {
      const std::string slot = slots[i];
      const int budget = cfg_.nas.budgets[static_cast<std::size_t>(i)];
      tasks.push_back([=, this] { run_search(slot, budget); });
    }
  }
  run_parallel(tasks);

  // Phase 3: searched students distilled under the first-seed teachers.
  if (cfg_.nas.enabled) {
    tasks.clear();
    const std::string tsuffix = "/seed=" + std::to_string(cfg_.seeds.front());
    for (const auto& [slot, arch] : nas_samples_) {
      for (std::uint64_t seed : cfg_.nas.seeds) {
        const std::string sid = "nas-" + slot;
        const ArchitectureSample a = arch;
        tasks.push_back([=, this] {
          run_distill("vanilla-kd", "vanilla" + tsuffix, sid, a, KdMethod::kVanilla, seed,
                      cfg_.nas.supernet);
        });
        tasks.push_back([=, this] {
          run_distill("gtn", "gtn" + tsuffix, sid, a, base, seed, cfg_.nas.supernet);
        });
      }
    }
    run_parallel(tasks);
  }

  ExperimentReport report = build_report(cfg_, store_.all());
  write_report_files(cfg_, report);
  return report;
}

}  // namespace

ExperimentReport run_pipeline(const ExperimentConfig& cfg) {
  PipelineRun run(cfg);
  return run.run();
}

ExperimentReport build_report(const ExperimentConfig& cfg, const std::vector<CellRecord>& cells) {
  json doc;
  char hash_buf[32];
  std::snprintf(hash_buf, sizeof(hash_buf), "%016llx",
                static_cast<unsigned long long>(config_hash(cfg)));
  doc["config_hash"] = std::string(hash_buf);
  doc["methods"] = cfg.methods;
  std::vector<std::string> notes;

  // accuracy[column][student] = {per_seed, mean}
  std::map<std::string, std::map<std::string, std::map<std::uint64_t, double>>> acc;
  json teachers = json::object();
  std::map<std::string, std::vector<double>> teacher_seconds;  // method -> times
  json errors = json::array();

  for (const auto& c : cells) {
    if (!c.error.empty()) {
      errors.push_back(json{{"id", c.id}, {"error", c.error}});
      continue;
    }
    if (c.stage == "teacher") {
      teachers[c.method + "/seed=" + std::to_string(c.seed)] =
          json{{"accuracy_pct", c.accuracy_pct}, {"seconds", c.seconds}};
      const std::string base_method = c.method.substr(0, c.method.find(':'));
      teacher_seconds[base_method].push_back(c.seconds);
    } else if (c.stage == "distill") {
      acc[c.method][c.student][c.seed] = c.accuracy_pct;
    }
  }

  json acc_json = json::object();
  for (const auto& [method, students] : acc) {
    json mj = json::object();
    for (const auto& [student, per_seed] : students) {
      json ps = json::object();
      double sum = 0.0;
      for (const auto& [seed, a] : per_seed) {
        ps[std::to_string(seed)] = a;
        sum += a;
      }
      mj[student] = json{{"per_seed", ps}, {"mean", sum / static_cast<double>(per_seed.size())}};
    }
    acc_json[method] = mj;
  }
  doc["accuracy"] = acc_json;

  // Deltas vs the vanilla-KD column, paired by (student, seed).
  const bool have_vkd = acc.count("vanilla-kd") != 0;
  if (!have_vkd) {
    notes.push_back("delta unavailable: no vanilla-kd column to compare against");
  } else {
    const auto& vkd = acc.at("vanilla-kd");
    auto paired_delta = [&](const std::map<std::uint64_t, double>& per_seed,
                            const std::string& student, bool pool_only) -> std::pair<bool, double> {
      if (pool_only && student.rfind("nas-", 0) == 0) return {false, 0.0};
      auto vs = vkd.find(student);
      if (vs == vkd.end()) return {false, 0.0};
      double sum = 0.0;
      int n = 0;
      for (const auto& [seed, a] : per_seed) {
        auto va = vs->second.find(seed);
        if (va == vs->second.end()) continue;
        sum += delta_vs_vanilla(a, va->second);
        ++n;
      }
      if (n == 0) return {false, 0.0};
      return {true, sum / n};
    };

    json delta_json = json::object();
    for (const auto& [method, students] : acc) {
      if (method == "vanilla-kd") continue;
      std::map<std::string, double> per_student;
      for (const auto& [student, per_seed] : students) {
        auto [ok, d] = paired_delta(per_seed, student, /*pool_only=*/true);
        if (ok) per_student[student] = d;
      }
      if (per_student.empty()) continue;
      const DeltaStats stats = compute_delta_stats(per_student);
      delta_json[method] = json{{"per_student", stats.per_student},
                                {"mu", stats.mu},
                                {"sigma", stats.sigma},
                                {"range", stats.range}};
    }
    doc["delta"] = delta_json;

    // Specialized teachers evaluated on students they were not specialized for.
    std::map<std::string, double> nonref;
    bool has_nonpositive = false;
    for (const auto& [method, students] : acc) {
      if (method.rfind("sftn:r", 0) != 0) continue;
      const int ref = std::stoi(method.substr(6));
      for (const auto& [student, per_seed] : students) {
        if (student == "s" + std::to_string(ref)) continue;
        auto [ok, d] = paired_delta(per_seed, student, true);
        if (!ok) continue;
        nonref[method + "/" + student] = d;
        if (d <= 0.0) has_nonpositive = true;
      }
    }
    if (!nonref.empty()) {
      const DeltaStats stats = compute_delta_stats(nonref);
      doc["sftn_nonref"] = json{{"per_cell", stats.per_student},
                                {"mu", stats.mu},
                                {"sigma", stats.sigma},
                                {"has_nonpositive_cell", has_nonpositive}};
    }
  }

  // Memory table over pool and searched students.
  std::vector<std::pair<std::string, std::int64_t>> mem_students;
  const Dataset probe = make_dataset(cfg.dataset, cfg.seeds.front());
  for (std::size_t i = 0; i < cfg.pool.size(); ++i) {
    mem_students.push_back({"s" + std::to_string(i),
                            student_param_count(cfg.supernet, cfg.pool[i], probe.input_dim(),
                                                probe.classes)});
  }
  json nas_json;
  if (cfg.nas.enabled) {
    std::map<std::string, ArchitectureSample> samples;
    for (const auto& c : cells) {
      if (c.stage == "nas-search" && c.error.empty() && !c.arch.empty()) {
        samples[c.student.substr(4)] = c.arch;  // "nas-l" -> "l"
      }
    }
    json sample_list = json::array();
    json count_list = json::array();
    for (const char* slot : {"l", "m", "s"}) {
      auto it = samples.find(slot);
      if (it == samples.end()) continue;
      const std::int64_t params =
          student_param_count(cfg.nas.supernet, it->second, probe.input_dim(), probe.classes);
      sample_list.push_back(it->second);
      count_list.push_back(params);
      mem_students.push_back({std::string("nas-") + slot, params});
    }
    nas_json = json{{"samples", sample_list}, {"param_counts", count_list}};
    doc["nas"] = nas_json;
  }
  json mem_json = json::array();
  for (const auto& row : memory_report(mem_students, cfg.device_budgets_mb)) {
    mem_json.push_back(json{{"student", row.student},
                            {"param_count", row.param_count},
                            {"mb_32bit", row.mb_32bit},
                            {"mb_8bit", row.mb_8bit},
                            {"fits", row.fits}});
  }
  doc["memory"] = mem_json;
  doc["device_budgets_mb"] = cfg.device_budgets_mb;

  // Timing (excluded from the deterministic view).
  json timing;
  timing["teachers"] = teachers;
  if (teacher_seconds.count("gtn") && teacher_seconds.count("sftn")) {
    const auto mean = [](const std::vector<double>& v) {
      double s = 0.0;
      for (double x : v) s += x;
      return s / static_cast<double>(v.size());
    };
    const double gtn_mean = mean(teacher_seconds.at("gtn"));
    const double sftn_mean = mean(teacher_seconds.at("sftn"));
    timing["timecost"] = json{{"gtn_seconds", gtn_mean},
                              {"sftn_mean_seconds", sftn_mean},
                              {"vanilla_seconds",
                               teacher_seconds.count("vanilla") ? mean(teacher_seconds.at("vanilla")) : 0.0},
                              {"crossover_k", timecost_crossover(gtn_mean, sftn_mean)}};
  }
  doc["timing"] = timing;

  if (!errors.empty()) doc["cell_errors"] = errors;
  doc["notes"] = notes;

  ExperimentReport report;
  report.doc = std::move(doc);
  return report;
}

void write_report_files(const ExperimentConfig& cfg, const ExperimentReport& report) {
  fs::create_directories(cfg.out_dir);
  {
    std::ofstream out(fs::path(cfg.out_dir) / "report.json");
    out << report.doc.dump(2) << "\n";
  }
  {
    std::ofstream out(fs::path(cfg.out_dir) / "report.txt");
    out << report.render_text();
  }
  const std::string svg = report.render_timecost_svg();
  if (!svg.empty()) {
    std::ofstream out(fs::path(cfg.out_dir) / "times.svg");
    out << svg;
  }
}

}  // namespace gtn
