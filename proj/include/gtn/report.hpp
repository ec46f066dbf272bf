// SPDX-License-Identifier: Apache-2.0
//
// Report assembly: accuracy/delta aggregates over persisted cells, the
// time-cost crossover, and the memory-size table. Everything here is a pure
// function of its inputs so aggregates can be recomputed independently.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gtn/supernet.hpp"

namespace gtn {

struct DeltaStats {
  std::map<std::string, double> per_student;  // student id -> seed-mean delta (pp)
  double mu = 0.0;
  double sigma = 0.0;  // population standard deviation across students
  double range = 0.0;  // max - min
};

DeltaStats compute_delta_stats(const std::map<std::string, double>& per_student);

// Smallest k with k * sftn_mean_seconds > gtn_seconds (at least 1).
int timecost_crossover(double gtn_seconds, double sftn_mean_seconds);

struct MemoryRow {
  std::string student;
  std::int64_t param_count = 0;
  double mb_32bit = 0.0;  // 4 bytes per weight, MB = 1e6 bytes
  double mb_8bit = 0.0;   // 1 byte per weight
  std::vector<bool> fits;  // 8-bit size vs each device budget
};

std::vector<MemoryRow> memory_report(
    const std::vector<std::pair<std::string, std::int64_t>>& students,
    const std::vector<double>& device_budgets_mb);

// One result cell, persisted as a JSON line.
struct CellRecord {
  std::string id;
  std::string stage;   // "teacher" | "distill" | "nas-search"
  std::string method;  // e.g. "vanilla", "gtn", "sftn:r1", "vanilla-kd", "no-kd"
  std::string student;  // "s3" pool students, "nas-l/m/s" searched students, "" for teachers
  std::uint64_t seed = 0;
  double accuracy_pct = -1.0;
  double seconds = 0.0;
  ArchitectureSample arch;  // search results
  std::string error;
};

nlohmann::json cell_to_json(const CellRecord& cell);
CellRecord cell_from_json(const nlohmann::json& j);

struct ExperimentReport {
  nlohmann::json doc;

  std::string render_text() const;
  std::string render_timecost_svg() const;
};

// Report with every nondeterministic (timing) field removed; two runs of the
// same config compare bit-equal on this view.
nlohmann::json deterministic_view(const nlohmann::json& report_doc);

}  // namespace gtn
