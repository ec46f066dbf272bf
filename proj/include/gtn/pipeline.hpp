// SPDX-License-Identifier: Apache-2.0
//
// Full experiment orchestration: teacher trainings per method, distillation
// of every pool student under every teacher, searched-student evaluation,
// delta statistics, time-cost and memory reports. Results persist per cell
// in <out_dir>/cells.jsonl so interrupted runs resume where they stopped.
//
// Worker count comes from the GTN_THREADS environment variable (default 1).
// Every cell derives its RNG solely from its id, never from scheduling, so
// any thread count produces the same accuracy cells.

#pragma once

#include <string>
#include <vector>

#include "gtn/config.hpp"
#include "gtn/report.hpp"

namespace gtn {

ExperimentReport run_pipeline(const ExperimentConfig& cfg);

// Pure aggregation over persisted cells; run_pipeline ends with this, and the
// `report` CLI command re-runs it on an existing out directory.
ExperimentReport build_report(const ExperimentConfig& cfg, const std::vector<CellRecord>& cells);

std::vector<CellRecord> read_cells(const std::string& path);

// Deterministic cell seed: FNV-1a of the cell id.
std::uint64_t cell_seed(const std::string& cell_id);

// Writes report.json, report.txt and times.svg under cfg.out_dir.
void write_report_files(const ExperimentConfig& cfg, const ExperimentReport& report);

}  // namespace gtn
