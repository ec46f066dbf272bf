// SPDX-License-Identifier: Apache-2.0
//
// Experiment configuration: JSON schema parsing, validation with
// field-naming errors, and default filling. The normalized form (defaults
// expanded, shorthand forms resolved) is what the rest of the harness sees.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gtn/dataset.hpp"
#include "gtn/supernet.hpp"
#include "gtn/trainer.hpp"

namespace gtn {

struct NasSection {
  bool enabled = false;
  SupernetSpec supernet;
  std::array<int, 3> budgets = {4, 3, 2};
  int epochs = 30;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
};

struct ExperimentConfig {
  std::vector<std::uint64_t> seeds = {1};
  DatasetSpec dataset;
  TeacherSpec teacher;
  SupernetSpec supernet;
  std::vector<ArchitectureSample> pool;
  std::vector<std::string> methods;            // subset of the known method set
  std::vector<int> sftn_reference_students;    // pool indices
  TrainConfig train;                           // shared by teacher and KD stages
  std::string base_kd = "vanilla";             // objective for the sftn/gtn columns
  std::vector<double> device_budgets_mb = {4.0, 8.0, 1024.0};
  NasSection nas;
  std::string out_dir = "out";
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const nlohmann::json& doc);

// Canonical JSON with every default filled in and shorthands expanded.
nlohmann::json normalized_json(const ExperimentConfig& cfg);

// Stable 64-bit hash of the normalized config (FNV-1a over the dump).
std::uint64_t config_hash(const ExperimentConfig& cfg);

// Deterministic per-cell seed derivation.
std::uint64_t fnv1a64(const std::string& text);

nlohmann::json block_spec_to_json(const BlockSpec& spec);
BlockSpec block_spec_from_json(const nlohmann::json& j);
nlohmann::json teacher_spec_to_json(const TeacherSpec& spec);
TeacherSpec teacher_spec_from_json(const nlohmann::json& j);
nlohmann::json supernet_spec_to_json(const SupernetSpec& spec);
SupernetSpec supernet_spec_from_json(const nlohmann::json& j);

}  // namespace gtn
