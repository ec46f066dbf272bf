// SPDX-License-Identifier: Apache-2.0
//
// Desk-scale datasets: synthetic spirals and Gaussian blobs, plus loaders for
// numeric CSV files and IDX image/label pairs. Splits are a deterministic
// seeded shuffle into 70% train / 10% validation / 20% test.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gtn/losses.hpp"
#include "gtn/tensor.hpp"

namespace gtn {

struct DatasetSpec {
  std::string kind;  // "spiral" | "blobs" | "csv" | "idx-images"

  int classes = 2;
  int points_per_class = 100;
  float noise = 0.1f;       // spiral jitter
  int dims = 2;             // blobs feature count
  float separation = 4.0f;  // blobs center distance scale

  std::string path;         // csv file or idx image file
  std::string labels_path;  // idx label file
  int label_column = -1;    // csv label column; -1 = last
};

struct DataSplit {
  Tensor inputs;           // [n, features...] with no gradient
  std::vector<int> labels;

  int size() const { return static_cast<int>(labels.size()); }
};

struct Dataset {
  DataSplit train, val, test;
  int classes = 0;
  std::vector<int> sample_shape;  // e.g. {2} for planar points, {1,8,8} for images

  int input_dim() const;  // flattened feature count (dense nets)
};

Dataset make_dataset(const DatasetSpec& spec, std::uint64_t seed);

// Copies the indexed rows into a batch tensor (plain data, no tape).
Batch take_batch(const DataSplit& split, const std::vector<int>& idx, int begin, int count);

}  // namespace gtn
