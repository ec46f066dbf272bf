// SPDX-License-Identifier: Apache-2.0
//
// Binary checkpoint container. Layout, all integers little-endian:
//
//   magic "GTN1"
//   u32 format version (currently 1)
//   u32 metadata length, then UTF-8 metadata text
//   u32 array count
//   per array:
//     u16 name length, UTF-8 name
//     u8  dtype code (0 = 32-bit float)
//     u8  rank
//     u32 dims[rank]
//     f32 payload, row-major
//
// Round-trips are bit-exact.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "gtn/blocks.hpp"

namespace gtn {

enum class CheckpointErrorKind { kBadMagic, kVersionMismatch, kTruncated, kMalformed };

class CheckpointError : public std::runtime_error {
 public:
  CheckpointError(CheckpointErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  CheckpointErrorKind kind() const { return kind_; }

 private:
  CheckpointErrorKind kind_;
};

struct NamedArray {
  std::string name;
  std::vector<int> shape;
  std::vector<float> data;
};

struct ArrayFile {
  std::string metadata;
  std::vector<NamedArray> arrays;
};

void write_arrays(const std::string& path, const std::string& metadata,
                  const std::vector<NamedArray>& arrays);
ArrayFile read_arrays(const std::string& path);

// Teacher persistence: metadata carries the spec so load rebuilds the net.
void save_checkpoint(const TeacherNet& net, const std::string& path,
                     const std::string& extra_metadata_json = "{}");
TeacherNet load_checkpoint(const std::string& path);

}  // namespace gtn
