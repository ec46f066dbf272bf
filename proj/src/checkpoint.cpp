// SPDX-License-Identifier: Apache-2.0

#include "gtn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "gtn/config.hpp"

namespace gtn {

namespace {

constexpr char kMagic[4] = {'G', 'T', 'N', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32(out, bits);
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::string& path) : bytes_(bytes), path_(path) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }

  std::uint16_t u16() {
    const char* p = take(2);
    return static_cast<std::uint16_t>(static_cast<std::uint8_t>(p[0]) |
                                      (static_cast<std::uint8_t>(p[1]) << 8));
  }

  std::uint32_t u32() {
    const char* p = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(p[i])) << (8 * i);
    return v;
  }

  float f32() {
    const std::uint32_t bits = u32();
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
  }

  std::string str(std::size_t len) { return std::string(take(len), len); }

  bool exhausted() const { return pos_ == bytes_.size(); }

 private:
  const char* take(std::size_t n) {
    if (pos_ + n > bytes_.size()) {
      throw CheckpointError(CheckpointErrorKind::kTruncated,
                            "checkpoint: truncated payload in " + path_);
    }
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  const std::string& bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_arrays(const std::string& path, const std::string& metadata,
                  const std::vector<NamedArray>& arrays) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(metadata.size()));
  out.append(metadata);
  put_u32(out, static_cast<std::uint32_t>(arrays.size()));
  for (const auto& a : arrays) {
    if (a.name.size() > 0xffff) {
      throw CheckpointError(CheckpointErrorKind::kMalformed, "checkpoint: array name too long");
    }
    put_u16(out, static_cast<std::uint16_t>(a.name.size()));
    out.append(a.name);
    out.push_back(0);  // dtype code 0: f32
    out.push_back(static_cast<char>(a.shape.size()));
    std::int64_t n = 1;
    for (int d : a.shape) {
      put_u32(out, static_cast<std::uint32_t>(d));
      n *= d;
    }
    if (n != static_cast<std::int64_t>(a.data.size())) {
      throw CheckpointError(CheckpointErrorKind::kMalformed,
                            "checkpoint: array '" + a.name + "' shape/data mismatch");
    }
    for (float f : a.data) put_f32(out, f);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("checkpoint: write failed for " + path);
}

ArrayFile read_arrays(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  Reader r(bytes, path);
  const std::string magic = r.str(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    throw CheckpointError(CheckpointErrorKind::kBadMagic,
                          "checkpoint: bad magic in " + path);
  }
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw CheckpointError(CheckpointErrorKind::kVersionMismatch,
                          "checkpoint: format version " + std::to_string(version) +
                              " (expected " + std::to_string(kVersion) + ") in " + path);
  }
  ArrayFile file;
  file.metadata = r.str(r.u32());
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedArray a;
    a.name = r.str(r.u16());
    const std::uint8_t dtype = r.u8();
    if (dtype != 0) {
      throw CheckpointError(CheckpointErrorKind::kMalformed,
                            "checkpoint: unsupported dtype code " + std::to_string(dtype));
    }
    const std::uint8_t rank = r.u8();
    std::int64_t n = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      const std::uint32_t dim = r.u32();
      if (dim == 0) {
        throw CheckpointError(CheckpointErrorKind::kMalformed, "checkpoint: zero dimension");
      }
      a.shape.push_back(static_cast<int>(dim));
      n *= dim;
    }
    a.data.resize(static_cast<std::size_t>(n));
    for (auto& v : a.data) v = r.f32();
    file.arrays.push_back(std::move(a));
  }
  return file;
}

void save_checkpoint(const TeacherNet& net, const std::string& path,
                     const std::string& extra_metadata_json) {
  nlohmann::json meta{{"kind", "teacher"},
                      {"spec", teacher_spec_to_json(net.spec())},
                      {"extra", nlohmann::json::parse(extra_metadata_json)}};
  std::vector<NamedArray> arrays;
  for (const auto& p : net.parameters()) {
    arrays.push_back({p.name, p.tensor.shape(), p.tensor.values()});
  }
  write_arrays(path, meta.dump(), arrays);
}

TeacherNet load_checkpoint(const std::string& path) {
  const ArrayFile file = read_arrays(path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(file.metadata);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(CheckpointErrorKind::kMalformed,
                          std::string("checkpoint: bad metadata: ") + e.what());
  }
  if (meta.value("kind", "") != "teacher") {
    throw CheckpointError(CheckpointErrorKind::kMalformed,
                          "checkpoint: not a teacher checkpoint");
  }
  const TeacherSpec spec = teacher_spec_from_json(meta.at("spec"));
  std::mt19937 rng(0);
  TeacherNet net(spec, rng);

  std::unordered_map<std::string, const NamedArray*> by_name;
  for (const auto& a : file.arrays) by_name[a.name] = &a;
  auto params = net.parameters();
  for (auto& p : params) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) {
      throw CheckpointError(CheckpointErrorKind::kMalformed,
                            "checkpoint: missing array '" + p.name + "'");
    }
    if (it->second->shape != p.tensor.shape()) {
      throw CheckpointError(CheckpointErrorKind::kMalformed,
                            "checkpoint: shape mismatch for '" + p.name + "'");
    }
    p.tensor.values() = it->second->data;
  }
  return net;
}

}  // namespace gtn
