// SPDX-License-Identifier: Apache-2.0

#include "gtn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace gtn {

namespace {

struct RawData {
  std::vector<std::vector<float>> rows;  // per-sample flat features
  std::vector<int> labels;
  std::vector<int> sample_shape;
  int classes = 0;
};

RawData make_spiral(const DatasetSpec& spec, std::mt19937& rng) {
  if (spec.classes < 2) throw std::invalid_argument("spiral: needs at least 2 classes");
  if (spec.points_per_class < 1) throw std::invalid_argument("spiral: points_per_class must be positive");
  std::normal_distribution<float> jitter(0.0f, spec.noise);
  RawData d;
  d.classes = spec.classes;
  d.sample_shape = {2};
  const float two_pi = 6.2831853f;
  for (int c = 0; c < spec.classes; ++c) {
    for (int i = 0; i < spec.points_per_class; ++i) {
      const float t = static_cast<float>(i) / static_cast<float>(spec.points_per_class);
      const float r = 0.1f + 0.9f * t;
      const float a = two_pi * (static_cast<float>(c) / spec.classes + 1.25f * t);
      d.rows.push_back({r * std::cos(a) + jitter(rng), r * std::sin(a) + jitter(rng)});
      d.labels.push_back(c);
    }
  }
  return d;
}

RawData make_blobs(const DatasetSpec& spec, std::mt19937& rng) {
  if (spec.classes < 2) throw std::invalid_argument("blobs: needs at least 2 classes");
  if (spec.dims < 1) throw std::invalid_argument("blobs: dims must be positive");
  std::normal_distribution<float> gauss(0.0f, 1.0f);
  RawData d;
  d.classes = spec.classes;
  d.sample_shape = {spec.dims};
  // Random unit directions scaled by the separation, then unit noise.
  std::vector<std::vector<float>> centers;
  for (int c = 0; c < spec.classes; ++c) {
    std::vector<float> dir(static_cast<std::size_t>(spec.dims));
    double norm = 0.0;
    for (auto& v : dir) {
      v = gauss(rng);
      norm += static_cast<double>(v) * v;
    }
    norm = std::sqrt(std::max(norm, 1e-12));
    for (auto& v : dir) v = static_cast<float>(v / norm * spec.separation);
    centers.push_back(std::move(dir));
  }
  for (int c = 0; c < spec.classes; ++c) {
    for (int i = 0; i < spec.points_per_class; ++i) {
      std::vector<float> row(static_cast<std::size_t>(spec.dims));
      for (int j = 0; j < spec.dims; ++j) row[static_cast<std::size_t>(j)] = centers[c][static_cast<std::size_t>(j)] + gauss(rng);
      d.rows.push_back(std::move(row));
      d.labels.push_back(c);
    }
  }
  return d;
}

RawData load_csv(const DatasetSpec& spec) {
  std::ifstream in(spec.path);
  if (!in) throw std::runtime_error("csv: cannot open " + spec.path);
  RawData d;
  std::string line;
  int width = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<float> cells;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t pos = 0;
        cells.push_back(std::stof(cell, &pos));
        if (pos != cell.size() && cell.find_first_not_of(" \t\r", pos) != std::string::npos) {
          numeric = false;
        }
      } catch (const std::exception&) {
        numeric = false;
      }
      if (!numeric) break;
    }
    if (!numeric) {
      if (d.rows.empty() && width == -1) continue;  // header row
      throw std::runtime_error("csv: non-numeric cell in " + spec.path);
    }
    if (width == -1) width = static_cast<int>(cells.size());
    if (static_cast<int>(cells.size()) != width) {
      throw std::runtime_error("csv: ragged row in " + spec.path);
    }
    const int label_col = spec.label_column < 0 ? width - 1 : spec.label_column;
    if (label_col < 0 || label_col >= width) {
      throw std::invalid_argument("csv: label column " + std::to_string(spec.label_column) +
                                  " out of range for " + std::to_string(width) + " columns");
    }
    std::vector<float> row;
    for (int j = 0; j < width; ++j) {
      if (j != label_col) row.push_back(cells[static_cast<std::size_t>(j)]);
    }
    const float lv = cells[static_cast<std::size_t>(label_col)];
    const int label = static_cast<int>(std::lround(lv));
    if (label < 0 || std::fabs(lv - label) > 1e-6) {
      throw std::runtime_error("csv: label cell " + std::to_string(lv) +
                               " is not a non-negative integer");
    }
    d.rows.push_back(std::move(row));
    d.labels.push_back(label);
  }
  if (d.rows.empty()) throw std::runtime_error("csv: no data rows in " + spec.path);
  d.sample_shape = {static_cast<int>(d.rows[0].size())};
  d.classes = *std::max_element(d.labels.begin(), d.labels.end()) + 1;
  if (d.classes < 2) throw std::runtime_error("csv: fewer than 2 classes in " + spec.path);
  return d;
}

std::uint32_t read_u32_be(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("idx: truncated " + path);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

RawData load_idx(const DatasetSpec& spec) {
  std::ifstream img(spec.path, std::ios::binary);
  if (!img) throw std::runtime_error("idx: cannot open " + spec.path);
  const std::uint32_t magic = read_u32_be(img, spec.path);
  const int ndim = static_cast<int>(magic & 0xff);
  if ((magic >> 8) != 0x08 || (ndim != 3 && ndim != 4)) {
    throw std::runtime_error("idx: bad image magic in " + spec.path);
  }
  std::vector<std::uint32_t> dims;
  for (int i = 0; i < ndim; ++i) dims.push_back(read_u32_be(img, spec.path));
  const std::uint32_t n = dims[0];
  const std::uint32_t channels = ndim == 4 ? dims[1] : 1;
  const std::uint32_t h = dims[ndim == 4 ? 2 : 1];
  const std::uint32_t w = dims[ndim == 4 ? 3 : 2];
  const std::size_t per = static_cast<std::size_t>(channels) * h * w;
  std::vector<unsigned char> buf(per);

  std::ifstream lab(spec.labels_path, std::ios::binary);
  if (!lab) throw std::runtime_error("idx: cannot open " + spec.labels_path);
  const std::uint32_t lmagic = read_u32_be(lab, spec.labels_path);
  if (lmagic != 0x00000801) throw std::runtime_error("idx: bad label magic in " + spec.labels_path);
  const std::uint32_t ln = read_u32_be(lab, spec.labels_path);
  if (ln != n) throw std::runtime_error("idx: image/label count mismatch");

  RawData d;
  d.sample_shape = {static_cast<int>(channels), static_cast<int>(h), static_cast<int>(w)};
  for (std::uint32_t i = 0; i < n; ++i) {
    if (!img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(per))) {
      throw std::runtime_error("idx: truncated image payload in " + spec.path);
    }
    std::vector<float> row(per);
    for (std::size_t j = 0; j < per; ++j) row[j] = static_cast<float>(buf[j]) / 255.0f;
    d.rows.push_back(std::move(row));
    char lb;
    if (!lab.read(&lb, 1)) throw std::runtime_error("idx: truncated labels in " + spec.labels_path);
    d.labels.push_back(static_cast<int>(static_cast<unsigned char>(lb)));
  }
  d.classes = *std::max_element(d.labels.begin(), d.labels.end()) + 1;
  if (d.classes < 2) throw std::runtime_error("idx: fewer than 2 classes");
  return d;
}

DataSplit slice(const RawData& d, const std::vector<int>& order, int begin, int count) {
  DataSplit s;
  const std::size_t per = d.rows.empty() ? 0 : d.rows[0].size();
  std::vector<float> flat(static_cast<std::size_t>(count) * per);
  s.labels.resize(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const int src = order[static_cast<std::size_t>(begin + i)];
    std::copy(d.rows[static_cast<std::size_t>(src)].begin(), d.rows[static_cast<std::size_t>(src)].end(),
              flat.begin() + static_cast<std::ptrdiff_t>(i * per));
    s.labels[static_cast<std::size_t>(i)] = d.labels[static_cast<std::size_t>(src)];
  }
  std::vector<int> shape = {count};
  shape.insert(shape.end(), d.sample_shape.begin(), d.sample_shape.end());
  s.inputs = Tensor(std::move(shape), std::move(flat));
  return s;
}

}  // namespace

int Dataset::input_dim() const {
  int n = 1;
  for (int d : sample_shape) n *= d;
  return n;
}

Dataset make_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  std::mt19937 rng(static_cast<std::uint32_t>(seed ^ (seed >> 32)));
  RawData raw;
  if (spec.kind == "spiral") {
    raw = make_spiral(spec, rng);
  } else if (spec.kind == "blobs") {
    raw = make_blobs(spec, rng);
  } else if (spec.kind == "csv") {
    raw = load_csv(spec);
  } else if (spec.kind == "idx-images") {
    raw = load_idx(spec);
  } else {
    throw std::invalid_argument("dataset: unknown kind '" + spec.kind + "'");
  }

  const int n = static_cast<int>(raw.rows.size());
  if (n < 10) throw std::invalid_argument("dataset: too few samples (" + std::to_string(n) + ")");
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  const int n_train = static_cast<int>(0.7 * n);
  const int n_val = static_cast<int>(0.1 * n);
  Dataset ds;
  ds.classes = raw.classes;
  ds.sample_shape = raw.sample_shape;
  ds.train = slice(raw, order, 0, n_train);
  ds.val = slice(raw, order, n_train, n_val);
  ds.test = slice(raw, order, n_train + n_val, n - n_train - n_val);
  return ds;
}

Batch take_batch(const DataSplit& split, const std::vector<int>& idx, int begin, int count) {
  const auto& shape = split.inputs.shape();
  std::size_t per = 1;
  for (std::size_t i = 1; i < shape.size(); ++i) per *= static_cast<std::size_t>(shape[i]);
  std::vector<float> flat(static_cast<std::size_t>(count) * per);
  Batch b;
  b.labels.resize(static_cast<std::size_t>(count));
  const auto& src = split.inputs.values();
  for (int i = 0; i < count; ++i) {
    const int row = idx[static_cast<std::size_t>(begin + i)];
    std::copy(src.begin() + static_cast<std::ptrdiff_t>(row * per),
              src.begin() + static_cast<std::ptrdiff_t>((row + 1) * per),
              flat.begin() + static_cast<std::ptrdiff_t>(i * per));
    b.labels[static_cast<std::size_t>(i)] = split.labels[static_cast<std::size_t>(row)];
  }
  std::vector<int> bshape = {count};
  bshape.insert(bshape.end(), shape.begin() + 1, shape.end());
  b.inputs = Tensor(std::move(bshape), std::move(flat));
  return b;
}

}  // namespace gtn
