#include "openhybrid/data.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "openhybrid/io_util.hpp"

namespace openhybrid {

SplitData as_split(const LabeledDataset& ds) {
  SplitData s;
  s.features = ds.features;
  s.labels.reserve(ds.labels.size());
  for (int y : ds.labels) s.labels.push_back(y + 1);
  return s;
}

LabeledDataset gen_gaussian_mixture(std::size_t n_per_class, std::size_t n_classes,
                                    std::size_t dim, double spread, std::uint64_t seed) {
  if (n_per_class == 0 || n_classes == 0 || dim == 0 || spread <= 0.0) {
    throw std::invalid_argument("gen_gaussian_mixture: all arguments must be positive");
  }
  Rng rng(seed);
  // Box wide enough that a min-distance layout exists comfortably.
  const double half_width =
      4.0 * spread * std::pow(static_cast<double>(n_classes), 1.0 / static_cast<double>(dim));
  const double min_dist = 4.0 * spread;

  std::vector<std::vector<double>> centers;
  centers.reserve(n_classes);
  std::size_t attempts = 0;
  while (centers.size() < n_classes) {
    if (++attempts > 10000) {
      throw std::runtime_error("gen_gaussian_mixture: no center layout found in 10^4 attempts");
    }
    std::vector<double> c(dim);
    for (double& v : c) v = rng.uniform(-half_width, half_width);
    bool ok = true;
    for (const auto& other : centers) {
      double d2 = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        const double d = c[j] - other[j];
        d2 += d * d;
      }
      if (d2 < min_dist * min_dist) {
        ok = false;
        break;
      }
    }
    if (ok) centers.push_back(std::move(c));
  }

  LabeledDataset ds;
  ds.class_count = n_classes;
  ds.features = Tensor({n_per_class * n_classes, dim});
  ds.labels.resize(n_per_class * n_classes);
  std::size_t row = 0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (std::size_t i = 0; i < n_per_class; ++i, ++row) {
      for (std::size_t j = 0; j < dim; ++j) {
        ds.features(row, j) = centers[c][j] + spread * rng.normal();
      }
      ds.labels[row] = static_cast<int>(c);
    }
  }
  return ds;
}

namespace {

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t pos) {
  return (static_cast<std::uint32_t>(b[pos]) << 24) |
         (static_cast<std::uint32_t>(b[pos + 1]) << 16) |
         (static_cast<std::uint32_t>(b[pos + 2]) << 8) |
         static_cast<std::uint32_t>(b[pos + 3]);
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
}

}  // namespace

IdxData read_idx_file(const std::string& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = io::read_bytes(path);
  } catch (const std::runtime_error& e) {
    throw IdxError(IdxError::Code::kIo, e.what());
  }
  if (bytes.size() < 4) {
    throw IdxError(IdxError::Code::kTruncated, path + ": shorter than an IDX header");
  }
  if (bytes[0] != 0 || bytes[1] != 0) {
    throw IdxError(IdxError::Code::kBadMagic,
                   path + ": first two magic bytes must be zero");
  }
  if (bytes[2] != 0x08) {
    throw IdxError(IdxError::Code::kBadType,
                   path + ": only unsigned-byte IDX data (type 0x08) is supported");
  }
  const std::size_t rank = bytes[3];
  if (rank == 0) throw IdxError(IdxError::Code::kBadRank, path + ": rank must be positive");
  if (bytes.size() < 4 + 4 * rank) {
    throw IdxError(IdxError::Code::kTruncated, path + ": header cut off mid-extents");
  }
  IdxData data;
  std::size_t expected = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    const std::uint32_t d = be32(bytes, 4 + 4 * i);
    data.dims.push_back(d);
    expected *= d;
  }
  const std::size_t have = bytes.size() - (4 + 4 * rank);
  if (have != expected) {
    throw IdxError(IdxError::Code::kTruncated,
                   path + ": expected " + std::to_string(expected) + " payload bytes, found " +
                       std::to_string(have));
  }
  data.bytes.assign(bytes.begin() + static_cast<std::ptrdiff_t>(4 + 4 * rank), bytes.end());
  return data;
}

void write_idx_file(const std::string& path, const IdxData& data) {
  std::size_t expected = 1;
  for (std::uint32_t d : data.dims) expected *= d;
  if (data.dims.empty() || data.dims.size() > 255 || expected != data.bytes.size()) {
    throw std::invalid_argument("write_idx_file: dims do not match payload size");
  }
  std::vector<std::uint8_t> out;
  out.push_back(0);
  out.push_back(0);
  out.push_back(0x08);
  out.push_back(static_cast<std::uint8_t>(data.dims.size()));
  for (std::uint32_t d : data.dims) put_be32(out, d);
  out.insert(out.end(), data.bytes.begin(), data.bytes.end());
  io::atomic_write_bytes(path, out.data(), out.size());
}

LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path) {
  const IdxData images = read_idx_file(images_path);
  const IdxData labels = read_idx_file(labels_path);
  if (images.dims.size() != 3) {
    throw IdxError(IdxError::Code::kBadRank,
                   images_path + ": image file must be rank 3, got rank " +
                       std::to_string(images.dims.size()));
  }
  if (labels.dims.size() != 1) {
    throw IdxError(IdxError::Code::kBadRank,
                   labels_path + ": label file must be rank 1, got rank " +
                       std::to_string(labels.dims.size()));
  }
  if (images.dims[0] != labels.dims[0]) {
    throw IdxError(IdxError::Code::kCountMismatch,
                   std::to_string(images.dims[0]) + " images vs " +
                       std::to_string(labels.dims[0]) + " labels");
  }
  const std::size_t n = images.dims[0];
  const std::size_t m = static_cast<std::size_t>(images.dims[1]) * images.dims[2];
  LabeledDataset ds;
  ds.features = Tensor({n, m});
  for (std::size_t i = 0; i < n * m; ++i) {
    ds.features.at(i) = static_cast<double>(images.bytes[i]) / 255.0;
  }
  ds.labels.reserve(n);
  int max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels.bytes[i];
    ds.labels.push_back(y);
    max_label = std::max(max_label, y);
  }
  ds.class_count = static_cast<std::size_t>(max_label) + 1;
  return ds;
}

OpenSetSplit partition(const LabeledDataset& ds, std::size_t k_known, std::uint64_t seed) {
  if (k_known == 0 || k_known >= ds.class_count) {
    throw std::invalid_argument("partition: need 1 <= k_known < class_count");
  }
  std::vector<std::size_t> per_class(ds.class_count, 0);
  for (int y : ds.labels) per_class[static_cast<std::size_t>(y)]++;
  for (std::size_t c = 0; c < ds.class_count; ++c) {
    if (per_class[c] < 2) {
      throw std::invalid_argument("partition: class " + std::to_string(c) +
                                  " has fewer than 2 samples");
    }
  }

  Rng rng(seed);
  const std::vector<std::size_t> order = rng.permutation(ds.class_count);
  OpenSetSplit split;
  split.spec.seed = seed;
  split.k_known = k_known;
  split.k_test_classes = ds.class_count;
  std::vector<int> new_label(ds.class_count, static_cast<int>(k_known) + 1);
  for (std::size_t i = 0; i < ds.class_count; ++i) {
    const int cls = static_cast<int>(order[i]);
    if (i < k_known) {
      split.spec.known_classes.push_back(cls);
      new_label[static_cast<std::size_t>(cls)] = static_cast<int>(i) + 1;
    } else {
      split.spec.unknown_classes.push_back(cls);
    }
  }

  // Seeded 80/20 split inside each known class, by position in dataset order.
  std::vector<bool> to_train(ds.size(), false);
  for (int cls : split.spec.known_classes) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (ds.labels[i] == cls) idx.push_back(i);
    }
    const std::vector<std::size_t> perm = rng.permutation(idx.size());
    std::size_t n_train = static_cast<std::size_t>(
        std::floor(0.8 * static_cast<double>(idx.size())));
    n_train = std::max<std::size_t>(1, std::min(n_train, idx.size() - 1));
    for (std::size_t t = 0; t < n_train; ++t) to_train[idx[perm[t]]] = true;
  }

  const std::size_t m = ds.features.cols();
  std::vector<std::size_t> train_rows, test_rows;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const bool known =
        new_label[static_cast<std::size_t>(ds.labels[i])] <= static_cast<int>(k_known);
    if (known && to_train[i]) {
      train_rows.push_back(i);
    } else {
      test_rows.push_back(i);
    }
  }
  auto build = [&](const std::vector<std::size_t>& rows) {
    SplitData out;
    out.features = Tensor({rows.size(), m});
    out.labels.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t j = 0; j < m; ++j) out.features(r, j) = ds.features(rows[r], j);
      out.labels.push_back(new_label[static_cast<std::size_t>(ds.labels[rows[r]])]);
    }
    return out;
  };
  split.train = build(train_rows);
  split.test = build(test_rows);
  return split;
}

LabeledDataset subsample_per_class(const LabeledDataset& ds, std::size_t cap,
                                   std::uint64_t seed) {
  if (cap == 0) throw std::invalid_argument("subsample_per_class: cap must be positive");
  std::vector<std::vector<std::size_t>> by_class(ds.class_count);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
  }
  Rng rng(seed);
  std::vector<bool> keep(ds.size(), false);
  for (auto& idx : by_class) {
    if (idx.size() <= cap) {
      for (std::size_t i : idx) keep[i] = true;
    } else {
      const std::vector<std::size_t> perm = rng.permutation(idx.size());
      for (std::size_t t = 0; t < cap; ++t) keep[idx[perm[t]]] = true;
    }
  }
  const std::size_t m = ds.features.cols();
  LabeledDataset out;
  out.class_count = ds.class_count;
  std::size_t n_keep = 0;
  for (bool k : keep) n_keep += k ? 1 : 0;
  out.features = Tensor({n_keep, m});
  out.labels.reserve(n_keep);
  std::size_t r = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!keep[i]) continue;
    for (std::size_t j = 0; j < m; ++j) out.features(r, j) = ds.features(i, j);
    out.labels.push_back(ds.labels[i]);
    ++r;
  }
  return out;
}

void write_dataset_csv(const std::string& path, const LabeledDataset& ds) {
  std::ostringstream os;
  os.precision(17);
  const std::size_t m = ds.features.cols();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    os << ds.labels[i];
    for (std::size_t j = 0; j < m; ++j) os << ',' << ds.features(i, j);
    os << '\n';
  }
  io::atomic_write_text(path, os.str());
}

}  // namespace openhybrid
