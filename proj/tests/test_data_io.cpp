#include <gtest/gtest.h>

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>

#include "openhybrid/data.hpp"

namespace openhybrid {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("openhybrid_data_test_" + unique())) {
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  static std::string unique() {
    static int counter = 0;
    return std::to_string(::getpid()) + "_" + std::to_string(counter++);
  }
  fs::path path_;
};

TEST(GaussianMixture, ShapesLabelsDeterminism) {
  const LabeledDataset a = gen_gaussian_mixture(50, 4, 3, 0.5, 9);
  EXPECT_EQ(a.size(), 200u);
  EXPECT_EQ(a.features.rows(), 200u);
  EXPECT_EQ(a.features.cols(), 3u);
  EXPECT_EQ(a.class_count, 4u);
  for (int l : a.labels) {
    EXPECT_GE(l, 0);
    EXPECT_LT(l, 4);
  }
  const LabeledDataset b = gen_gaussian_mixture(50, 4, 3, 0.5, 9);
  EXPECT_EQ(a.features, b.features);
  EXPECT_EQ(a.labels, b.labels);
  const LabeledDataset c = gen_gaussian_mixture(50, 4, 3, 0.5, 10);
  EXPECT_FALSE(a.features == c.features);
  EXPECT_THROW(gen_gaussian_mixture(0, 4, 3, 0.5, 9), std::invalid_argument);
  EXPECT_THROW(gen_gaussian_mixture(50, 4, 3, 0.0, 9), std::invalid_argument);
}

TEST(GaussianMixture, ClusterGeometry) {
  const double spread = 0.5;
  const LabeledDataset ds = gen_gaussian_mixture(400, 5, 2, spread, 11);
  // Per-class sample means approximate the centers; with n=400 they sit
  // within ~5 standard errors, far less than the center separation.
  std::vector<std::vector<double>> means(5, std::vector<double>(2, 0.0));
  std::vector<std::size_t> counts(5, 0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto c = static_cast<std::size_t>(ds.labels[i]);
    counts[c]++;
    for (std::size_t j = 0; j < 2; ++j) means[c][j] += ds.features(i, j);
  }
  for (std::size_t c = 0; c < 5; ++c) {
    EXPECT_EQ(counts[c], 400u);
    for (double& v : means[c]) v /= 400.0;
  }
  // Distinct centers separated by at least ~4*spread (allow sampling noise).
  for (std::size_t a = 0; a < 5; ++a) {
    for (std::size_t b = a + 1; b < 5; ++b) {
      double d2 = 0.0;
      for (std::size_t j = 0; j < 2; ++j) {
        const double d = means[a][j] - means[b][j];
        d2 += d * d;
      }
      EXPECT_GT(std::sqrt(d2), 3.5 * spread);
    }
  }
  // Per-coordinate standard deviation close to the requested spread.
  double var = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto c = static_cast<std::size_t>(ds.labels[i]);
    for (std::size_t j = 0; j < 2; ++j) {
      const double d = ds.features(i, j) - means[c][j];
      var += d * d;
    }
  }
  var /= static_cast<double>(ds.size() * 2);
  EXPECT_NEAR(std::sqrt(var), spread, 0.05);
}

TEST(GaussianMixture, VanishingSpreadCollapsesToCenters) {
  const LabeledDataset ds = gen_gaussian_mixture(20, 3, 2, 1e-30, 13);
  // In the spread -> 0 limit every sample coincides with its class center.
  for (std::size_t c = 0; c < 3; ++c) {
    double ref0 = 0.0, ref1 = 0.0;
    bool seen = false;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (static_cast<std::size_t>(ds.labels[i]) != c) continue;
      if (!seen) {
        ref0 = ds.features(i, 0);
        ref1 = ds.features(i, 1);
        seen = true;
      }
      EXPECT_NEAR(ds.features(i, 0), ref0, 1e-25);
      EXPECT_NEAR(ds.features(i, 1), ref1, 1e-25);
    }
    EXPECT_TRUE(seen);
  }
}

TEST(AsSplit, ShiftsLabelsToOneBased) {
  LabeledDataset ds;
  ds.features = Tensor({3, 1}, {1.0, 2.0, 3.0});
  ds.labels = {0, 2, 1};
  ds.class_count = 3;
  const SplitData s = as_split(ds);
  EXPECT_EQ(s.labels, (std::vector<int>{1, 3, 2}));
  EXPECT_EQ(s.features, ds.features);
}

std::vector<std::uint8_t> idx_header(std::uint8_t type, const std::vector<std::uint32_t>& dims) {
  std::vector<std::uint8_t> h = {0, 0, type, static_cast<std::uint8_t>(dims.size())};
  for (std::uint32_t d : dims) {
    h.push_back(static_cast<std::uint8_t>(d >> 24));
    h.push_back(static_cast<std::uint8_t>(d >> 16));
    h.push_back(static_cast<std::uint8_t>(d >> 8));
    h.push_back(static_cast<std::uint8_t>(d));
  }
  return h;
}

void write_raw(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
}

TEST(Idx, DecodesAReferenceFile) {
  TempDir dir;
  std::vector<std::uint8_t> img = idx_header(0x08, {2, 28, 28});
  for (int i = 0; i < 2 * 28 * 28; ++i) img.push_back(static_cast<std::uint8_t>(i % 256));
  write_raw(dir.file("img.idx3-ubyte"), img);
  std::vector<std::uint8_t> lab = idx_header(0x08, {2});
  lab.push_back(3);
  lab.push_back(0);
  write_raw(dir.file("lab.idx1-ubyte"), lab);

  const IdxData raw = read_idx_file(dir.file("img.idx3-ubyte"));
  EXPECT_EQ(raw.dims, (std::vector<std::uint32_t>{2, 28, 28}));
  EXPECT_EQ(raw.bytes.size(), 2u * 28u * 28u);
  EXPECT_EQ(raw.bytes[5], 5);

  const LabeledDataset ds = load_idx(dir.file("img.idx3-ubyte"), dir.file("lab.idx1-ubyte"));
  EXPECT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.features.cols(), 784u);
  EXPECT_EQ(ds.class_count, 4u);  // max label 3
  EXPECT_EQ(ds.labels, (std::vector<int>{3, 0}));
  EXPECT_DOUBLE_EQ(ds.features(0, 7), 7.0 / 255.0);
  EXPECT_DOUBLE_EQ(ds.features(1, 0), static_cast<double>((784) % 256) / 255.0);
}

TEST(Idx, WriteReadRoundTripIsBitExact) {
  TempDir dir;
  Rng rng(17);
  IdxData data;
  data.dims = {3, 5, 4};
  data.bytes.resize(60);
  for (auto& b : data.bytes) b = static_cast<std::uint8_t>(rng.index(256));
  const std::string path = dir.file("roundtrip.idx");
  write_idx_file(path, data);
  const IdxData back = read_idx_file(path);
  EXPECT_EQ(back.dims, data.dims);
  EXPECT_EQ(back.bytes, data.bytes);
}

TEST(Idx, MalformedFilesRaiseTaggedErrors) {
  TempDir dir;
  auto expect_code = [](const std::string& path, IdxError::Code code) {
    try {
      read_idx_file(path);
      FAIL() << "expected IdxError for " << path;
    } catch (const IdxError& e) {
      EXPECT_EQ(static_cast<int>(e.code()), static_cast<int>(code)) << e.what();
    }
  };

  expect_code(dir.file("missing.idx"), IdxError::Code::kIo);

  std::vector<std::uint8_t> bad_magic = idx_header(0x08, {1});
  bad_magic[0] = 0xFF;
  bad_magic.push_back(0);
  write_raw(dir.file("bad_magic.idx"), bad_magic);
  expect_code(dir.file("bad_magic.idx"), IdxError::Code::kBadMagic);

  std::vector<std::uint8_t> bad_type = idx_header(0x0D, {1});  // float type
  bad_type.push_back(0);
  write_raw(dir.file("bad_type.idx"), bad_type);
  expect_code(dir.file("bad_type.idx"), IdxError::Code::kBadType);

  write_raw(dir.file("bad_rank.idx"), idx_header(0x08, {}));
  expect_code(dir.file("bad_rank.idx"), IdxError::Code::kBadRank);

  std::vector<std::uint8_t> truncated = idx_header(0x08, {10});
  truncated.push_back(1);  // 1 byte instead of 10
  write_raw(dir.file("truncated.idx"), truncated);
  try {
    read_idx_file(dir.file("truncated.idx"));
    FAIL() << "expected IdxError";
  } catch (const IdxError& e) {
    EXPECT_EQ(static_cast<int>(e.code()), static_cast<int>(IdxError::Code::kTruncated));
    const std::string what = e.what();
    EXPECT_NE(what.find("10"), std::string::npos);  // expected payload size
    EXPECT_NE(what.find("1"), std::string::npos);   // actual payload size
  }

  // Header cut off mid-extents counts as truncated too.
  std::vector<std::uint8_t> short_header = {0, 0, 0x08, 2, 0, 0};
  write_raw(dir.file("short_header.idx"), short_header);
  expect_code(dir.file("short_header.idx"), IdxError::Code::kTruncated);

  // Image/label count disagreement.
  std::vector<std::uint8_t> img = idx_header(0x08, {2, 2, 2});
  for (int i = 0; i < 8; ++i) img.push_back(0);
  write_raw(dir.file("imgs.idx"), img);
  std::vector<std::uint8_t> lab = idx_header(0x08, {3});
  for (int i = 0; i < 3; ++i) lab.push_back(0);
  write_raw(dir.file("labs.idx"), lab);
  try {
    load_idx(dir.file("imgs.idx"), dir.file("labs.idx"));
    FAIL() << "expected IdxError";
  } catch (const IdxError& e) {
    EXPECT_EQ(static_cast<int>(e.code()), static_cast<int>(IdxError::Code::kCountMismatch));
  }

  // Wrong ranks for the image/label pair.
  std::vector<std::uint8_t> flat = idx_header(0x08, {4});
  for (int i = 0; i < 4; ++i) flat.push_back(0);
  write_raw(dir.file("flat.idx"), flat);
  try {
    load_idx(dir.file("flat.idx"), dir.file("labs.idx"));
    FAIL() << "expected IdxError";
  } catch (const IdxError& e) {
    EXPECT_EQ(static_cast<int>(e.code()), static_cast<int>(IdxError::Code::kBadRank));
  }
}

LabeledDataset tagged_dataset(std::size_t per_class, std::size_t classes) {
  // feature(i,0) = unique id so row identity survives the partition shuffle;
  // feature(i,1) = class id.
  LabeledDataset ds;
  const std::size_t n = per_class * classes;
  ds.features = Tensor({n, 2});
  ds.labels.resize(n);
  ds.class_count = classes;
  for (std::size_t i = 0; i < n; ++i) {
    ds.features(i, 0) = static_cast<double>(i);
    ds.features(i, 1) = static_cast<double>(i % classes);
    ds.labels[i] = static_cast<int>(i % classes);
  }
  return ds;
}

TEST(Partition, BookkeepingOnTenClasses) {
  const LabeledDataset ds = tagged_dataset(10, 10);
  const OpenSetSplit split = partition(ds, 6, 42);
  EXPECT_EQ(split.k_known, 6u);
  EXPECT_EQ(split.k_test_classes, 10u);
  EXPECT_EQ(split.spec.known_classes.size(), 6u);
  EXPECT_EQ(split.spec.unknown_classes.size(), 4u);
  EXPECT_EQ(split.spec.seed, 42u);

  // known + unknown ids form a bijection onto the original class ids.
  std::set<int> ids(split.spec.known_classes.begin(), split.spec.known_classes.end());
  ids.insert(split.spec.unknown_classes.begin(), split.spec.unknown_classes.end());
  EXPECT_EQ(ids.size(), 10u);
  EXPECT_EQ(*ids.begin(), 0);
  EXPECT_EQ(*ids.rbegin(), 9);

  // 80/20 per known class: 8 train, 2 test each.
  EXPECT_EQ(split.train.size(), 48u);
  EXPECT_EQ(split.test.size(), 12u + 40u);

  for (int l : split.train.labels) {
    EXPECT_GE(l, 1);
    EXPECT_LE(l, 6);
  }
  for (int l : split.test.labels) {
    EXPECT_GE(l, 1);
    EXPECT_LE(l, 7);
  }

  // Row identity: train and test are disjoint and cover the dataset.
  std::set<double> seen;
  auto collect = [&seen](const SplitData& s) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto [it, inserted] = seen.insert(s.features(i, 0));
      EXPECT_TRUE(inserted) << "duplicate row id " << s.features(i, 0);
    }
  };
  collect(split.train);
  collect(split.test);
  EXPECT_EQ(seen.size(), 100u);

  // Relabeling is consistent: label i in a split always maps back to the
  // same original class, namely known_classes[i-1] (or any unknown for 7).
  auto check_mapping = [&split](const SplitData& s) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      const int orig = static_cast<int>(s.features(i, 1));
      const int l = s.labels[i];
      if (l <= 6) {
        EXPECT_EQ(orig, split.spec.known_classes[static_cast<std::size_t>(l) - 1]);
      } else {
        EXPECT_NE(std::find(split.spec.unknown_classes.begin(),
                            split.spec.unknown_classes.end(), orig),
                  split.spec.unknown_classes.end());
      }
    }
  };
  check_mapping(split.train);
  check_mapping(split.test);
}

TEST(Partition, DeterministicAndSeedSensitive) {
  const LabeledDataset ds = tagged_dataset(10, 8);
  const OpenSetSplit a = partition(ds, 4, 7);
  const OpenSetSplit b = partition(ds, 4, 7);
  EXPECT_EQ(a.spec.known_classes, b.spec.known_classes);
  EXPECT_EQ(a.train.features, b.train.features);
  EXPECT_EQ(a.train.labels, b.train.labels);
  EXPECT_EQ(a.test.features, b.test.features);

  bool any_diff = false;
  for (std::uint64_t seed = 8; seed < 16 && !any_diff; ++seed) {
    const OpenSetSplit c = partition(ds, 4, seed);
    any_diff = c.spec.known_classes != a.spec.known_classes;
  }
  EXPECT_TRUE(any_diff);
}

TEST(Partition, SmallClassSplitsKeepBothSidesNonEmpty) {
  // With 2 samples per class the 80/20 rule still leaves one on each side.
  const LabeledDataset ds = tagged_dataset(2, 4);
  const OpenSetSplit split = partition(ds, 2, 3);
  EXPECT_EQ(split.train.size(), 2u);
  std::size_t known_test = 0;
  for (int l : split.test.labels)
    if (l <= 2) ++known_test;
  EXPECT_EQ(known_test, 2u);
}

TEST(Partition, RejectsDegenerateRequests) {
  const LabeledDataset ds = tagged_dataset(10, 5);
  EXPECT_THROW(partition(ds, 0, 1), std::invalid_argument);
  EXPECT_THROW(partition(ds, 5, 1), std::invalid_argument);
  EXPECT_THROW(partition(ds, 6, 1), std::invalid_argument);

  LabeledDataset thin = tagged_dataset(10, 3);
  thin.labels[0] = 2;  // class 0 keeps 9 samples; fine
  LabeledDataset single;
  single.features = Tensor({4, 1}, {0, 1, 2, 3});
  single.labels = {0, 1, 1, 1};  // class 0 has a single sample
  single.class_count = 2;
  EXPECT_THROW(partition(single, 1, 1), std::invalid_argument);
}

TEST(Subsample, CapsEachClassDeterministically) {
  const LabeledDataset ds = tagged_dataset(20, 3);
  const LabeledDataset capped = subsample_per_class(ds, 5, 9);
  EXPECT_EQ(capped.size(), 15u);
  std::vector<std::size_t> counts(3, 0);
  for (int l : capped.labels) counts[static_cast<std::size_t>(l)]++;
  for (std::size_t c : counts) EXPECT_EQ(c, 5u);
  const LabeledDataset again = subsample_per_class(ds, 5, 9);
  EXPECT_EQ(capped.features, again.features);
  // A cap above the class size keeps everything.
  const LabeledDataset all = subsample_per_class(ds, 100, 9);
  EXPECT_EQ(all.size(), ds.size());
  EXPECT_EQ(all.features, ds.features);
}

TEST(DatasetCsv, WritesLabelThenFeatures) {
  TempDir dir;
  LabeledDataset ds;
  ds.features = Tensor({2, 3}, {0.5, 1.25, -2.0, 3.0, 4.5, 6.0});
  ds.labels = {1, 0};
  ds.class_count = 2;
  const std::string path = dir.file("data.csv");
  write_dataset_csv(path, ds);
  std::ifstream f(path);
  std::string line;
  ASSERT_TRUE(std::getline(f, line));
  EXPECT_EQ(line, "1,0.5,1.25,-2");
  ASSERT_TRUE(std::getline(f, line));
  EXPECT_EQ(line.substr(0, 2), "0,");
  EXPECT_NE(line.find("4.5"), std::string::npos);
  EXPECT_FALSE(std::getline(f, line));
}

}  // namespace
}  // namespace openhybrid
