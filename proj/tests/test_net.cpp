#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "openhybrid/model.hpp"
#include "openhybrid/nn.hpp"

namespace openhybrid {
namespace {

Tensor random_batch(std::size_t n, std::size_t d, Rng& rng) {
  Tensor x({n, d});
  for (double& v : x.data()) v = rng.normal();
  return x;
}

TEST(Mlp, ZeroWeightsMapEverythingToZero) {
  Rng rng(1);
  Mlp net(3, {5}, 4, Activation::kTanh, rng);
  for (Tensor* p : net.params())
    for (double& v : p->data()) v = 0.0;
  Rng data_rng(2);
  Tensor y = net.eval(random_batch(6, 3, data_rng));
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_EQ(y.at(i), 0.0);
}

TEST(Mlp, IdentityLayerPassesInputThrough) {
  Rng rng(1);
  Mlp net(3, {}, 3, Activation::kTanh, rng);
  ASSERT_EQ(net.layers().size(), 1u);
  Tensor& w = net.layers()[0].weight;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) w(i, j) = i == j ? 1.0 : 0.0;
  Rng data_rng(2);
  const Tensor x = random_batch(4, 3, data_rng);
  EXPECT_EQ(net.eval(x), x);
}

TEST(Mlp, SameSeedSameParameters) {
  Rng r1(77), r2(77);
  Mlp a(4, {8, 8}, 2, Activation::kRelu, r1);
  Mlp b(4, {8, 8}, 2, Activation::kRelu, r2);
  auto pa = a.params(), pb = b.params();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(*pa[i], *pb[i]);
  Rng data_rng(3);
  const Tensor x = random_batch(5, 4, data_rng);
  EXPECT_EQ(a.eval(x), b.eval(x));
}

TEST(Softmax, ZeroLogitsAreUniform) {
  Tensor logits({2, 5});
  const Tensor p = softmax_rows(logits);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p.at(i), 0.2, 1e-15);
  const Tensor one = softmax_rows(Tensor({1, 1}, {3.7}));
  EXPECT_EQ(one.at(0), 1.0);
}

TEST(Softmax, RowsSumToOne) {
  Rng rng(9);
  Tensor logits({7, 6});
  for (double& v : logits.data()) v = rng.uniform(-30.0, 30.0);
  const Tensor p = softmax_rows(logits);
  for (std::size_t i = 0; i < 7; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 6; ++j) {
      EXPECT_GE(p(i, j), 0.0);
      s += p(i, j);
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

double ce_value(const Tensor& logits, const std::vector<int>& labels) {
  Graph g;
  Value loss = cross_entropy(g.leaf(logits), labels);
  return g.value(loss).at(0);
}

TEST(CrossEntropy, UniformLogitsGiveLogK) {
  EXPECT_NEAR(ce_value(Tensor({1, 4}), {2}), std::log(4.0), 1e-12);
}

TEST(CrossEntropy, ConfidentCorrectLogitIsNearZero) {
  Tensor logits({1, 3});
  logits(0, 1) = 100.0;
  EXPECT_LE(ce_value(logits, {2}), 1e-40);
}

TEST(CrossEntropy, BatchIsMeanOfSingles) {
  Rng rng(4);
  Tensor both({2, 5});
  for (double& v : both.data()) v = rng.normal();
  Tensor row0({1, 5}), row1({1, 5});
  for (std::size_t j = 0; j < 5; ++j) {
    row0(0, j) = both(0, j);
    row1(0, j) = both(1, j);
  }
  const double split = 0.5 * (ce_value(row0, {3}) + ce_value(row1, {5}));
  EXPECT_NEAR(ce_value(both, {3, 5}), split, 1e-12);
}

TEST(CrossEntropy, NonNegativeAndShiftInvariant) {
  Rng rng(11);
  for (int rep = 0; rep < 50; ++rep) {
    Tensor logits({3, 4});
    for (double& v : logits.data()) v = rng.uniform(-5.0, 5.0);
    std::vector<int> labels = {static_cast<int>(rng.index(4)) + 1,
                               static_cast<int>(rng.index(4)) + 1,
                               static_cast<int>(rng.index(4)) + 1};
    const double base = ce_value(logits, labels);
    EXPECT_GE(base, 0.0);
    Tensor shifted = logits;
    const double c = rng.uniform(-200.0, 200.0);
    for (double& v : shifted.data()) v += c;
    EXPECT_NEAR(ce_value(shifted, labels), base, 1e-10);
  }
}

TEST(CrossEntropy, GradientIsSoftmaxMinusOneHotOverN) {
  Rng rng(6);
  Tensor logits({4, 3});
  for (double& v : logits.data()) v = rng.normal();
  const std::vector<int> labels = {1, 3, 2, 3};
  Graph g;
  Value l = g.leaf(logits, true);
  g.backward(cross_entropy(l, labels));
  const Tensor& grad = g.grad(l);
  const Tensor sm = softmax_rows(logits);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      const double onehot = (static_cast<int>(j) == labels[i] - 1) ? 1.0 : 0.0;
      EXPECT_NEAR(grad(i, j), (sm(i, j) - onehot) / 4.0, 1e-10);
    }
  }
}

TEST(Model, EncodeClassifyShapesAndDeterminism) {
  ModelConfig cfg;
  cfg.input_dim = 3;
  cfg.n_classes = 4;
  cfg.d_latent = 5;
  cfg.encoder_hidden = {8};
  cfg.classifier_hidden = {6};
  cfg.flow_pairs = 2;
  cfg.flow_hidden = {4};
  Model m1(cfg, 42), m2(cfg, 42);
  Rng data_rng(5);
  const Tensor x = random_batch(7, 3, data_rng);
  const Tensor z1 = m1.encode(x);
  EXPECT_EQ(z1.rows(), 7u);
  EXPECT_EQ(z1.cols(), 5u);
  EXPECT_EQ(z1, m2.encode(x));
  const Tensor logits = m1.logits(x);
  EXPECT_EQ(logits.cols(), 4u);
  EXPECT_EQ(logits, m2.logits(x));
  EXPECT_THROW(m1.encode(random_batch(2, 4, data_rng)), std::invalid_argument);
  Tensor bad = random_batch(1, 3, data_rng);
  bad.at(0) = std::nan("");
  EXPECT_THROW(m1.encode(bad), DivergenceError);
}

TEST(Model, CheckpointRoundTripIsBitExact) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "openhybrid_net_test";
  fs::create_directories(dir);
  const std::string path = (dir / "model.ohyb").string();

  ModelConfig cfg;
  cfg.input_dim = 2;
  cfg.n_classes = 3;
  cfg.d_latent = 4;
  cfg.encoder_hidden = {6};
  cfg.classifier_hidden = {5};
  cfg.flow_pairs = 2;
  cfg.flow_hidden = {4};
  Model m(cfg, 9);
  // Perturb away from init so the test is not trivially comparing zeros.
  Rng rng(10);
  for (Tensor* p : m.all_params())
    for (double& v : p->data()) v += 0.01 * rng.normal();
  m.save(path);

  Model loaded = Model::load(cfg, path);
  auto pa = m.all_params();
  auto pb = loaded.all_params();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(*pa[i], *pb[i]);
  Rng data_rng(11);
  const Tensor x = random_batch(5, 2, data_rng);
  EXPECT_EQ(m.logits(x), loaded.logits(x));
  EXPECT_EQ(m.log_prob(x), loaded.log_prob(x));

  // Corrupt the magic and expect a loud failure.
  {
    std::FILE* f = std::fopen(path.c_str(), "r+b");
    ASSERT_NE(f, nullptr);
    std::fputc('X', f);
    std::fclose(f);
  }
  EXPECT_THROW(Model::load(cfg, path), std::runtime_error);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace openhybrid
