#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "openhybrid/flow.hpp"
#include "openhybrid/nn.hpp"

namespace openhybrid {

enum class Regime { kJoint, kPretrainedEncoder, kSoftmaxOnly, kRawInputFlow };

Regime regime_from_string(const std::string& s);
std::string to_string(Regime r);

struct ModelConfig {
  std::size_t input_dim = 2;
  std::size_t n_classes = 6;
  std::size_t d_latent = 16;
  std::vector<std::size_t> encoder_hidden = {64, 64};
  Activation encoder_act = Activation::kTanh;
  std::vector<std::size_t> classifier_hidden = {32};
  std::size_t flow_pairs = 8;
  std::vector<std::size_t> flow_hidden = {32};
  double scale_cap_init = 2.0;
  Regime regime = Regime::kJoint;
};

/// Shared encoder with a classification head and a flow-based density head.
/// In the raw_input_flow regime the flow runs on the input itself and the
/// classifier sits on the flow output; the encoder is unused there.
class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  bool flow_on_raw() const { return cfg_.regime == Regime::kRawInputFlow; }

  Mlp& encoder() { return encoder_; }
  const Mlp& encoder() const { return encoder_; }
  Mlp& classifier() { return classifier_; }
  const Mlp& classifier() const { return classifier_; }
  FlowStack& flow() { return flow_; }
  const FlowStack& flow() const { return flow_; }

  std::vector<Tensor*> encoder_params() { return encoder_.params(); }
  std::vector<Tensor*> classifier_params() { return classifier_.params(); }
  std::vector<Tensor*> flow_params() { return flow_.params(); }
  std::vector<Tensor*> all_params();

  /// Encoder output with a finiteness check.
  Tensor encode(const Tensor& x) const;

  /// What the flow sees for input x: the latent code, or x itself when the
  /// flow runs on raw input.
  Tensor flow_input(const Tensor& x) const;

  /// Classifier logits for input x, honoring the regime's wiring.
  Tensor logits(const Tensor& x) const;

  /// Flow log-likelihood per sample in nats, honoring the regime's wiring.
  Tensor log_prob(const Tensor& x) const;

  /// Binary checkpoint: magic "OHYB", version, record count, then one record
  /// per parameter (rank, extents, little-endian f64 payload) in encoder,
  /// classifier, flow order, plus one final record holding the
  /// ActNorm-initialized flag.
  void save(const std::string& path) const;

  /// Rebuilds a model from `cfg` and loads parameters; shapes must match the
  /// configuration. Throws std::runtime_error on format or shape mismatch.
  static Model load(const ModelConfig& cfg, const std::string& path);

 private:
  ModelConfig cfg_;
  Mlp encoder_;
  Mlp classifier_;
  FlowStack flow_;
};

}  // namespace openhybrid
