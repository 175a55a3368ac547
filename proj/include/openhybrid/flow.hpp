#pragma once

#include <cstdint>
#include <vector>

#include "openhybrid/nn.hpp"

namespace openhybrid {

/// Result of a flow forward pass: transformed coordinates and the exact
/// per-sample log|det J| in nats.
struct FlowResult {
  Tensor z;        // [batch, dim]
  Tensor log_det;  // [batch]
};

/// Per-coordinate affine y = exp(log_scale) * x + shift with data-dependent
/// initialization; log-det contribution is sum(log_scale).
struct ActNormLayer {
  Tensor log_scale;  // [dim]
  Tensor shift;      // [dim]
};

/// Affine coupling: the A half passes through, the B half is scaled and
/// shifted by networks of the A half. Log-scales are bounded by
/// cap * tanh(raw) with a learnable cap, which keeps exp(s) away from
/// overflow during early training.
struct CouplingLayer {
  std::vector<std::size_t> mask_a, mask_b;
  Mlp scale_net;
  Mlp shift_net;
  Tensor cap;  // [1]
};

/// Handles to a FlowStack bound onto a graph.
struct BoundFlow {
  struct BoundPair {
    Value an_log_scale, an_shift;
    BoundMlp scale_net, shift_net;
    Value cap;
  };
  std::vector<BoundPair> pairs;
  const class FlowStack* stack = nullptr;

  struct Nodes {
    Value z;
    Value log_det;  // [batch]
  };
  Nodes forward(Value x) const;

  /// log N(z; 0, I) + log_det per row, in nats.
  Value log_prob(Value x) const;

  /// Same, from an existing forward pass (lets callers reuse z).
  Value log_prob_from(const Nodes& f) const;
};

/// Stack of (ActNorm, Coupling) pairs with alternating masks over a standard
/// normal base. Construction is the identity map: coupling nets have
/// zero-initialized output layers and ActNorm starts at scale 1, shift 0.
/// With dim == 1 there is nothing to split, so couplings are omitted and the
/// ActNorm layers carry the whole transform.
class FlowStack {
 public:
  FlowStack() = default;
  FlowStack(std::size_t dim, std::size_t n_pairs, const std::vector<std::size_t>& hidden,
            double cap_init, Rng& rng);

  std::size_t dim() const { return dim_; }
  std::size_t n_pairs() const { return pairs_.size(); }
  bool has_couplings() const { return has_couplings_; }

  bool actnorm_initialized() const { return actnorm_initialized_; }
  void set_actnorm_initialized(bool v) { actnorm_initialized_ = v; }

  /// Data-dependent ActNorm initialization on one batch: each ActNorm is set
  /// so its output has per-coordinate mean 0 and variance 1 on the batch as
  /// transformed by the layers before it. Variance is floored at 1e-6.
  void init_actnorm(const Tensor& batch);

  BoundFlow bind(Graph& g, const BindOverride* override_leaf = nullptr) const;

  // Gradient-free entry points (all run through a throwaway graph, so the
  // tape is the single forward implementation).
  FlowResult forward(const Tensor& x) const;
  Tensor log_prob(const Tensor& x) const;  // [batch], nats

  /// (-mean log_prob) / (dim * ln 2).
  double nll_bits_per_dim(const Tensor& x) const;

  /// Exact inverse, layer by layer in reverse. inverse(forward(x)) == x up to
  /// round-off.
  Tensor inverse(const Tensor& z) const;

  /// Base-distribution draws pushed through the inverse.
  Tensor sample(std::size_t n, std::uint64_t seed) const;

  std::vector<Tensor*> params();
  std::vector<const Tensor*> params() const;

  struct Pair {
    ActNormLayer actnorm;
    CouplingLayer coupling;
  };
  std::vector<Pair>& pairs() { return pairs_; }
  const std::vector<Pair>& pairs() const { return pairs_; }

 private:
  std::size_t dim_ = 0;
  bool has_couplings_ = false;
  bool actnorm_initialized_ = false;
  std::vector<Pair> pairs_;
};

}  // namespace openhybrid
