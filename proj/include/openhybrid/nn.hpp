#pragma once

#include <string>
#include <vector>

#include "openhybrid/graph.hpp"
#include "openhybrid/tensor.hpp"

namespace openhybrid {

enum class Activation { kIdentity, kTanh, kRelu };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

struct DenseLayer {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]
  Activation activation = Activation::kIdentity;
};

/// An Mlp bound onto a graph: parameter leaves plus the forward wiring.
struct BoundMlp {
  struct Layer {
    Value weight;
    Value bias;
    Activation activation;
  };
  std::vector<Layer> layers;

  Value forward(Value x) const;
};

/// Routes one parameter tensor to a caller-supplied leaf when binding a model
/// onto a graph. Used by gradient checks to differentiate wrt a single
/// parameter without copying the whole model.
struct BindOverride {
  const Tensor* target = nullptr;
  Value leaf;
};

/// Fully connected stack. Hidden layers share one activation; the output
/// layer is linear. Weights start uniform in ±sqrt(6/(fan_in+fan_out)) from
/// the given stream; biases start at zero.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::size_t in_dim, const std::vector<std::size_t>& hidden, std::size_t out_dim,
      Activation hidden_act, Rng& rng, bool zero_init_output = false);

  std::size_t in_dim() const { return in_dim_; }
  std::size_t out_dim() const;

  /// Creates trainable leaves for every parameter and returns the wiring.
  BoundMlp bind(Graph& g, const BindOverride* override_leaf = nullptr) const;

  /// Forward pass without gradients (runs through a throwaway graph so there
  /// is exactly one forward implementation).
  Tensor eval(const Tensor& x) const;

  std::vector<Tensor*> params();
  std::vector<const Tensor*> params() const;

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

 private:
  std::size_t in_dim_ = 0;
  std::vector<DenseLayer> layers_;
};

/// Binds a parameter tensor as a trainable leaf, or reroutes it if it is the
/// override target.
Value bind_param(Graph& g, const Tensor& t, const BindOverride* override_leaf);

/// Max-subtracted softmax applied to each row; rows sum to 1.
Tensor softmax_rows(const Tensor& logits);

}  // namespace openhybrid
