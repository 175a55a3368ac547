#include "openhybrid/nn.hpp"

#include <cmath>

namespace openhybrid {

Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::kIdentity;
  if (s == "tanh") return Activation::kTanh;
  if (s == "relu") return Activation::kRelu;
  throw std::invalid_argument("unknown activation: " + s);
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
  }
  return "?";
}

namespace {

Value apply_activation(Value x, Activation a) {
  switch (a) {
    case Activation::kIdentity: return x;
    case Activation::kTanh: return tanh(x);
    case Activation::kRelu: return relu(x);
  }
  return x;
}

}  // namespace

Value BoundMlp::forward(Value x) const {
  Value h = x;
  for (const Layer& l : layers) {
    h = apply_activation(add_rowvec(matmul(h, l.weight), l.bias), l.activation);
  }
  return h;
}

Mlp::Mlp(std::size_t in_dim, const std::vector<std::size_t>& hidden, std::size_t out_dim,
         Activation hidden_act, Rng& rng, bool zero_init_output)
    : in_dim_(in_dim) {
  if (in_dim == 0 || out_dim == 0) {
    throw std::invalid_argument("Mlp dimensions must be positive");
  }
  std::vector<std::size_t> dims;
  dims.push_back(in_dim);
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out_dim);
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    DenseLayer l;
    const std::size_t fan_in = dims[i], fan_out = dims[i + 1];
    l.weight = Tensor({fan_in, fan_out});
    l.bias = Tensor({fan_out});
    const bool last = (i + 2 == dims.size());
    if (!(last && zero_init_output)) {
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      for (double& w : l.weight.data()) w = rng.uniform(-bound, bound);
    }
    l.activation = last ? Activation::kIdentity : hidden_act;
    layers_.push_back(std::move(l));
  }
}

std::size_t Mlp::out_dim() const {
  if (layers_.empty()) throw std::logic_error("Mlp is empty");
  return layers_.back().bias.size();
}

Value bind_param(Graph& g, const Tensor& t, const BindOverride* override_leaf) {
  if (override_leaf != nullptr && override_leaf->target == &t) {
    return override_leaf->leaf;
  }
  return g.leaf(t, true);
}

BoundMlp Mlp::bind(Graph& g, const BindOverride* override_leaf) const {
  BoundMlp b;
  for (const DenseLayer& l : layers_) {
    b.layers.push_back({bind_param(g, l.weight, override_leaf),
                        bind_param(g, l.bias, override_leaf), l.activation});
  }
  return b;
}

Tensor Mlp::eval(const Tensor& x) const {
  Graph g;
  Value out = bind(g).forward(g.leaf(x, false));
  return g.value(out);
}

std::vector<Tensor*> Mlp::params() {
  std::vector<Tensor*> ps;
  for (DenseLayer& l : layers_) {
    ps.push_back(&l.weight);
    ps.push_back(&l.bias);
  }
  return ps;
}

std::vector<const Tensor*> Mlp::params() const {
  std::vector<const Tensor*> ps;
  for (const DenseLayer& l : layers_) {
    ps.push_back(&l.weight);
    ps.push_back(&l.bias);
  }
  return ps;
}

Tensor softmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) throw std::invalid_argument("softmax_rows: rank-2 input required");
  const std::size_t n = logits.rows(), k = logits.cols();
  Tensor out({n, k});
  for (std::size_t i = 0; i < n; ++i) {
    double mx = logits(i, 0);
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, logits(i, j));
    double denom = 0.0;
    for (std::size_t j = 0; j < k; ++j) denom += std::exp(logits(i, j) - mx);
    for (std::size_t j = 0; j < k; ++j) out(i, j) = std::exp(logits(i, j) - mx) / denom;
  }
  return out;
}

}  // namespace openhybrid
