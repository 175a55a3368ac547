#include "openhybrid/flow.hpp"

#include <cmath>

namespace openhybrid {

namespace {

constexpr double kLn2Pi = 1.8378770664093453;  // ln(2*pi)
constexpr double kLn2 = 0.6931471805599453;

Tensor take_cols(const Tensor& x, const std::vector<std::size_t>& cols) {
  const std::size_t n = x.rows(), s = cols.size();
  Tensor out({n, s});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < s; ++t) out(i, t) = x(i, cols[t]);
  }
  return out;
}

void put_cols(Tensor& dst, const Tensor& src, const std::vector<std::size_t>& cols) {
  for (std::size_t i = 0; i < src.rows(); ++i) {
    for (std::size_t t = 0; t < src.cols(); ++t) dst(i, cols[t]) = src(i, t);
  }
}

}  // namespace

FlowStack::FlowStack(std::size_t dim, std::size_t n_pairs,
                     const std::vector<std::size_t>& hidden, double cap_init, Rng& rng)
    : dim_(dim), has_couplings_(dim >= 2) {
  if (dim == 0) throw std::invalid_argument("FlowStack dim must be positive");
  const std::size_t half = dim / 2;
  std::vector<std::size_t> lo, hi;
  for (std::size_t i = 0; i < dim; ++i) (i < half ? lo : hi).push_back(i);
  for (std::size_t p = 0; p < n_pairs; ++p) {
    Pair pair;
    pair.actnorm.log_scale = Tensor({dim});
    pair.actnorm.shift = Tensor({dim});
    if (has_couplings_) {
      // Alternate which half conditions the other.
      pair.coupling.mask_a = (p % 2 == 0) ? lo : hi;
      pair.coupling.mask_b = (p % 2 == 0) ? hi : lo;
      const std::size_t da = pair.coupling.mask_a.size();
      const std::size_t db = pair.coupling.mask_b.size();
      pair.coupling.scale_net = Mlp(da, hidden, db, Activation::kTanh, rng, true);
      pair.coupling.shift_net = Mlp(da, hidden, db, Activation::kTanh, rng, true);
      pair.coupling.cap = Tensor({1}, {cap_init});
    }
    pairs_.push_back(std::move(pair));
  }
}

BoundFlow FlowStack::bind(Graph& g, const BindOverride* override_leaf) const {
  BoundFlow b;
  b.stack = this;
  for (const Pair& p : pairs_) {
    BoundFlow::BoundPair bp;
    bp.an_log_scale = bind_param(g, p.actnorm.log_scale, override_leaf);
    bp.an_shift = bind_param(g, p.actnorm.shift, override_leaf);
    if (has_couplings_) {
      bp.scale_net = p.coupling.scale_net.bind(g, override_leaf);
      bp.shift_net = p.coupling.shift_net.bind(g, override_leaf);
      bp.cap = bind_param(g, p.coupling.cap, override_leaf);
    }
    b.pairs.push_back(std::move(bp));
  }
  return b;
}

BoundFlow::Nodes BoundFlow::forward(Value x) const {
  Graph* g = x.graph;
  const std::size_t n = g->value(x).rows();
  if (g->value(x).cols() != stack->dim()) {
    throw std::invalid_argument("flow forward: input dim " +
                                std::to_string(g->value(x).cols()) + " != " +
                                std::to_string(stack->dim()));
  }
  Value ld = g->leaf(Tensor({n}), false);
  Value h = x;
  const auto& spairs = stack->pairs();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const BoundPair& bp = pairs[i];
    h = add_rowvec(mul_rowvec(h, exp(bp.an_log_scale)), bp.an_shift);
    ld = add(ld, sum_all(bp.an_log_scale));
    if (stack->has_couplings()) {
      const auto& mask_a = spairs[i].coupling.mask_a;
      const auto& mask_b = spairs[i].coupling.mask_b;
      Value xa = select_cols(h, mask_a);
      Value xb = select_cols(h, mask_b);
      Value s = mul(tanh(bp.scale_net.forward(xa)), bp.cap);
      Value t = bp.shift_net.forward(xa);
      Value yb = add(mul(xb, exp(s)), t);
      h = merge_cols(xa, mask_a, yb, mask_b);
      ld = add(ld, row_sum(s));
    }
  }
  return {h, ld};
}

Value BoundFlow::log_prob(Value x) const { return log_prob_from(forward(x)); }

Value BoundFlow::log_prob_from(const Nodes& f) const {
  const double d = static_cast<double>(stack->dim());
  Value base = shift(scale(row_sum(mul(f.z, f.z)), -0.5), -0.5 * d * kLn2Pi);
  return add(base, f.log_det);
}

FlowResult FlowStack::forward(const Tensor& x) const {
  Graph g;
  BoundFlow b = bind(g);
  BoundFlow::Nodes nodes = b.forward(g.leaf(x, false));
  FlowResult r{g.value(nodes.z), g.value(nodes.log_det)};
  if (!r.z.all_finite() || !r.log_det.all_finite()) {
    throw DivergenceError("flow forward produced non-finite values");
  }
  return r;
}

Tensor FlowStack::log_prob(const Tensor& x) const {
  Graph g;
  BoundFlow b = bind(g);
  Value lp = b.log_prob(g.leaf(x, false));
  Tensor out = g.value(lp);
  if (!out.all_finite()) throw DivergenceError("log_prob produced non-finite values");
  return out;
}

double FlowStack::nll_bits_per_dim(const Tensor& x) const {
  if (x.rank() != 2 || x.rows() == 0) {
    throw std::invalid_argument("nll_bits_per_dim: nonempty rank-2 batch required");
  }
  const Tensor lp = log_prob(x);
  double s = 0.0;
  for (std::size_t i = 0; i < lp.size(); ++i) s += lp.at(i);
  const double mean_nll = -s / static_cast<double>(lp.size());
  return mean_nll / (static_cast<double>(dim_) * kLn2);
}

Tensor FlowStack::inverse(const Tensor& z) const {
  if (z.rank() != 2 || z.cols() != dim_) {
    throw std::invalid_argument("flow inverse: bad input shape " + shape_str(z.shape()));
  }
  Tensor h = z;
  for (std::size_t i = pairs_.size(); i-- > 0;) {
    const Pair& p = pairs_[i];
    if (has_couplings_) {
      const CouplingLayer& c = p.coupling;
      Tensor za = take_cols(h, c.mask_a);
      Tensor zb = take_cols(h, c.mask_b);
      Tensor s = mul(tanh(c.scale_net.eval(za)), c.cap);
      Tensor t = c.shift_net.eval(za);
      Tensor xb = mul(sub(zb, t), exp(mul(s, Tensor::scalar(-1.0))));
      put_cols(h, xb, c.mask_b);
    }
    for (std::size_t r = 0; r < h.rows(); ++r) {
      for (std::size_t j = 0; j < dim_; ++j) {
        h(r, j) = (h(r, j) - p.actnorm.shift.at(j)) * std::exp(-p.actnorm.log_scale.at(j));
      }
    }
  }
  if (!h.all_finite()) throw DivergenceError("flow inverse produced non-finite values");
  return h;
}

Tensor FlowStack::sample(std::size_t n, std::uint64_t seed) const {
  Tensor z({n, dim_});
  Rng rng(seed);
  for (double& v : z.data()) v = rng.normal();
  if (n == 0) return z;
  return inverse(z);
}

void FlowStack::init_actnorm(const Tensor& batch) {
  if (batch.rank() != 2 || batch.rows() < 2 || batch.cols() != dim_) {
    throw std::invalid_argument("init_actnorm: need a rank-2 batch with >= 2 rows");
  }
  Tensor h = batch;
  const double n = static_cast<double>(h.rows());
  for (Pair& p : pairs_) {
    for (std::size_t j = 0; j < dim_; ++j) {
      double mean = 0.0;
      for (std::size_t i = 0; i < h.rows(); ++i) mean += h(i, j);
      mean /= n;
      double var = 0.0;
      for (std::size_t i = 0; i < h.rows(); ++i) {
        const double d = h(i, j) - mean;
        var += d * d;
      }
      var /= n;
      const double ls = -0.5 * std::log(std::max(var, 1e-6));
      p.actnorm.log_scale.at(j) = ls;
      p.actnorm.shift.at(j) = -mean * std::exp(ls);
    }
    // Push the batch through this (now initialized) pair to feed the next one.
    for (std::size_t i = 0; i < h.rows(); ++i) {
      for (std::size_t j = 0; j < dim_; ++j) {
        h(i, j) = h(i, j) * std::exp(p.actnorm.log_scale.at(j)) + p.actnorm.shift.at(j);
      }
    }
    if (has_couplings_) {
      const CouplingLayer& c = p.coupling;
      Tensor xa = take_cols(h, c.mask_a);
      Tensor xb = take_cols(h, c.mask_b);
      Tensor s = mul(tanh(c.scale_net.eval(xa)), c.cap);
      Tensor t = c.shift_net.eval(xa);
      Tensor yb = add(mul(xb, exp(s)), t);
      put_cols(h, yb, c.mask_b);
    }
  }
  actnorm_initialized_ = true;
}

std::vector<Tensor*> FlowStack::params() {
  std::vector<Tensor*> ps;
  for (Pair& p : pairs_) {
    ps.push_back(&p.actnorm.log_scale);
    ps.push_back(&p.actnorm.shift);
    if (has_couplings_) {
      for (Tensor* t : p.coupling.scale_net.params()) ps.push_back(t);
      for (Tensor* t : p.coupling.shift_net.params()) ps.push_back(t);
      ps.push_back(&p.coupling.cap);
    }
  }
  return ps;
}

std::vector<const Tensor*> FlowStack::params() const {
  std::vector<const Tensor*> ps;
  for (const Pair& p : pairs_) {
    ps.push_back(&p.actnorm.log_scale);
    ps.push_back(&p.actnorm.shift);
    if (has_couplings_) {
      for (const Tensor* t : p.coupling.scale_net.params()) ps.push_back(t);
      for (const Tensor* t : p.coupling.shift_net.params()) ps.push_back(t);
      ps.push_back(&p.coupling.cap);
    }
  }
  return ps;
}

}  // namespace openhybrid
