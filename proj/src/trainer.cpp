#include "openhybrid/trainer.hpp"

#include <algorithm>
#include <cmath>

namespace openhybrid {

namespace {

constexpr double kLn2 = 0.6931471805599453;

void append_leaves(const BoundMlp& b, std::vector<Value>& out) {
  for (const BoundMlp::Layer& l : b.layers) {
    out.push_back(l.weight);
    out.push_back(l.bias);
  }
}

void append_leaves(const BoundFlow& b, std::vector<Value>& out) {
  for (const BoundFlow::BoundPair& p : b.pairs) {
    out.push_back(p.an_log_scale);
    out.push_back(p.an_shift);
    if (b.stack->has_couplings()) {
      append_leaves(p.scale_net, out);
      append_leaves(p.shift_net, out);
      out.push_back(p.cap);
    }
  }
}

Value bits_per_dim_node(const BoundFlow& bf, Value log_prob_rows) {
  const double d = static_cast<double>(bf.stack->dim());
  return scale(mean_all(log_prob_rows), -1.0 / (d * kLn2));
}

std::vector<Tensor*> concat(std::vector<Tensor*> a, const std::vector<Tensor*>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

void TrainConfig::validate() const {
  if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
  if (lr_classifier <= 0.0 || lr_flow <= 0.0) {
    throw std::invalid_argument("learning rates must be > 0");
  }
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
}

FullLossNodes build_full_loss(Graph& g, const Model& m, const Tensor& x,
                              const std::vector<int>& labels, double lambda,
                              const BindOverride* override_leaf) {
  Value xv = g.leaf(x, false);
  Value logits, lp;
  BoundFlow bf = m.flow().bind(g, override_leaf);
  BoundMlp bc = m.classifier().bind(g, override_leaf);
  if (m.flow_on_raw()) {
    BoundFlow::Nodes nodes = bf.forward(xv);
    logits = bc.forward(nodes.z);
    lp = bf.log_prob_from(nodes);
  } else {
    BoundMlp be = m.encoder().bind(g, override_leaf);
    Value h = be.forward(xv);
    logits = bc.forward(h);
    lp = bf.log_prob(h);
  }
  FullLossNodes out;
  out.l_c = cross_entropy(logits, labels);
  out.l_d_bits = bits_per_dim_node(bf, lp);
  out.total = add(out.l_c, scale(out.l_d_bits, lambda));
  return out;
}

LossBreakdown full_loss(const Model& m, const Tensor& x, const std::vector<int>& labels,
                        double lambda) {
  Graph g;
  FullLossNodes nodes = build_full_loss(g, m, x, labels, lambda);
  LossBreakdown out;
  out.total = g.value(nodes.total).at(0);
  out.l_c = g.value(nodes.l_c).at(0);
  out.l_d_bits = g.value(nodes.l_d_bits).at(0);
  if (!std::isfinite(out.total)) throw DivergenceError("full_loss is not finite");
  return out;
}

Trainer::Trainer(Model& model, const TrainConfig& cfg)
    : model_(model),
      cfg_(cfg),
      sgd_(cfg.regime == Regime::kRawInputFlow
               ? concat(model.flow_params(), model.classifier_params())
               : concat(model.encoder_params(), model.classifier_params()),
           cfg.lr_classifier, cfg.momentum),
      adam_(cfg.regime == Regime::kJoint
                ? concat(model.encoder_params(), model.flow_params())
                : model.flow_params(),
            cfg.lr_flow, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps),
      shuffle_rng_(mix_seed(cfg.seed, 0xA11CE)) {
  cfg_.validate();
  if (model.config().regime != cfg.regime) {
    throw std::invalid_argument("model and trainer regime disagree");
  }
}

LossBreakdown Trainer::classifier_substep(const Tensor& x, const std::vector<int>& labels) {
  Graph g;
  Value xv = g.leaf(x, false);
  std::vector<Value> leaves;
  Value logits;
  BoundMlp bc = model_.classifier().bind(g);
  if (cfg_.regime == Regime::kRawInputFlow) {
    BoundFlow bf = model_.flow().bind(g);
    logits = bc.forward(bf.forward(xv).z);
    append_leaves(bf, leaves);
  } else {
    BoundMlp be = model_.encoder().bind(g);
    logits = bc.forward(be.forward(xv));
    append_leaves(be, leaves);
  }
  append_leaves(bc, leaves);
  Value loss = cross_entropy(logits, labels);
  g.backward(loss);
  std::vector<Tensor> grads;
  grads.reserve(leaves.size());
  for (Value v : leaves) grads.push_back(g.grad(v));
  if (clip_global_norm(grads, cfg_.grad_clip) > cfg_.grad_clip) ++clip_events_;
  sgd_.step(grads);
  LossBreakdown out;
  out.l_c = g.value(loss).at(0);
  return out;
}

double Trainer::flow_substep(const Tensor& x) {
  if (!model_.flow().actnorm_initialized()) {
    model_.flow().init_actnorm(model_.flow_input(x));
  }
  Graph g;
  std::vector<Value> leaves;
  BoundFlow bf = model_.flow().bind(g);
  Value flow_in;
  if (cfg_.regime == Regime::kJoint) {
    BoundMlp be = model_.encoder().bind(g);
    flow_in = be.forward(g.leaf(x, false));
    append_leaves(be, leaves);
  } else if (cfg_.regime == Regime::kRawInputFlow) {
    flow_in = g.leaf(x, false);
  } else {
    // Frozen encoder: the latent is a constant, so it enters as a plain leaf
    // and the graph never touches encoder parameters.
    flow_in = g.leaf(model_.encode(x), false);
  }
  append_leaves(bf, leaves);
  Value bits = bits_per_dim_node(bf, bf.log_prob(flow_in));
  Value loss = scale(bits, cfg_.lambda);
  g.backward(loss);
  std::vector<Tensor> grads;
  grads.reserve(leaves.size());
  for (Value v : leaves) grads.push_back(g.grad(v));
  if (clip_global_norm(grads, cfg_.grad_clip) > cfg_.grad_clip) ++clip_events_;
  adam_.step(grads);
  return g.value(bits).at(0);
}

LossBreakdown Trainer::train_step(const Tensor& x, const std::vector<int>& labels) {
  if (x.rank() != 2 || x.rows() != labels.size() || labels.empty()) {
    throw std::invalid_argument("train_step: batch and labels disagree");
  }
  LossBreakdown out;
  const bool train_flow = cfg_.lambda > 0.0 && cfg_.regime != Regime::kSoftmaxOnly;
  switch (cfg_.regime) {
    case Regime::kJoint:
    case Regime::kSoftmaxOnly:
    case Regime::kRawInputFlow: {
      out = classifier_substep(x, labels);
      if (train_flow) out.l_d_bits = flow_substep(x);
      break;
    }
    case Regime::kPretrainedEncoder: {
      if (!phase2_) {
        out = classifier_substep(x, labels);
      } else if (train_flow) {
        out.l_d_bits = flow_substep(x);
      }
      break;
    }
  }
  out.total = out.l_c + cfg_.lambda * out.l_d_bits;
  return out;
}

FitResult Trainer::fit(const SplitData& train) {
  const std::size_t n = train.size();
  if (n == 0) throw std::invalid_argument("fit: empty training set");
  const std::size_t k = model_.classifier().out_dim();
  std::vector<bool> seen(k, false);
  for (int y : train.labels) {
    if (y < 1 || static_cast<std::size_t>(y) > k) {
      throw std::invalid_argument("fit: label " + std::to_string(y) + " outside 1.." +
                                  std::to_string(k));
    }
    seen[static_cast<std::size_t>(y - 1)] = true;
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (!seen[c]) {
      throw std::invalid_argument("fit: class " + std::to_string(c + 1) +
                                  " has no training samples");
    }
  }

  const std::size_t m = train.features.cols();
  const bool two_phase = cfg_.regime == Regime::kPretrainedEncoder;
  const std::size_t total_epochs = two_phase ? 2 * cfg_.epochs : cfg_.epochs;
  FitResult result;
  phase2_ = false;
  for (std::size_t epoch = 1; epoch <= total_epochs; ++epoch) {
    if (two_phase && epoch == cfg_.epochs + 1) phase2_ = true;
    const std::vector<std::size_t> perm = shuffle_rng_.permutation(n);
    double sum_c = 0.0, sum_d = 0.0;
    for (std::size_t start = 0; start < n; start += cfg_.batch_size) {
      const std::size_t b = std::min(cfg_.batch_size, n - start);
      Tensor x({b, m});
      std::vector<int> labels(b);
      for (std::size_t i = 0; i < b; ++i) {
        const std::size_t src = perm[start + i];
        for (std::size_t j = 0; j < m; ++j) x(i, j) = train.features(src, j);
        labels[i] = train.labels[src];
      }
      LossBreakdown step;
      try {
        step = train_step(x, labels);
      } catch (const DivergenceError& e) {
        throw DivergenceError("epoch " + std::to_string(epoch) + ": " + e.what());
      }
      sum_c += step.l_c * static_cast<double>(b);
      sum_d += step.l_d_bits * static_cast<double>(b);
    }
    EpochLogRow row;
    row.epoch = epoch;
    row.phase = phase2_ ? 2 : 1;
    row.l_c = sum_c / static_cast<double>(n);
    row.l_d_bits = sum_d / static_cast<double>(n);
    row.total = row.l_c + cfg_.lambda * row.l_d_bits;
    result.log.push_back(row);
  }
  result.clip_events = clip_events_;
  return result;
}

}  // namespace openhybrid
