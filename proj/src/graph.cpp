#include "openhybrid/graph.hpp"

#include <cmath>
#include <string>

namespace openhybrid {

Value Graph::leaf(Tensor value, bool trainable) {
  Node n;
  n.op = Op::kLeaf;
  n.value = std::move(value);
  n.trainable = trainable;
  return Value{this, push(std::move(n))};
}

int Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

void Graph::check_handle(Value v) const {
  if (v.graph != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
    throw std::invalid_argument("Value handle does not belong to this graph");
  }
}

const Graph::Node& Graph::node(Value v) const {
  check_handle(v);
  return nodes_[static_cast<std::size_t>(v.id)];
}

const Tensor& Graph::value(Value v) const { return node(v).value; }

const Tensor& Graph::grad(Value v) {
  check_handle(v);
  Node& n = nodes_[static_cast<std::size_t>(v.id)];
  if (n.adjoint.empty()) n.adjoint = Tensor(n.value.shape());
  return n.adjoint;
}

void Graph::zero_adjoints() {
  for (Node& n : nodes_) n.adjoint = Tensor();
}

void Graph::backward(Value loss) {
  check_handle(loss);
  const Node& ln = nodes_[static_cast<std::size_t>(loss.id)];
  if (ln.value.size() != 1) {
    throw std::invalid_argument("backward requires a scalar loss, got shape " +
                                shape_str(ln.value.shape()));
  }
  if (!ln.value.all_finite()) {
    throw DivergenceError("loss is not finite");
  }

  zero_adjoints();
  nodes_[static_cast<std::size_t>(loss.id)].adjoint = Tensor(ln.value.shape());
  nodes_[static_cast<std::size_t>(loss.id)].adjoint.at(0) = 1.0;

  // Helper: adjoint buffer of input node `id`, allocated lazily. Gradients
  // into non-trainable leaves are skipped, they are never read.
  auto sink = [this](int id) -> Tensor* {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.op == Op::kLeaf && !n.trainable) return nullptr;
    if (n.adjoint.empty()) n.adjoint = Tensor(n.value.shape());
    return &n.adjoint;
  };

  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.adjoint.empty() || n.op == Op::kLeaf) continue;
    const Tensor& dy = n.adjoint;
    Node& na = nodes_[static_cast<std::size_t>(n.a)];

    switch (n.op) {
      case Op::kLeaf:
        break;
      case Op::kMatMul: {
        Node& nb = nodes_[static_cast<std::size_t>(n.b)];
        const Tensor& A = na.value;
        const Tensor& B = nb.value;
        const std::size_t r = A.rows(), k = A.cols(), c = B.cols();
        if (Tensor* da = sink(n.a)) {
          // dA[i,l] += sum_j dy[i,j] * B[l,j]
          for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t l = 0; l < k; ++l) {
              double s = 0.0;
              const double* dyr = dy.data().data() + i * c;
              const double* br = B.data().data() + l * c;
              for (std::size_t j = 0; j < c; ++j) s += dyr[j] * br[j];
              da->at(i * k + l) += s;
            }
          }
        }
        if (Tensor* db = sink(n.b)) {
          // dB[l,j] += sum_i A[i,l] * dy[i,j]
          for (std::size_t i = 0; i < r; ++i) {
            const double* ar = A.data().data() + i * k;
            const double* dyr = dy.data().data() + i * c;
            for (std::size_t l = 0; l < k; ++l) {
              const double av = ar[l];
              if (av == 0.0) continue;
              double* dbr = db->data().data() + l * c;
              for (std::size_t j = 0; j < c; ++j) dbr[j] += av * dyr[j];
            }
          }
        }
        break;
      }
      case Op::kAdd:
      case Op::kSub: {
        Node& nb = nodes_[static_cast<std::size_t>(n.b)];
        const double sign_b = (n.op == Op::kSub) ? -1.0 : 1.0;
        if (Tensor* da = sink(n.a)) {
          if (na.value.size() == dy.size()) {
            for (std::size_t i = 0; i < dy.size(); ++i) da->at(i) += dy.at(i);
          } else {  // a was the broadcast scalar
            double s = 0.0;
            for (std::size_t i = 0; i < dy.size(); ++i) s += dy.at(i);
            da->at(0) += s;
          }
        }
        if (Tensor* db = sink(n.b)) {
          if (nb.value.size() == dy.size()) {
            for (std::size_t i = 0; i < dy.size(); ++i) db->at(i) += sign_b * dy.at(i);
          } else {
            double s = 0.0;
            for (std::size_t i = 0; i < dy.size(); ++i) s += dy.at(i);
            db->at(0) += sign_b * s;
          }
        }
        break;
      }
      case Op::kMul: {
        Node& nb = nodes_[static_cast<std::size_t>(n.b)];
        const Tensor& av = na.value;
        const Tensor& bv = nb.value;
        if (Tensor* da = sink(n.a)) {
          if (av.size() == dy.size()) {
            for (std::size_t i = 0; i < dy.size(); ++i) {
              da->at(i) += dy.at(i) * (bv.size() == 1 ? bv.at(0) : bv.at(i));
            }
          } else {
            double s = 0.0;
            for (std::size_t i = 0; i < dy.size(); ++i) s += dy.at(i) * bv.at(i);
            da->at(0) += s;
          }
        }
        if (Tensor* db = sink(n.b)) {
          if (bv.size() == dy.size()) {
            for (std::size_t i = 0; i < dy.size(); ++i) {
              db->at(i) += dy.at(i) * (av.size() == 1 ? av.at(0) : av.at(i));
            }
          } else {
            double s = 0.0;
            for (std::size_t i = 0; i < dy.size(); ++i) s += dy.at(i) * av.at(i);
            db->at(0) += s;
          }
        }
        break;
      }
      case Op::kTanh: {
        if (Tensor* da = sink(n.a)) {
          for (std::size_t i = 0; i < dy.size(); ++i) {
            const double y = n.value.at(i);
            da->at(i) += dy.at(i) * (1.0 - y * y);
          }
        }
        break;
      }
      case Op::kExp: {
        if (Tensor* da = sink(n.a)) {
          for (std::size_t i = 0; i < dy.size(); ++i) da->at(i) += dy.at(i) * n.value.at(i);
        }
        break;
      }
      case Op::kLog: {
        if (Tensor* da = sink(n.a)) {
          for (std::size_t i = 0; i < dy.size(); ++i) da->at(i) += dy.at(i) / na.value.at(i);
        }
        break;
      }
      case Op::kRelu: {
        // Subgradient at exactly 0 is 0.
        if (Tensor* da = sink(n.a)) {
          for (std::size_t i = 0; i < dy.size(); ++i) {
            if (na.value.at(i) > 0.0) da->at(i) += dy.at(i);
          }
        }
        break;
      }
      case Op::kAddRowVec: {
        const std::size_t rows = n.value.rows(), m = n.value.cols();
        if (Tensor* da = sink(n.a)) {
          for (std::size_t i = 0; i < dy.size(); ++i) da->at(i) += dy.at(i);
        }
        if (Tensor* db = sink(n.b)) {
          for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < m; ++j) db->at(j) += dy.at(i * m + j);
          }
        }
        break;
      }
      case Op::kMulRowVec: {
        Node& nb = nodes_[static_cast<std::size_t>(n.b)];
        const std::size_t rows = n.value.rows(), m = n.value.cols();
        if (Tensor* da = sink(n.a)) {
          for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
              da->at(i * m + j) += dy.at(i * m + j) * nb.value.at(j);
            }
          }
        }
        if (Tensor* db = sink(n.b)) {
          for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
              db->at(j) += dy.at(i * m + j) * na.value.at(i * m + j);
            }
          }
        }
        break;
      }
      case Op::kSelectCols: {
        if (Tensor* da = sink(n.a)) {
          const std::size_t rows = n.value.rows(), sel = n.cols_a.size();
          const std::size_t m = na.value.cols();
          for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t t = 0; t < sel; ++t) {
              da->at(i * m + n.cols_a[t]) += dy.at(i * sel + t);
            }
          }
        }
        break;
      }
      case Op::kMergeCols: {
        const std::size_t rows = n.value.rows(), m = n.value.cols();
        if (Tensor* da = sink(n.a)) {
          const std::size_t ka = n.cols_a.size();
          for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t t = 0; t < ka; ++t) {
              da->at(i * ka + t) += dy.at(i * m + n.cols_a[t]);
            }
          }
        }
        if (Tensor* db = sink(n.b)) {
          const std::size_t kb = n.cols_b.size();
          for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t t = 0; t < kb; ++t) {
              db->at(i * kb + t) += dy.at(i * m + n.cols_b[t]);
            }
          }
        }
        break;
      }
      case Op::kRowSum: {
        if (Tensor* da = sink(n.a)) {
          const std::size_t rows = na.value.rows(), m = na.value.cols();
          for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < m; ++j) da->at(i * m + j) += dy.at(i);
          }
        }
        break;
      }
      case Op::kSumAll: {
        if (Tensor* da = sink(n.a)) {
          for (std::size_t i = 0; i < na.value.size(); ++i) da->at(i) += dy.at(0);
        }
        break;
      }
      case Op::kMeanAll: {
        if (Tensor* da = sink(n.a)) {
          const double inv = 1.0 / static_cast<double>(na.value.size());
          for (std::size_t i = 0; i < na.value.size(); ++i) da->at(i) += dy.at(0) * inv;
        }
        break;
      }
      case Op::kScale: {
        if (Tensor* da = sink(n.a)) {
          for (std::size_t i = 0; i < dy.size(); ++i) da->at(i) += dy.at(i) * n.c;
        }
        break;
      }
      case Op::kShift: {
        if (Tensor* da = sink(n.a)) {
          for (std::size_t i = 0; i < dy.size(); ++i) da->at(i) += dy.at(i);
        }
        break;
      }
      case Op::kCrossEntropy: {
        if (Tensor* da = sink(n.a)) {
          const Tensor& sm = n.cache;
          const std::size_t rows = sm.rows(), k = sm.cols();
          const double scale_adj = dy.at(0) / static_cast<double>(rows);
          for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < k; ++j) {
              double g = sm(i, j);
              if (static_cast<int>(j) == n.labels[i]) g -= 1.0;
              da->at(i * k + j) += scale_adj * g;
            }
          }
        }
        break;
      }
    }
  }
}

// All op builders live behind this struct so Graph's internals stay private.
struct GraphOps {
  static Graph* same_graph(Value a, Value b) {
    if (a.graph == nullptr || a.graph != b.graph) {
      throw std::invalid_argument("operands belong to different graphs");
    }
    return a.graph;
  }

  static Value unary(Value a, Graph::Op op, Tensor value) {
    Graph::Node n;
    n.op = op;
    n.a = a.id;
    n.value = std::move(value);
    return Value{a.graph, a.graph->push(std::move(n))};
  }

  static Value binary(Value a, Value b, Graph::Op op, Tensor value) {
    Graph* g = same_graph(a, b);
    Graph::Node n;
    n.op = op;
    n.a = a.id;
    n.b = b.id;
    n.value = std::move(value);
    return Value{g, g->push(std::move(n))};
  }

  static const Tensor& val(Value v) { return v.graph->value(v); }

  static Value push_node(Graph* g, Graph::Node n) {
    return Value{g, g->push(std::move(n))};
  }
};

Value matmul(Value a, Value b) {
  GraphOps::same_graph(a, b);
  return GraphOps::binary(a, b, Graph::Op::kMatMul,
                          matmul(GraphOps::val(a), GraphOps::val(b)));
}

Value add(Value a, Value b) {
  GraphOps::same_graph(a, b);
  return GraphOps::binary(a, b, Graph::Op::kAdd, add(GraphOps::val(a), GraphOps::val(b)));
}

Value sub(Value a, Value b) {
  GraphOps::same_graph(a, b);
  return GraphOps::binary(a, b, Graph::Op::kSub, sub(GraphOps::val(a), GraphOps::val(b)));
}

Value mul(Value a, Value b) {
  GraphOps::same_graph(a, b);
  return GraphOps::binary(a, b, Graph::Op::kMul, mul(GraphOps::val(a), GraphOps::val(b)));
}

Value tanh(Value a) { return GraphOps::unary(a, Graph::Op::kTanh, tanh(GraphOps::val(a))); }
Value exp(Value a) { return GraphOps::unary(a, Graph::Op::kExp, exp(GraphOps::val(a))); }
Value log(Value a) { return GraphOps::unary(a, Graph::Op::kLog, log(GraphOps::val(a))); }
Value relu(Value a) { return GraphOps::unary(a, Graph::Op::kRelu, relu(GraphOps::val(a))); }

Value add_rowvec(Value x, Value v) {
  GraphOps::same_graph(x, v);
  const Tensor& xv = GraphOps::val(x);
  const Tensor& vv = GraphOps::val(v);
  if (xv.rank() != 2 || vv.size() != xv.cols()) {
    throw std::invalid_argument("add_rowvec: " + shape_str(xv.shape()) + " vs " +
                                shape_str(vv.shape()));
  }
  Tensor out(xv.shape());
  const std::size_t rows = xv.rows(), m = xv.cols();
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < m; ++j) out.at(i * m + j) = xv.at(i * m + j) + vv.at(j);
  }
  return GraphOps::binary(x, v, Graph::Op::kAddRowVec, std::move(out));
}

Value mul_rowvec(Value x, Value v) {
  GraphOps::same_graph(x, v);
  const Tensor& xv = GraphOps::val(x);
  const Tensor& vv = GraphOps::val(v);
  if (xv.rank() != 2 || vv.size() != xv.cols()) {
    throw std::invalid_argument("mul_rowvec: " + shape_str(xv.shape()) + " vs " +
                                shape_str(vv.shape()));
  }
  Tensor out(xv.shape());
  const std::size_t rows = xv.rows(), m = xv.cols();
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < m; ++j) out.at(i * m + j) = xv.at(i * m + j) * vv.at(j);
  }
  return GraphOps::binary(x, v, Graph::Op::kMulRowVec, std::move(out));
}

Value select_cols(Value x, std::vector<std::size_t> cols) {
  const Tensor& xv = GraphOps::val(x);
  if (xv.rank() != 2) throw std::invalid_argument("select_cols: input must be rank 2");
  for (std::size_t c : cols) {
    if (c >= xv.cols()) throw std::invalid_argument("select_cols: column index out of range");
  }
  const std::size_t rows = xv.rows(), sel = cols.size();
  Tensor out({rows, sel});
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t t = 0; t < sel; ++t) out.at(i * sel + t) = xv(i, cols[t]);
  }
  Graph::Node n;
  n.op = Graph::Op::kSelectCols;
  n.a = x.id;
  n.value = std::move(out);
  n.cols_a = std::move(cols);
  return GraphOps::push_node(x.graph, std::move(n));
}

Value merge_cols(Value a, std::vector<std::size_t> cols_a, Value b,
                 std::vector<std::size_t> cols_b) {
  Graph* g = GraphOps::same_graph(a, b);
  const Tensor& av = GraphOps::val(a);
  const Tensor& bv = GraphOps::val(b);
  if (av.rank() != 2 || bv.rank() != 2 || av.rows() != bv.rows() ||
      cols_a.size() != av.cols() || cols_b.size() != bv.cols()) {
    throw std::invalid_argument("merge_cols: shape/index-count mismatch");
  }
  const std::size_t rows = av.rows(), m = cols_a.size() + cols_b.size();
  std::vector<bool> seen(m, false);
  for (std::size_t c : cols_a) {
    if (c >= m || seen[c]) throw std::invalid_argument("merge_cols: bad column partition");
    seen[c] = true;
  }
  for (std::size_t c : cols_b) {
    if (c >= m || seen[c]) throw std::invalid_argument("merge_cols: bad column partition");
    seen[c] = true;
  }
  Tensor out({rows, m});
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t t = 0; t < cols_a.size(); ++t) out(i, cols_a[t]) = av(i, t);
    for (std::size_t t = 0; t < cols_b.size(); ++t) out(i, cols_b[t]) = bv(i, t);
  }
  Graph::Node n;
  n.op = Graph::Op::kMergeCols;
  n.a = a.id;
  n.b = b.id;
  n.value = std::move(out);
  n.cols_a = std::move(cols_a);
  n.cols_b = std::move(cols_b);
  return GraphOps::push_node(g, std::move(n));
}

Value row_sum(Value x) {
  const Tensor& xv = GraphOps::val(x);
  if (xv.rank() != 2) throw std::invalid_argument("row_sum: input must be rank 2");
  Tensor out({xv.rows()});
  for (std::size_t i = 0; i < xv.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < xv.cols(); ++j) s += xv(i, j);
    out.at(i) = s;
  }
  return GraphOps::unary(x, Graph::Op::kRowSum, std::move(out));
}

Value sum_all(Value x) {
  const Tensor& xv = GraphOps::val(x);
  double s = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) s += xv.at(i);
  return GraphOps::unary(x, Graph::Op::kSumAll, Tensor::scalar(s));
}

Value mean_all(Value x) {
  const Tensor& xv = GraphOps::val(x);
  if (xv.size() == 0) throw std::invalid_argument("mean_all: empty tensor");
  double s = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) s += xv.at(i);
  return GraphOps::unary(x, Graph::Op::kMeanAll,
                         Tensor::scalar(s / static_cast<double>(xv.size())));
}

Value scale(Value x, double c) {
  const Tensor& xv = GraphOps::val(x);
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out.at(i) = xv.at(i) * c;
  Graph::Node n;
  n.op = Graph::Op::kScale;
  n.a = x.id;
  n.c = c;
  n.value = std::move(out);
  return GraphOps::push_node(x.graph, std::move(n));
}

Value shift(Value x, double c) {
  const Tensor& xv = GraphOps::val(x);
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out.at(i) = xv.at(i) + c;
  Graph::Node n;
  n.op = Graph::Op::kShift;
  n.a = x.id;
  n.c = c;
  n.value = std::move(out);
  return GraphOps::push_node(x.graph, std::move(n));
}

Value cross_entropy(Value logits, const std::vector<int>& labels) {
  const Tensor& lv = GraphOps::val(logits);
  if (lv.rank() != 2) throw std::invalid_argument("cross_entropy: logits must be rank 2");
  const std::size_t rows = lv.rows(), k = lv.cols();
  if (labels.size() != rows) {
    throw std::invalid_argument("cross_entropy: got " + std::to_string(labels.size()) +
                                " labels for " + std::to_string(rows) + " rows");
  }
  Graph::Node n;
  n.op = Graph::Op::kCrossEntropy;
  n.a = logits.id;
  n.labels.resize(rows);
  n.cache = Tensor({rows, k});
  double loss = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    const int y = labels[i];
    if (y < 1 || static_cast<std::size_t>(y) > k) {
      throw std::invalid_argument("cross_entropy: label " + std::to_string(y) +
                                  " out of range 1.." + std::to_string(k));
    }
    n.labels[i] = y - 1;
    double mx = lv(i, 0);
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, lv(i, j));
    double denom = 0.0;
    for (std::size_t j = 0; j < k; ++j) denom += std::exp(lv(i, j) - mx);
    for (std::size_t j = 0; j < k; ++j) n.cache(i, j) = std::exp(lv(i, j) - mx) / denom;
    loss += mx + std::log(denom) - lv(i, static_cast<std::size_t>(y - 1));
  }
  n.value = Tensor::scalar(loss / static_cast<double>(rows));
  return GraphOps::push_node(logits.graph, std::move(n));
}

double grad_check(const std::function<Value(Graph&, Value)>& f,
                  const Tensor& theta, double h) {
  Tensor analytic;
  {
    Graph g;
    Value t = g.leaf(theta, true);
    Value loss = f(g, t);
    g.backward(loss);
    analytic = g.grad(t);
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    Tensor tp = theta;
    tp.at(i) += h;
    Tensor tm = theta;
    tm.at(i) -= h;
    double fp, fm;
    {
      Graph g;
      Value loss = f(g, g.leaf(tp, false));
      fp = g.value(loss).at(0);
    }
    {
      Graph g;
      Value loss = f(g, g.leaf(tm, false));
      fm = g.value(loss).at(0);
    }
    const double numeric = (fp - fm) / (2.0 * h);
    const double err = std::abs(analytic.at(i) - numeric) /
                       std::max(1.0, std::abs(analytic.at(i)));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace openhybrid
