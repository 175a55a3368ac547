#pragma once

#include <functional>
#include <vector>

#include "openhybrid/tensor.hpp"

namespace openhybrid {

class Graph;

/// Handle to a node on a Graph's tape. Cheap to copy; valid as long as the
/// Graph lives.
struct Value {
  Graph* graph = nullptr;
  int id = -1;
};

/// Reverse-mode autodiff tape. Nodes are appended in evaluation order, so
/// append order is a topological order; backward() visits nodes in strict
/// reverse append order, which guarantees a node's adjoint is complete before
/// it is propagated to its inputs. Graphs are rebuilt per batch and node
/// values are immutable once recorded.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Records an input node. Only trainable leaves receive gradients.
  Value leaf(Tensor value, bool trainable = false);

  const Tensor& value(Value v) const;

  /// Adjoint of a node after backward(). Zero if the node does not influence
  /// the loss (including non-trainable leaves, which are skipped).
  const Tensor& grad(Value v);

  /// Seeds the scalar loss node with adjoint 1 and accumulates adjoints in
  /// reverse tape order. Resets all adjoints first, so re-running gives
  /// identical results. Throws std::invalid_argument if the loss is not a
  /// scalar and DivergenceError if its value is not finite.
  void backward(Value loss);

  void zero_adjoints();

  std::size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op {
    kLeaf,
    kMatMul,
    kAdd,
    kSub,
    kMul,
    kTanh,
    kExp,
    kLog,
    kRelu,
    kAddRowVec,
    kMulRowVec,
    kSelectCols,
    kMergeCols,
    kRowSum,
    kSumAll,
    kMeanAll,
    kScale,
    kShift,
    kCrossEntropy,
  };

  struct Node {
    Op op = Op::kLeaf;
    int a = -1;
    int b = -1;
    double c = 0.0;             // constant for kScale / kShift
    Tensor value;
    Tensor adjoint;             // left empty until backward touches the node
    Tensor cache;               // op-specific (softmax rows for kCrossEntropy)
    std::vector<std::size_t> cols_a, cols_b;
    std::vector<int> labels;    // zero-based targets for kCrossEntropy
    bool trainable = false;
  };

  int push(Node n);
  const Node& node(Value v) const;
  void check_handle(Value v) const;

  std::vector<Node> nodes_;

  friend struct GraphOps;
  friend Value matmul(Value, Value);
  friend Value add(Value, Value);
  friend Value sub(Value, Value);
  friend Value mul(Value, Value);
  friend Value tanh(Value);
  friend Value exp(Value);
  friend Value log(Value);
  friend Value relu(Value);
  friend Value add_rowvec(Value, Value);
  friend Value mul_rowvec(Value, Value);
  friend Value select_cols(Value, std::vector<std::size_t>);
  friend Value merge_cols(Value, std::vector<std::size_t>, Value,
                          std::vector<std::size_t>);
  friend Value row_sum(Value);
  friend Value sum_all(Value);
  friend Value mean_all(Value);
  friend Value scale(Value, double);
  friend Value shift(Value, double);
  friend Value cross_entropy(Value, const std::vector<int>&);
};

// Tape-recorded operations. Binary elementwise ops accept equal shapes or a
// single-element operand broadcast against the other side; no other
// broadcasting exists.
Value matmul(Value a, Value b);
Value add(Value a, Value b);
Value sub(Value a, Value b);
Value mul(Value a, Value b);
Value tanh(Value a);
Value exp(Value a);
Value log(Value a);
Value relu(Value a);

/// y[i,j] = x[i,j] + v[j] for x of shape [n,m] and v of size m.
Value add_rowvec(Value x, Value v);
/// y[i,j] = x[i,j] * v[j].
Value mul_rowvec(Value x, Value v);
/// y[i,t] = x[i, cols[t]].
Value select_cols(Value x, std::vector<std::size_t> cols);
/// Scatter of two column blocks into one matrix; cols_a and cols_b must
/// partition {0 .. a.cols+b.cols-1}.
Value merge_cols(Value a, std::vector<std::size_t> cols_a, Value b,
                 std::vector<std::size_t> cols_b);
/// [n,m] -> [n], summing each row.
Value row_sum(Value x);
Value sum_all(Value x);
Value mean_all(Value x);
Value scale(Value x, double c);
Value shift(Value x, double c);

/// Mean over the batch of -log softmax probability of the true class.
/// Labels are one-based ({1..k}, matching the rest of the pipeline) and are
/// converted to zero-based indices internally. Computed with max-subtracted
/// logsumexp; the gradient wrt logits is (softmax - one_hot) / n.
Value cross_entropy(Value logits, const std::vector<int>& labels);

inline Value operator+(Value a, Value b) { return add(a, b); }
inline Value operator-(Value a, Value b) { return sub(a, b); }
inline Value operator*(Value a, Value b) { return mul(a, b); }
inline Value operator-(Value a) { return scale(a, -1.0); }

/// Compares the analytic gradient of the scalar function built by `f` against
/// central finite differences with step `h`. Returns the max over coordinates
/// of |analytic - numeric| / max(1, |analytic|).
double grad_check(const std::function<Value(Graph&, Value)>& f,
                  const Tensor& theta, double h = 1e-5);

}  // namespace openhybrid
