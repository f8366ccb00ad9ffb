#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gumbolt/tensor.hpp"

namespace gumbolt {

/// Error raised by the differentiation engine. Carries the id of the node
/// that failed so shape and domain problems can be traced in large graphs.
class GraphError : public std::runtime_error {
 public:
  static constexpr std::size_t kNoRow = static_cast<std::size_t>(-1);

  GraphError(std::size_t node, const std::string& what, std::size_t row = kNoRow)
      : std::runtime_error("node " + std::to_string(node) + ": " + what), node_(node), row_(row) {}
  std::size_t node() const noexcept { return node_; }
  // First offending row for non-finite values, kNoRow otherwise.
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t node_;
  std::size_t row_;
};

/// Named leaf tensor with an accumulated gradient. Non-trainable parameters
/// hold buffers such as batch-norm running statistics.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;
};

/// Owns parameters with stable addresses, in insertion order.
class ParameterStore {
 public:
  Parameter& add(std::string name, Tensor value, bool trainable = true);
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;

  void zero_grad();
  std::size_t size() const noexcept { return params_.size(); }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.cbegin(); }
  auto end() const { return params_.cend(); }

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, Parameter*> index_;
};

enum class BatchNormMode { kTrain, kEval };

struct NodeId {
  std::size_t index = static_cast<std::size_t>(-1);
};

/// Define-then-run reverse-mode graph. Nodes are appended in topological
/// order by the builder methods; forward() evaluates them for a set of named
/// inputs and backward() accumulates d(output)/d(parameter) into each bound
/// Parameter::grad.
class Graph {
 public:
  static constexpr double kBatchNormEps = 1e-5;
  static constexpr double kBatchNormMomentum = 0.9;

  NodeId input(const std::string& name);
  NodeId parameter(Parameter& p);
  NodeId constant(Tensor value);

  NodeId matmul(NodeId a, NodeId b);
  // x (R x I) * w (I x O) + bias (O), bias broadcast over rows.
  NodeId affine(NodeId x, NodeId w, NodeId bias);
  NodeId add_row(NodeId x, NodeId bias);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId a, double c);
  NodeId add_scalar(NodeId a, double c);
  NodeId sigmoid(NodeId a);
  NodeId tanh(NodeId a);
  NodeId log(NodeId a);
  NodeId exp(NodeId a);
  NodeId softplus(NodeId a);
  // Forward H(x) with H(0) = 1, zero gradient.
  NodeId heaviside(NodeId a);
  // axis 1 reduces each row to a column (R x 1); axis 0 reduces columns (1 x C).
  NodeId logsumexp(NodeId a, int axis);
  NodeId row_sum(NodeId a);
  NodeId sum(NodeId a);
  NodeId mean(NodeId a);
  NodeId batch_norm(NodeId x, Parameter& gamma, Parameter& beta, Parameter& running_mean,
                    Parameter& running_var, BatchNormMode mode);
  NodeId stop_gradient(NodeId a);
  NodeId concat(NodeId a, NodeId b);
  NodeId slice(NodeId a, std::size_t col_begin, std::size_t col_end);
  // Output row r * times + i is input row r.
  NodeId repeat_rows(NodeId a, std::size_t times);
  NodeId reshape(NodeId a, std::size_t rows, std::size_t cols);

  void forward(const std::map<std::string, Tensor>& inputs);
  void backward(NodeId output);

  const Tensor& value(NodeId n) const;
  const Tensor& grad(NodeId n) const;
  std::size_t size() const noexcept { return nodes_.size(); }
  bool has_forward() const noexcept { return forward_done_; }
  // Node indices in the order the last backward pass visited them.
  const std::vector<std::size_t>& backward_order() const noexcept { return backward_order_; }

 private:
  enum class Op {
    kInput, kParameter, kConstant, kMatMul, kAffine, kAddRow, kAdd, kSub, kMul, kScale,
    kAddScalar, kSigmoid, kTanh, kLog, kExp, kSoftplus, kHeaviside, kLogSumExp, kRowSum,
    kSum, kMean, kBatchNorm, kStopGradient, kConcat, kSlice, kRepeatRows, kReshape
  };

  struct Node {
    Op op = Op::kConstant;
    std::vector<std::size_t> in;
    Tensor value;
    Tensor grad;
    std::string name;
    Parameter* param = nullptr;
    Parameter* bn[4] = {nullptr, nullptr, nullptr, nullptr};
    BatchNormMode bn_mode = BatchNormMode::kEval;
    double scalar = 0.0;
    std::size_t a0 = 0;
    std::size_t a1 = 0;
    // batch-norm scratch: normalized input and inverse std per column
    Tensor aux;
    std::vector<double> inv_std;
  };

  static Node make_node(Op op, std::vector<std::size_t> in);
  NodeId push(Node node);
  void check(NodeId n) const;
  void eval_node(std::size_t i);
  void backprop_node(std::size_t i);
  static const char* op_name(Op op);

  std::vector<Node> nodes_;
  bool forward_done_ = false;
  std::vector<std::size_t> backward_order_;
};

/// Scalar function with analytic gradient; fills `grad` when it is non-empty.
using DifferentiableFn = std::function<double(std::span<const double> x, std::span<double> grad)>;

/// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
double grad_check(const DifferentiableFn& f, std::vector<double> point, double step);

/// Same measure for a graph: perturbs every entry of every listed parameter,
/// re-running forward for each central difference.
double grad_check_graph(Graph& graph, NodeId output, const std::map<std::string, Tensor>& inputs,
                        std::span<Parameter* const> params, double step);

}  // namespace gumbolt
