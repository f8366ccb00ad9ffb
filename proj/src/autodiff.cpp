#include "gumbolt/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gumbolt/numeric.hpp"

namespace gumbolt {

Parameter& ParameterStore::add(std::string name, Tensor value, bool trainable) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
  auto p = std::make_unique<Parameter>();
  p->name = std::move(name);
  p->grad = Tensor(value.shape(), 0.0);
  p->value = std::move(value);
  p->trainable = trainable;
  Parameter& ref = *p;
  index_[ref.name] = &ref;
  params_.push_back(std::move(p));
  return ref;
}

Parameter* ParameterStore::find(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : it->second;
}

const Parameter* ParameterStore::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : it->second;
}

Parameter& ParameterStore::at(const std::string& name) {
  Parameter* p = find(name);
  if (!p) throw std::out_of_range("unknown parameter: " + name);
  return *p;
}

const Parameter& ParameterStore::at(const std::string& name) const {
  const Parameter* p = find(name);
  if (!p) throw std::out_of_range("unknown parameter: " + name);
  return *p;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->grad.fill(0.0);
}

// ---------------------------------------------------------------------------

const char* Graph::op_name(Op op) {
  switch (op) {
    case Op::kInput: return "input";
    case Op::kParameter: return "parameter";
    case Op::kConstant: return "constant";
    case Op::kMatMul: return "matmul";
    case Op::kAffine: return "affine";
    case Op::kAddRow: return "add_row";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kScale: return "scale";
    case Op::kAddScalar: return "add_scalar";
    case Op::kSigmoid: return "sigmoid";
    case Op::kTanh: return "tanh";
    case Op::kLog: return "log";
    case Op::kExp: return "exp";
    case Op::kSoftplus: return "softplus";
    case Op::kHeaviside: return "heaviside";
    case Op::kLogSumExp: return "logsumexp";
    case Op::kRowSum: return "row_sum";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
    case Op::kBatchNorm: return "batch_norm";
    case Op::kStopGradient: return "stop_gradient";
    case Op::kConcat: return "concat";
    case Op::kSlice: return "slice";
    case Op::kRepeatRows: return "repeat_rows";
    case Op::kReshape: return "reshape";
  }
  return "?";
}

void Graph::check(NodeId n) const {
  if (n.index >= nodes_.size()) throw std::out_of_range("graph: invalid node id");
}

Graph::Node Graph::make_node(Op op, std::vector<std::size_t> in) {
  Node n;
  n.op = op;
  n.in = std::move(in);
  return n;
}

NodeId Graph::push(Node node) {
  for (std::size_t in : node.in)
    if (in >= nodes_.size()) throw std::out_of_range("graph: invalid operand node id");
  nodes_.push_back(std::move(node));
  forward_done_ = false;
  return NodeId{nodes_.size() - 1};
}

NodeId Graph::input(const std::string& name) {
  Node n = make_node(Op::kInput, {});
  n.name = name;
  return push(std::move(n));
}

NodeId Graph::parameter(Parameter& p) {
  Node n = make_node(Op::kParameter, {});
  n.name = p.name;
  n.param = &p;
  return push(std::move(n));
}

NodeId Graph::constant(Tensor value) {
  Node n = make_node(Op::kConstant, {});
  n.value = std::move(value);
  return push(std::move(n));
}

#define GUMBOLT_UNARY(fn, OP) \
  NodeId Graph::fn(NodeId a) { return push(make_node(Op::OP, {a.index})); }
GUMBOLT_UNARY(sigmoid, kSigmoid)
GUMBOLT_UNARY(tanh, kTanh)
GUMBOLT_UNARY(log, kLog)
GUMBOLT_UNARY(exp, kExp)
GUMBOLT_UNARY(softplus, kSoftplus)
GUMBOLT_UNARY(heaviside, kHeaviside)
GUMBOLT_UNARY(row_sum, kRowSum)
GUMBOLT_UNARY(sum, kSum)
GUMBOLT_UNARY(mean, kMean)
GUMBOLT_UNARY(stop_gradient, kStopGradient)
#undef GUMBOLT_UNARY

NodeId Graph::matmul(NodeId a, NodeId b) { return push(make_node(Op::kMatMul, {a.index, b.index})); }
NodeId Graph::affine(NodeId x, NodeId w, NodeId bias) {
  return push(make_node(Op::kAffine, {x.index, w.index, bias.index}));
}
NodeId Graph::add_row(NodeId x, NodeId bias) {
  return push(make_node(Op::kAddRow, {x.index, bias.index}));
}
NodeId Graph::add(NodeId a, NodeId b) { return push(make_node(Op::kAdd, {a.index, b.index})); }
NodeId Graph::sub(NodeId a, NodeId b) { return push(make_node(Op::kSub, {a.index, b.index})); }
NodeId Graph::mul(NodeId a, NodeId b) { return push(make_node(Op::kMul, {a.index, b.index})); }
NodeId Graph::concat(NodeId a, NodeId b) { return push(make_node(Op::kConcat, {a.index, b.index})); }

NodeId Graph::scale(NodeId a, double c) {
  Node n = make_node(Op::kScale, {a.index});
  n.scalar = c;
  return push(std::move(n));
}

NodeId Graph::add_scalar(NodeId a, double c) {
  Node n = make_node(Op::kAddScalar, {a.index});
  n.scalar = c;
  return push(std::move(n));
}

NodeId Graph::logsumexp(NodeId a, int axis) {
  if (axis != 0 && axis != 1) throw std::invalid_argument("logsumexp: axis must be 0 or 1");
  Node n = make_node(Op::kLogSumExp, {a.index});
  n.a0 = static_cast<std::size_t>(axis);
  return push(std::move(n));
}

NodeId Graph::batch_norm(NodeId x, Parameter& gamma, Parameter& beta, Parameter& running_mean,
                         Parameter& running_var, BatchNormMode mode) {
  Node n = make_node(Op::kBatchNorm, {x.index});
  n.bn[0] = &gamma;
  n.bn[1] = &beta;
  n.bn[2] = &running_mean;
  n.bn[3] = &running_var;
  n.bn_mode = mode;
  return push(std::move(n));
}

NodeId Graph::slice(NodeId a, std::size_t col_begin, std::size_t col_end) {
  if (col_end < col_begin) throw std::invalid_argument("slice: end before begin");
  Node n = make_node(Op::kSlice, {a.index});
  n.a0 = col_begin;
  n.a1 = col_end;
  return push(std::move(n));
}

NodeId Graph::repeat_rows(NodeId a, std::size_t times) {
  if (times == 0) throw std::invalid_argument("repeat_rows: times must be positive");
  Node n = make_node(Op::kRepeatRows, {a.index});
  n.a0 = times;
  return push(std::move(n));
}

NodeId Graph::reshape(NodeId a, std::size_t rows, std::size_t cols) {
  Node n = make_node(Op::kReshape, {a.index});
  n.a0 = rows;
  n.a1 = cols;
  return push(std::move(n));
}

const Tensor& Graph::value(NodeId n) const {
  check(n);
  if (!forward_done_ && nodes_[n.index].op != Op::kConstant)
    throw GraphError(n.index, "value requested before forward");
  return nodes_[n.index].value;
}

const Tensor& Graph::grad(NodeId n) const {
  check(n);
  return nodes_[n.index].grad;
}

// ---------------------------------------------------------------------------
// forward

namespace {

std::size_t rows_of(const Tensor& t) { return t.rows(); }
std::size_t cols_of(const Tensor& t) { return t.cols(); }

Tensor matrix_like(std::size_t r, std::size_t c) { return Tensor::matrix(r, c); }

}  // namespace

void Graph::forward(const std::map<std::string, Tensor>& inputs) {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Node& n = nodes_[i];
    if (n.op == Op::kInput) {
      auto it = inputs.find(n.name);
      if (it == inputs.end()) throw GraphError(i, "missing input '" + n.name + "'");
      n.value = it->second;
    } else if (n.op == Op::kParameter) {
      n.value = n.param->value;
    } else if (n.op != Op::kConstant) {
      eval_node(i);
    }
    if (!n.value.all_finite()) {
      std::size_t k = 0;
      while (std::isfinite(n.value[k])) ++k;
      const std::size_t row = k / std::max<std::size_t>(1, n.value.cols());
      throw GraphError(i, std::string("non-finite value in ") + op_name(n.op) + " at row " +
                              std::to_string(row), row);
    }
  }
  forward_done_ = true;
}

void Graph::eval_node(std::size_t i) {
  Node& n = nodes_[i];
  auto in = [&](std::size_t k) -> const Tensor& { return nodes_[n.in[k]].value; };
  auto mismatch = [&](const Tensor& a, const Tensor& b) {
    throw GraphError(i, std::string(op_name(n.op)) + ": shape mismatch " + a.shape_string() +
                            " vs " + b.shape_string());
  };
  auto unary = [&](auto fn) {
    const Tensor& a = in(0);
    Tensor out = a;
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = fn(a[k]);
    n.value = std::move(out);
  };

  switch (n.op) {
    case Op::kMatMul:
    case Op::kAffine: {
      const Tensor& a = in(0);
      const Tensor& w = in(1);
      const std::size_t r = rows_of(a), inner = cols_of(a), c = cols_of(w);
      if (w.rank() != 2 || rows_of(w) != inner) mismatch(a, w);
      Tensor out = matrix_like(r, c);
      if (n.op == Op::kAffine) {
        const Tensor& b = in(2);
        if (b.size() != c) mismatch(w, b);
        for (std::size_t rr = 0; rr < r; ++rr)
          std::copy(b.values().begin(), b.values().end(), out.row(rr).begin());
      }
      for (std::size_t rr = 0; rr < r; ++rr) {
        const double* arow = a.data() + rr * inner;
        double* orow = out.data() + rr * c;
        for (std::size_t k = 0; k < inner; ++k) {
          const double av = arow[k];
          if (av == 0.0) continue;
          const double* wrow = w.data() + k * c;
          for (std::size_t cc = 0; cc < c; ++cc) orow[cc] += av * wrow[cc];
        }
      }
      n.value = std::move(out);
      break;
    }
    case Op::kAddRow: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      if (b.size() != cols_of(a)) mismatch(a, b);
      Tensor out = a;
      for (std::size_t rr = 0; rr < rows_of(a); ++rr)
        for (std::size_t cc = 0; cc < cols_of(a); ++cc) out.at(rr, cc) += b[cc];
      n.value = std::move(out);
      break;
    }
    case Op::kAdd:
    case Op::kSub:
    case Op::kMul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      if (!a.same_shape(b)) mismatch(a, b);
      Tensor out = a;
      for (std::size_t k = 0; k < out.size(); ++k) {
        if (n.op == Op::kAdd) out[k] = a[k] + b[k];
        else if (n.op == Op::kSub) out[k] = a[k] - b[k];
        else out[k] = a[k] * b[k];
      }
      n.value = std::move(out);
      break;
    }
    case Op::kScale: unary([c = n.scalar](double v) { return c * v; }); break;
    case Op::kAddScalar: unary([c = n.scalar](double v) { return v + c; }); break;
    case Op::kSigmoid: unary([](double v) { return gumbolt::sigmoid(v); }); break;
    case Op::kTanh: unary([](double v) { return std::tanh(v); }); break;
    case Op::kLog: {
      const Tensor& a = in(0);
      for (std::size_t k = 0; k < a.size(); ++k)
        if (!(a[k] > 0.0)) {
          const std::size_t row = k / std::max<std::size_t>(1, a.cols());
          throw GraphError(i, "log of non-positive value at row " + std::to_string(row), row);
        }
      unary([](double v) { return std::log(v); });
      break;
    }
    case Op::kExp: unary([](double v) { return std::exp(v); }); break;
    case Op::kSoftplus: unary([](double v) { return gumbolt::softplus(v); }); break;
    case Op::kHeaviside: unary([](double v) { return v >= 0.0 ? 1.0 : 0.0; }); break;
    case Op::kStopGradient: n.value = in(0); break;
    case Op::kLogSumExp: {
      const Tensor& a = in(0);
      const std::size_t r = rows_of(a), c = cols_of(a);
      if (n.a0 == 1) {
        Tensor out = matrix_like(r, 1);
        for (std::size_t rr = 0; rr < r; ++rr) out[rr] = log_sum_exp(a.row(rr));
        n.value = std::move(out);
      } else {
        Tensor out = matrix_like(1, c);
        std::vector<double> col(r);
        for (std::size_t cc = 0; cc < c; ++cc) {
          for (std::size_t rr = 0; rr < r; ++rr) col[rr] = a.at(rr, cc);
          out[cc] = log_sum_exp(col);
        }
        n.value = std::move(out);
      }
      break;
    }
    case Op::kRowSum: {
      const Tensor& a = in(0);
      Tensor out = matrix_like(rows_of(a), 1);
      for (std::size_t rr = 0; rr < rows_of(a); ++rr) {
        double s = 0.0;
        for (double v : a.row(rr)) s += v;
        out[rr] = s;
      }
      n.value = std::move(out);
      break;
    }
    case Op::kSum:
    case Op::kMean: {
      const Tensor& a = in(0);
      double s = 0.0;
      for (double v : a.values()) s += v;
      if (n.op == Op::kMean) {
        if (a.size() == 0) throw GraphError(i, "mean of empty tensor");
        s /= static_cast<double>(a.size());
      }
      n.value = Tensor::scalar(s);
      break;
    }
    case Op::kBatchNorm: {
      const Tensor& x = in(0);
      const std::size_t r = rows_of(x), c = cols_of(x);
      Parameter& gamma = *n.bn[0];
      Parameter& beta = *n.bn[1];
      Parameter& rmean = *n.bn[2];
      Parameter& rvar = *n.bn[3];
      if (gamma.value.size() != c || beta.value.size() != c || rmean.value.size() != c ||
          rvar.value.size() != c)
        mismatch(x, gamma.value);
      std::vector<double> mu(c, 0.0), var(c, 0.0);
      if (n.bn_mode == BatchNormMode::kTrain) {
        if (r < 2) throw GraphError(i, "batch_norm: training mode needs at least 2 rows");
        for (std::size_t rr = 0; rr < r; ++rr)
          for (std::size_t cc = 0; cc < c; ++cc) mu[cc] += x.at(rr, cc);
        for (auto& m : mu) m /= static_cast<double>(r);
        for (std::size_t rr = 0; rr < r; ++rr)
          for (std::size_t cc = 0; cc < c; ++cc) {
            const double d = x.at(rr, cc) - mu[cc];
            var[cc] += d * d;
          }
        for (auto& v : var) v /= static_cast<double>(r);
        const double unbias = static_cast<double>(r) / static_cast<double>(r - 1);
        for (std::size_t cc = 0; cc < c; ++cc) {
          rmean.value[cc] = kBatchNormMomentum * rmean.value[cc] + (1 - kBatchNormMomentum) * mu[cc];
          rvar.value[cc] =
              kBatchNormMomentum * rvar.value[cc] + (1 - kBatchNormMomentum) * var[cc] * unbias;
        }
      } else {
        for (std::size_t cc = 0; cc < c; ++cc) {
          mu[cc] = rmean.value[cc];
          var[cc] = rvar.value[cc];
        }
      }
      n.inv_std.assign(c, 0.0);
      for (std::size_t cc = 0; cc < c; ++cc) n.inv_std[cc] = 1.0 / std::sqrt(var[cc] + kBatchNormEps);
      n.aux = matrix_like(r, c);
      Tensor out = matrix_like(r, c);
      for (std::size_t rr = 0; rr < r; ++rr)
        for (std::size_t cc = 0; cc < c; ++cc) {
          const double xh = (x.at(rr, cc) - mu[cc]) * n.inv_std[cc];
          n.aux.at(rr, cc) = xh;
          out.at(rr, cc) = gamma.value[cc] * xh + beta.value[cc];
        }
      n.value = std::move(out);
      break;
    }
    case Op::kConcat: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      if (rows_of(a) != rows_of(b)) mismatch(a, b);
      const std::size_t r = rows_of(a), ca = cols_of(a), cb = cols_of(b);
      Tensor out = matrix_like(r, ca + cb);
      for (std::size_t rr = 0; rr < r; ++rr) {
        std::copy(a.row(rr).begin(), a.row(rr).end(), out.row(rr).begin());
        std::copy(b.row(rr).begin(), b.row(rr).end(), out.row(rr).begin() + ca);
      }
      n.value = std::move(out);
      break;
    }
    case Op::kSlice: {
      const Tensor& a = in(0);
      if (n.a1 > cols_of(a))
        throw GraphError(i, "slice: range exceeds " + a.shape_string());
      const std::size_t r = rows_of(a), w = n.a1 - n.a0;
      Tensor out = matrix_like(r, w);
      for (std::size_t rr = 0; rr < r; ++rr)
        for (std::size_t cc = 0; cc < w; ++cc) out.at(rr, cc) = a.at(rr, n.a0 + cc);
      n.value = std::move(out);
      break;
    }
    case Op::kRepeatRows: {
      const Tensor& a = in(0);
      const std::size_t r = rows_of(a), c = cols_of(a), t = n.a0;
      Tensor out = matrix_like(r * t, c);
      for (std::size_t rr = 0; rr < r; ++rr)
        for (std::size_t k = 0; k < t; ++k)
          std::copy(a.row(rr).begin(), a.row(rr).end(), out.row(rr * t + k).begin());
      n.value = std::move(out);
      break;
    }
    case Op::kReshape: {
      const Tensor& a = in(0);
      if (n.a0 * n.a1 != a.size())
        throw GraphError(i, "reshape: cannot view " + a.shape_string() + " as " +
                                std::to_string(n.a0) + "x" + std::to_string(n.a1));
      n.value = a.reshaped({n.a0, n.a1});
      break;
    }
    case Op::kInput:
    case Op::kParameter:
    case Op::kConstant:
      break;
  }
}

// ---------------------------------------------------------------------------
// backward

void Graph::backward(NodeId output) {
  check(output);
  if (!forward_done_) throw GraphError(output.index, "backward called before forward");
  if (nodes_[output.index].value.size() != 1)
    throw GraphError(output.index, "backward needs a scalar output, got " +
                                       nodes_[output.index].value.shape_string());
  for (auto& n : nodes_) n.grad = Tensor(n.value.shape(), 0.0);
  nodes_[output.index].grad[0] = 1.0;
  backward_order_.clear();
  for (std::size_t i = output.index + 1; i-- > 0;) {
    backward_order_.push_back(i);
    backprop_node(i);
  }
}

void Graph::backprop_node(std::size_t i) {
  Node& n = nodes_[i];
  const Tensor& g = n.grad;
  auto gin = [&](std::size_t k) -> Tensor& { return nodes_[n.in[k]].grad; };
  auto vin = [&](std::size_t k) -> const Tensor& { return nodes_[n.in[k]].value; };
  auto unary = [&](auto dfn) {
    Tensor& ga = gin(0);
    const Tensor& a = vin(0);
    for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * dfn(a[k], n.value[k]);
  };

  switch (n.op) {
    case Op::kInput:
    case Op::kConstant:
    case Op::kHeaviside:
    case Op::kStopGradient:
      break;
    case Op::kParameter: {
      Tensor& pg = n.param->grad;
      for (std::size_t k = 0; k < g.size(); ++k) pg[k] += g[k];
      break;
    }
    case Op::kMatMul:
    case Op::kAffine: {
      const Tensor& a = vin(0);
      const Tensor& w = vin(1);
      Tensor& ga = gin(0);
      Tensor& gw = gin(1);
      const std::size_t r = rows_of(a), inner = cols_of(a), c = cols_of(w);
      for (std::size_t rr = 0; rr < r; ++rr) {
        const double* grow = g.data() + rr * c;
        const double* arow = a.data() + rr * inner;
        double* garow = ga.data() + rr * inner;
        for (std::size_t k = 0; k < inner; ++k) {
          const double* wrow = w.data() + k * c;
          double* gwrow = gw.data() + k * c;
          double acc = 0.0;
          const double av = arow[k];
          for (std::size_t cc = 0; cc < c; ++cc) {
            acc += grow[cc] * wrow[cc];
            gwrow[cc] += av * grow[cc];
          }
          garow[k] += acc;
        }
      }
      if (n.op == Op::kAffine) {
        Tensor& gb = gin(2);
        for (std::size_t rr = 0; rr < r; ++rr)
          for (std::size_t cc = 0; cc < c; ++cc) gb[cc] += g.at(rr, cc);
      }
      break;
    }
    case Op::kAddRow: {
      Tensor& ga = gin(0);
      Tensor& gb = gin(1);
      const std::size_t c = g.cols();
      for (std::size_t k = 0; k < g.size(); ++k) {
        ga[k] += g[k];
        gb[k % c] += g[k];
      }
      break;
    }
    case Op::kAdd:
    case Op::kSub: {
      const double sign = n.op == Op::kAdd ? 1.0 : -1.0;
      Tensor& ga = gin(0);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k];
      Tensor& gb = gin(1);
      for (std::size_t k = 0; k < g.size(); ++k) gb[k] += sign * g[k];
      break;
    }
    case Op::kMul: {
      const Tensor& a = vin(0);
      const Tensor& b = vin(1);
      Tensor& ga = gin(0);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * b[k];
      Tensor& gb = gin(1);
      for (std::size_t k = 0; k < g.size(); ++k) gb[k] += g[k] * a[k];
      break;
    }
    case Op::kScale: unary([c = n.scalar](double, double) { return c; }); break;
    case Op::kAddScalar: unary([](double, double) { return 1.0; }); break;
    case Op::kSigmoid: unary([](double, double y) { return y * (1.0 - y); }); break;
    case Op::kTanh: unary([](double, double y) { return 1.0 - y * y; }); break;
    case Op::kLog: unary([](double x, double) { return 1.0 / x; }); break;
    case Op::kExp: unary([](double, double y) { return y; }); break;
    case Op::kSoftplus: unary([](double x, double) { return gumbolt::sigmoid(x); }); break;
    case Op::kLogSumExp: {
      const Tensor& a = vin(0);
      Tensor& ga = gin(0);
      const std::size_t r = rows_of(a), c = cols_of(a);
      for (std::size_t rr = 0; rr < r; ++rr)
        for (std::size_t cc = 0; cc < c; ++cc) {
          const std::size_t o = n.a0 == 1 ? rr : cc;
          ga.at(rr, cc) += g[o] * std::exp(a.at(rr, cc) - n.value[o]);
        }
      break;
    }
    case Op::kRowSum: {
      Tensor& ga = gin(0);
      const std::size_t c = ga.cols();
      for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += g[k / c];
      break;
    }
    case Op::kSum:
    case Op::kMean: {
      Tensor& ga = gin(0);
      const double d = n.op == Op::kMean ? g[0] / static_cast<double>(ga.size()) : g[0];
      for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += d;
      break;
    }
    case Op::kBatchNorm: {
      Tensor& gx = gin(0);
      Parameter& gamma = *n.bn[0];
      Parameter& beta = *n.bn[1];
      const std::size_t r = g.rows(), c = g.cols();
      for (std::size_t cc = 0; cc < c; ++cc) {
        double sum_g = 0.0, sum_gx = 0.0;
        for (std::size_t rr = 0; rr < r; ++rr) {
          sum_g += g.at(rr, cc);
          sum_gx += g.at(rr, cc) * n.aux.at(rr, cc);
        }
        if (gamma.trainable) gamma.grad[cc] += sum_gx;
        if (beta.trainable) beta.grad[cc] += sum_g;
        const double gam = gamma.value[cc];
        const double is = n.inv_std[cc];
        if (n.bn_mode == BatchNormMode::kTrain) {
          const double inv_r = 1.0 / static_cast<double>(r);
          for (std::size_t rr = 0; rr < r; ++rr) {
            const double xh = n.aux.at(rr, cc);
            gx.at(rr, cc) += gam * is * (g.at(rr, cc) - inv_r * sum_g - xh * inv_r * sum_gx);
          }
        } else {
          for (std::size_t rr = 0; rr < r; ++rr) gx.at(rr, cc) += gam * is * g.at(rr, cc);
        }
      }
      break;
    }
    case Op::kConcat: {
      Tensor& ga = gin(0);
      Tensor& gb = gin(1);
      const std::size_t ca = ga.cols(), cb = gb.cols();
      for (std::size_t rr = 0; rr < g.rows(); ++rr) {
        for (std::size_t cc = 0; cc < ca; ++cc) ga.at(rr, cc) += g.at(rr, cc);
        for (std::size_t cc = 0; cc < cb; ++cc) gb.at(rr, cc) += g.at(rr, ca + cc);
      }
      break;
    }
    case Op::kSlice: {
      Tensor& ga = gin(0);
      for (std::size_t rr = 0; rr < g.rows(); ++rr)
        for (std::size_t cc = 0; cc < g.cols(); ++cc) ga.at(rr, n.a0 + cc) += g.at(rr, cc);
      break;
    }
    case Op::kRepeatRows: {
      Tensor& ga = gin(0);
      const std::size_t c = ga.cols(), t = n.a0;
      for (std::size_t rr = 0; rr < ga.rows(); ++rr)
        for (std::size_t k = 0; k < t; ++k)
          for (std::size_t cc = 0; cc < c; ++cc) ga.at(rr, cc) += g.at(rr * t + k, cc);
      break;
    }
    case Op::kReshape: {
      Tensor& ga = gin(0);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k];
      break;
    }
  }
}

// ---------------------------------------------------------------------------

namespace {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
}

}  // namespace

double grad_check(const DifferentiableFn& f, std::vector<double> point, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("grad_check: step must be positive");
  std::vector<double> analytic(point.size(), 0.0);
  const double f0 = f(point, analytic);
  if (!std::isfinite(f0)) throw std::domain_error("grad_check: non-finite function value");
  double worst = 0.0;
  std::span<double> none;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double orig = point[i];
    point[i] = orig + step;
    const double fp = f(point, none);
    point[i] = orig - step;
    const double fm = f(point, none);
    point[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw std::domain_error("grad_check: non-finite function value at coordinate " +
                              std::to_string(i));
    worst = std::max(worst, relative_error(analytic[i], (fp - fm) / (2.0 * step)));
  }
  return worst;
}

double grad_check_graph(Graph& graph, NodeId output, const std::map<std::string, Tensor>& inputs,
                        std::span<Parameter* const> params, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("grad_check: step must be positive");
  for (Parameter* p : params) p->grad.fill(0.0);
  graph.forward(inputs);
  graph.backward(output);
  std::vector<Tensor> analytic;
  for (Parameter* p : params) analytic.push_back(p->grad);
  double worst = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double orig = p.value[k];
      p.value[k] = orig + step;
      graph.forward(inputs);
      const double fp = graph.value(output)[0];
      p.value[k] = orig - step;
      graph.forward(inputs);
      const double fm = graph.value(output)[0];
      p.value[k] = orig;
      worst = std::max(worst, relative_error(analytic[pi][k], (fp - fm) / (2.0 * step)));
    }
  }
  return worst;
}

}  // namespace gumbolt
