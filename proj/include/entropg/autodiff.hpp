#ifndef ENTROPG_AUTODIFF_HPP
#define ENTROPG_AUTODIFF_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace entropg::diff {

class Tape;
class Parameter;

using Values = std::vector<double>;
using ValuesPtr = std::shared_ptr<const Values>;

/// Dense row-major array of 64-bit reals, optionally recorded on a Tape.
/// Copying a Tensor is cheap: values are shared, not duplicated.
class Tensor {
 public:
  Tensor() = default;

  /// Tensor that is constant with respect to every tape.
  static Tensor constant(Values values, std::vector<int> shape = {});
  static Tensor scalar(double v);
  static Tensor zeros(std::vector<int> shape);

  const std::vector<int>& shape() const { return shape_; }
  std::size_t size() const { return values_ ? values_->size() : 0; }
  const Values& values() const { return *values_; }
  const ValuesPtr& values_ptr() const { return values_; }
  double operator[](std::size_t i) const { return (*values_)[i]; }

  /// Value of a scalar tensor; throws if not scalar.
  double value() const;

  bool defined() const { return values_ != nullptr; }
  bool on_tape() const { return node_ >= 0; }
  int node() const { return node_; }
  Tape* tape() const { return tape_; }

  bool is_scalar() const { return size() == 1 && shape_.size() <= 1; }
  bool is_vector() const { return shape_.size() == 1; }
  bool is_matrix() const { return shape_.size() == 2; }
  int rows() const;
  int cols() const;

 private:
  friend class Tape;
  friend class Parameter;
  std::vector<int> shape_;
  ValuesPtr values_;
  Tape* tape_ = nullptr;
  int node_ = -1;
};

/// Reverse-mode tape. Nodes are appended in forward order (so every node's
/// parents precede it) and backward() walks them once in reverse. Leaf nodes
/// created by Parameter::use have their gradients added into the parameter
/// accumulators at the end of the sweep.
class Tape {
 public:
  /// Receives this node's output gradient and accumulates into parents via
  /// Tape::grad.
  using BackwardFn = std::function<void(Tape&, const double* out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor record(Values values, std::vector<int> shape, BackwardFn fn);

  /// Seeds d(root)/d(root) = 1, sweeps the tape once in reverse topological
  /// order, then accumulates (+=) leaf gradients into their Parameters.
  /// Node gradients are cleared afterwards, so calling backward on the same
  /// root twice accumulates exactly twice the gradient.
  void backward(const Tensor& root);

  /// Mutable gradient buffer of a node, zero-initialised on first access.
  double* grad(int node);

  std::size_t num_nodes() const { return nodes_.size(); }

  /// Generation stamp, unique across every Tape instance and reset() call in
  /// the process, so cached parameter leaves can never outlive their tape.
  std::uint64_t epoch() const { return epoch_; }

  /// Drops every node and invalidates cached parameter leaves. Capacity is
  /// retained so a reset tape can be reused cheaply in sampling loops.
  void reset();

 private:
  friend class Parameter;
  struct Node {
    std::size_t size = 0;
    Values grad;  // empty until first touched during a sweep
    BackwardFn backward_fn;
  };
  int add_leaf(std::size_t size, Parameter* owner);
  static std::uint64_t next_epoch();

  std::vector<Node> nodes_;
  std::vector<std::pair<Parameter*, int>> leaves_;
  std::uint64_t epoch_ = next_epoch();
};

/// Named trainable array with a gradient accumulator that is only ever
/// cleared by an explicit zero_grad() call.
class Parameter {
 public:
  Parameter(std::string name, Values values, std::vector<int> shape);

  const std::string& name() const { return name_; }
  const std::vector<int>& shape() const { return shape_; }
  std::size_t size() const { return values_->size(); }
  Values& values() { return *values_; }
  const Values& values() const { return *values_; }
  Values& grad() { return grad_; }
  const Values& grad() const { return grad_; }
  void zero_grad();

  /// Leaf tensor for this parameter on `tape`. Cached per tape generation so
  /// repeated uses within one forward pass share a single node.
  Tensor use(Tape& tape);

 private:
  std::string name_;
  std::shared_ptr<Values> values_;
  std::vector<int> shape_;
  Values grad_;
  Tape* cached_tape_ = nullptr;
  std::uint64_t cached_epoch_ = 0;
  Tensor cached_leaf_;
};

/// Thrown when a forward pass produces non-finite values.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace ops {

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor exp(const Tensor& x);
/// log(max(x, floor)) elementwise; the floor keeps probabilities away from
/// -inf. Gradient is 1/x above the floor and 0 below it.
Tensor log_clamped(const Tensor& x, double floor = 1e-12);
Tensor softmax(const Tensor& x);
Tensor log_softmax(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor sum(const Tensor& x);
Tensor dot(const Tensor& a, const Tensor& b);
Tensor concat(std::span<const Tensor> parts);
Tensor concat(const Tensor& a, const Tensor& b);
Tensor index(const Tensor& v, int i);
Tensor index_row(const Tensor& m, int r);
Tensor slice(const Tensor& v, int begin, int len);
/// Same values, detached from any tape (no gradient flows through).
Tensor detach(const Tensor& x);

}  // namespace ops

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  bool ok = true;       // false if a non-finite intermediate appeared
  std::string message;  // names the offending parameter on failure
};

/// Compares tape gradients of the scalar built by `f` against central finite
/// differences over every element of `params`. Relative error is
/// |analytic - numeric| / max(1, |numeric|).
GradCheckResult grad_check(std::span<Parameter* const> params,
                           const std::function<Tensor(Tape&)>& f,
                           double eps = 1e-5);

}  // namespace entropg::diff

#endif
