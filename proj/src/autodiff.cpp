#include "entropg/autodiff.hpp"

#include <atomic>
#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace entropg::diff {

namespace {

std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int e : shape) {
    if (e <= 0) throw std::invalid_argument("tensor shape extents must be positive");
    n *= static_cast<std::size_t>(e);
  }
  return n;
}

}  // namespace

Tensor Tensor::constant(Values values, std::vector<int> shape) {
  if (shape.empty()) shape = {static_cast<int>(values.size())};
  if (shape_numel(shape) != values.size())
    throw std::invalid_argument("tensor shape does not match value count");
  Tensor t;
  t.shape_ = std::move(shape);
  t.values_ = std::make_shared<const Values>(std::move(values));
  return t;
}

Tensor Tensor::scalar(double v) { return constant({v}, {1}); }

Tensor Tensor::zeros(std::vector<int> shape) {
  const std::size_t n = shape_numel(shape);
  return constant(Values(n, 0.0), std::move(shape));
}

double Tensor::value() const {
  if (!is_scalar()) throw std::invalid_argument("Tensor::value requires a scalar");
  return (*values_)[0];
}

int Tensor::rows() const {
  if (shape_.size() == 2) return shape_[0];
  if (shape_.size() == 1) return shape_[0];
  throw std::invalid_argument("rows() on tensor without row extent");
}

int Tensor::cols() const {
  if (shape_.size() != 2) throw std::invalid_argument("cols() on non-matrix tensor");
  return shape_[1];
}

Tensor Tape::record(Values values, std::vector<int> shape, BackwardFn fn) {
  if (shape.empty()) shape = {static_cast<int>(values.size())};
  if (shape_numel(shape) != values.size())
    throw std::invalid_argument("tensor shape does not match value count");
  Tensor t;
  t.shape_ = std::move(shape);
  const std::size_t n = values.size();
  t.values_ = std::make_shared<const Values>(std::move(values));
  t.tape_ = this;
  t.node_ = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{n, {}, std::move(fn)});
  return t;
}

int Tape::add_leaf(std::size_t size, Parameter* owner) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{size, {}, nullptr});
  leaves_.emplace_back(owner, id);
  return id;
}

double* Tape::grad(int node) {
  Node& n = nodes_.at(static_cast<std::size_t>(node));
  if (n.grad.empty()) n.grad.assign(n.size, 0.0);
  return n.grad.data();
}

void Tape::backward(const Tensor& root) {
  if (!root.is_scalar()) throw std::invalid_argument("backward root must be a scalar");
  if (root.tape() != this || !root.on_tape())
    throw std::invalid_argument("backward root is not on this tape");

  grad(root.node())[0] = 1.0;
  for (int id = root.node(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.empty()) continue;  // does not influence the root
    if (n.backward_fn) n.backward_fn(*this, n.grad.data());
  }
  for (auto& [param, id] : leaves_) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.empty()) continue;
    Values& acc = param->grad();
    for (std::size_t i = 0; i < n.size; ++i) acc[i] += n.grad[i];
  }
  for (Node& n : nodes_) n.grad.clear();
}

std::uint64_t Tape::next_epoch() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

void Tape::reset() {
  nodes_.clear();
  leaves_.clear();
  epoch_ = next_epoch();
}

Parameter::Parameter(std::string name, Values values, std::vector<int> shape)
    : name_(std::move(name)),
      values_(std::make_shared<Values>(std::move(values))),
      shape_(std::move(shape)),
      grad_(values_->size(), 0.0) {
  if (shape_numel(shape_) != values_->size())
    throw std::invalid_argument("parameter shape does not match value count");
}

void Parameter::zero_grad() { grad_.assign(grad_.size(), 0.0); }

Tensor Parameter::use(Tape& tape) {
  if (cached_tape_ == &tape && cached_epoch_ == tape.epoch()) return cached_leaf_;
  Tensor t;
  t.shape_ = shape_;
  t.values_ = values_;  // shared, not copied
  t.tape_ = &tape;
  t.node_ = tape.add_leaf(values_->size(), this);
  cached_tape_ = &tape;
  cached_epoch_ = tape.epoch();
  cached_leaf_ = t;
  return t;
}

GradCheckResult grad_check(std::span<Parameter* const> params,
                           const std::function<Tensor(Tape&)>& f, double eps) {
  if (!(eps > 0.0 && eps <= 1e-3))
    throw std::invalid_argument("grad_check eps must lie in (0, 1e-3]");

  GradCheckResult result;

  std::vector<Values> saved_grads;
  saved_grads.reserve(params.size());
  for (Parameter* p : params) {
    saved_grads.push_back(p->grad());
    p->zero_grad();
  }

  std::vector<Values> analytic;
  {
    Tape tape;
    Tensor y = f(tape);
    if (!std::isfinite(y.value())) {
      result.ok = false;
      result.message = "non-finite forward value";
      return result;
    }
    if (y.on_tape()) tape.backward(y);  // a constant root has all-zero gradients
    for (Parameter* p : params) analytic.push_back(p->grad());
  }

  auto eval = [&]() {
    Tape tape;
    return f(tape).value();
  };

  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter* p = params[pi];
    for (std::size_t i = 0; i < p->size(); ++i) {
      const double orig = p->values()[i];
      p->values()[i] = orig + eps;
      const double up = eval();
      p->values()[i] = orig - eps;
      const double down = eval();
      p->values()[i] = orig;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        result.ok = false;
        result.message = "non-finite intermediate while perturbing " + p->name();
        return result;
      }
      const double numeric = (up - down) / (2.0 * eps);
      const double rel =
          std::abs(analytic[pi][i] - numeric) / std::max(1.0, std::abs(numeric));
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_parameter = p->name();
      }
    }
  }

  for (std::size_t pi = 0; pi < params.size(); ++pi) params[pi]->grad() = saved_grads[pi];
  return result;
}

}  // namespace entropg::diff
