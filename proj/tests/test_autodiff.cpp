#include <cmath>
#include <random>

#include "doctest.h"
#include "entropg/autodiff.hpp"
#include "entropg/models.hpp"
#include "entropg/util.hpp"

using namespace entropg;
using diff::Parameter;
using diff::Tape;
using diff::Tensor;
namespace ops = diff::ops;

namespace {

Parameter random_param(const std::string& name, std::vector<int> shape,
                       std::mt19937_64& rng, double scale = 1.0) {
  std::size_t n = 1;
  for (int e : shape) n *= static_cast<std::size_t>(e);
  diff::Values v(n);
  for (double& x : v) x = scale * (2.0 * util::uniform01(rng) - 1.0);
  return Parameter(name, std::move(v), std::move(shape));
}

}  // namespace

TEST_CASE("softmax of equal logits is uniform") {
  Tensor y = ops::softmax(Tensor::constant({0.0, 0.0, 0.0}));
  for (int i = 0; i < 3; ++i) CHECK(y[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  double total = 0.0;
  for (int i = 0; i < 3; ++i) total += y[i];
  CHECK(std::abs(total - 1.0) < 1e-12);
}

TEST_CASE("log_softmax equals log of softmax") {
  auto rng = util::make_rng(7, 1);
  for (int rep = 0; rep < 20; ++rep) {
    diff::Values z(5);
    for (double& v : z) v = 6.0 * (util::uniform01(rng) - 0.5);
    Tensor zt = Tensor::constant(z);
    Tensor p = ops::softmax(zt);
    Tensor lp = ops::log_softmax(zt);
    for (int i = 0; i < 5; ++i) CHECK(std::abs(lp[i] - std::log(p[i])) < 1e-12);
  }
}

TEST_CASE("linear with identity weights reproduces the input") {
  diff::Values eye(9, 0.0);
  eye[0] = eye[4] = eye[8] = 1.0;
  Tensor x = Tensor::constant({1.5, -2.0, 0.25});
  Tensor y = ops::linear(x, Tensor::constant(eye, {3, 3}), Tensor::zeros({3}));
  for (int i = 0; i < 3; ++i) CHECK(y[i] == x[i]);
}

TEST_CASE("shape mismatches and empty vectors are rejected") {
  Tensor x = Tensor::constant({1.0, 2.0});
  CHECK_THROWS_AS(ops::add(x, Tensor::constant({1.0, 2.0, 3.0})), std::invalid_argument);
  CHECK_THROWS_AS(ops::linear(x, Tensor::constant({1.0, 2.0, 3.0}, {1, 3}), Tensor::zeros({1})),
                  std::invalid_argument);
  CHECK_THROWS_AS(Tensor::constant({}, {0}), std::invalid_argument);
}

TEST_CASE("backward of sum(W x) leaves the outer-product structure in grad W") {
  auto rng = util::make_rng(3, 2);
  Parameter w = random_param("w", {4, 3}, rng);
  const diff::Values x = {0.5, -1.0, 2.0};
  Tape tape;
  Tensor y = ops::sum(ops::linear(Tensor::constant(x), w.use(tape), Tensor::zeros({4})));
  tape.backward(y);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 3; ++c)
      CHECK(w.grad()[static_cast<std::size_t>(r * 3 + c)] ==
            doctest::Approx(x[static_cast<std::size_t>(c)]).epsilon(1e-14));
}

TEST_CASE("grad of log_softmax at index k is onehot(k) minus softmax") {
  auto rng = util::make_rng(11, 3);
  Parameter z = random_param("z", {4}, rng, 2.0);
  const int k = 2;
  Tape tape;
  Tensor zt = z.use(tape);
  Tensor root = ops::index(ops::log_softmax(zt), k);
  tape.backward(root);
  Tensor p = ops::softmax(Tensor::constant(z.values()));
  for (int i = 0; i < 4; ++i) {
    const double expected = (i == k ? 1.0 : 0.0) - p[i];
    CHECK(z.grad()[static_cast<std::size_t>(i)] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("two-layer ffn gradient matches central finite differences") {
  auto rng = util::make_rng(19, 4);
  policy::Ffn net("net", 3, {5, 4}, 1, rng);
  auto params = net.parameters();
  const diff::Values input = {0.3, -0.8, 1.2};
  auto f = [&](Tape& tape) { return net.forward(tape, Tensor::constant(input)); };
  auto result = diff::grad_check(params, f, 1e-6);
  REQUIRE(result.ok);
  CHECK(result.max_rel_error < 1e-5);
}

TEST_CASE("grad_check basics") {
  auto rng = util::make_rng(23, 5);

  SUBCASE("constant function has zero error") {
    Parameter p = random_param("p", {3}, rng);
    Parameter* params[] = {&p};
    auto f = [](Tape&) { return Tensor::scalar(4.5); };
    auto result = diff::grad_check(params, f, 1e-5);
    REQUIRE(result.ok);
    CHECK(result.max_rel_error == 0.0);
  }

  SUBCASE("quadratic is exact for central differences") {
    Parameter p("p", {0.7}, {1});
    Parameter* params[] = {&p};
    auto f = [&](Tape& tape) {
      Tensor t = p.use(tape);
      return ops::dot(t, t);
    };
    auto result = diff::grad_check(params, f, 1e-5);
    REQUIRE(result.ok);
    CHECK(result.max_rel_error < 1e-8);
  }

  SUBCASE("eps outside (0, 1e-3] is rejected") {
    Parameter p("p", {0.7}, {1});
    Parameter* params[] = {&p};
    auto f = [&](Tape& tape) { return p.use(tape); };
    CHECK_THROWS_AS(diff::grad_check(params, f, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(diff::grad_check(params, f, 0.01), std::invalid_argument);
  }

  SUBCASE("non-finite intermediates name the offending parameter") {
    Parameter p("culprit", {1e-7}, {1});
    Parameter* params[] = {&p};
    auto f = [&](Tape& tape) {
      // log(x) blows up once the perturbation crosses zero
      Tensor t = p.use(tape);
      return ops::log_clamped(t, 0.0);
    };
    auto result = diff::grad_check(params, f, 1e-5);
    CHECK_FALSE(result.ok);
    CHECK(result.message.find("culprit") != std::string::npos);
  }
}

TEST_CASE("lstm-chain log-prob passes the finite-difference check") {
  policy::LSTMPolicy model(policy::ActionSpace(3, 3), 2, 4, 99);
  const diff::Values state = {0.4, -0.6};
  const policy::Action action = {2, 0, 1};
  auto params = model.parameters();
  auto f = [&](Tape& tape) { return policy::log_prob(model, tape, state, action); };
  auto result = diff::grad_check(params, f, 1e-5);
  REQUIRE(result.ok);
  CHECK(result.max_rel_error < 1e-5);
}

TEST_CASE("every primitive op matches finite differences on random inputs") {
  auto rng = util::make_rng(31, 6);

  struct OpCase {
    const char* name;
    std::function<Tensor(Tape&, Parameter&, Parameter&)> build;
  };
  // Each case reduces to a scalar via dot with fixed weights so every output
  // element contributes to the gradient.
  const diff::Values mix = {0.37, -1.21, 0.55, 0.9};
  auto reduce = [&mix](const Tensor& t) {
    diff::Values w(t.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = mix[i % mix.size()];
    return ops::dot(t, Tensor::constant(w, t.shape()));
  };

  const OpCase cases[] = {
      {"tanh", [&](Tape& t, Parameter& a, Parameter&) { return reduce(ops::tanh(a.use(t))); }},
      {"sigmoid",
       [&](Tape& t, Parameter& a, Parameter&) { return reduce(ops::sigmoid(a.use(t))); }},
      {"relu", [&](Tape& t, Parameter& a, Parameter&) { return reduce(ops::relu(a.use(t))); }},
      {"exp", [&](Tape& t, Parameter& a, Parameter&) { return reduce(ops::exp(a.use(t))); }},
      {"softmax",
       [&](Tape& t, Parameter& a, Parameter&) { return reduce(ops::softmax(a.use(t))); }},
      {"log_softmax",
       [&](Tape& t, Parameter& a, Parameter&) { return reduce(ops::log_softmax(a.use(t))); }},
      {"add",
       [&](Tape& t, Parameter& a, Parameter& b) { return reduce(ops::add(a.use(t), b.use(t))); }},
      {"sub",
       [&](Tape& t, Parameter& a, Parameter& b) { return reduce(ops::sub(a.use(t), b.use(t))); }},
      {"mul",
       [&](Tape& t, Parameter& a, Parameter& b) { return reduce(ops::mul(a.use(t), b.use(t))); }},
      {"scale",
       [&](Tape& t, Parameter& a, Parameter&) { return reduce(ops::scale(a.use(t), -2.5)); }},
      {"sum", [&](Tape& t, Parameter& a, Parameter&) { return ops::sum(a.use(t)); }},
      {"dot",
       [&](Tape& t, Parameter& a, Parameter& b) { return ops::dot(a.use(t), b.use(t)); }},
      {"concat",
       [&](Tape& t, Parameter& a, Parameter& b) {
         return reduce(ops::concat(a.use(t), b.use(t)));
       }},
      {"index", [&](Tape& t, Parameter& a, Parameter&) { return ops::index(a.use(t), 2); }},
      {"slice",
       [&](Tape& t, Parameter& a, Parameter&) { return reduce(ops::slice(a.use(t), 1, 2)); }},
  };

  for (const auto& c : cases) {
    CAPTURE(c.name);
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
      Parameter a = random_param("a", {4}, rng, 1.5);
      Parameter b = random_param("b", {4}, rng, 1.5);
      // keep relu inputs away from the kink
      if (std::string(c.name) == "relu")
        for (double& v : a.values())
          if (std::abs(v) < 1e-3) v += 0.1;
      Parameter* params[] = {&a, &b};
      auto f = [&](Tape& tape) { return c.build(tape, a, b); };
      auto result = diff::grad_check(params, f, 1e-6);
      REQUIRE(result.ok);
      worst = std::max(worst, result.max_rel_error);
    }
    CHECK(worst < 1e-5);
  }

  SUBCASE("matrix ops: linear and index_row") {
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
      Parameter w = random_param("w", {3, 4}, rng);
      Parameter x = random_param("x", {4}, rng);
      Parameter* params[] = {&w, &x};
      auto f = [&](Tape& tape) {
        Tensor y = ops::linear(x.use(tape), w.use(tape), Tensor::zeros({3}));
        return ops::add(ops::index(y, 1), ops::index(ops::index_row(w.use(tape), 2), 3));
      };
      auto result = diff::grad_check(params, f, 1e-6);
      REQUIRE(result.ok);
      worst = std::max(worst, result.max_rel_error);
    }
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("gradient accumulation is linear") {
  auto rng = util::make_rng(41, 7);
  Parameter p = random_param("p", {3}, rng);

  auto grad_of = [&](bool both) {
    p.zero_grad();
    Tape tape;
    Tensor t = p.use(tape);
    Tensor a = ops::dot(t, Tensor::constant({1.0, 2.0, 3.0}));
    Tensor b = ops::dot(ops::tanh(t), Tensor::constant({-1.0, 0.5, 0.25}));
    tape.backward(both ? ops::add(a, b) : a);
    diff::Values g = p.grad();
    if (!both) {
      p.zero_grad();
      Tape tape2;
      Tensor t2 = p.use(tape2);
      Tensor b2 = ops::dot(ops::tanh(t2), Tensor::constant({-1.0, 0.5, 0.25}));
      tape2.backward(b2);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += p.grad()[i];
    }
    return g;
  };

  const diff::Values sum_grad = grad_of(true);
  const diff::Values parts_grad = grad_of(false);
  for (std::size_t i = 0; i < sum_grad.size(); ++i)
    CHECK(sum_grad[i] == doctest::Approx(parts_grad[i]).epsilon(1e-12));
}

TEST_CASE("replaying the same tape twice accumulates exactly twice the gradient") {
  auto rng = util::make_rng(43, 8);
  Parameter p = random_param("p", {4}, rng);
  p.zero_grad();
  Tape tape;
  Tensor root = ops::sum(ops::tanh(p.use(tape)));
  tape.backward(root);
  const diff::Values once = p.grad();
  tape.backward(root);
  for (std::size_t i = 0; i < once.size(); ++i)
    CHECK(p.grad()[i] == doctest::Approx(2.0 * once[i]).epsilon(1e-14));
}

TEST_CASE("backward rejects bad roots") {
  Tape tape;
  Tensor vec = tape.record({1.0, 2.0}, {2}, nullptr);
  CHECK_THROWS_AS(tape.backward(vec), std::invalid_argument);
  Tape other;
  Tensor scalar = other.record({1.0}, {1}, nullptr);
  CHECK_THROWS_AS(tape.backward(scalar), std::invalid_argument);
  CHECK_THROWS_AS(tape.backward(Tensor::scalar(1.0)), std::invalid_argument);
}

TEST_CASE("forward ops keep values finite on finite inputs") {
  auto rng = util::make_rng(47, 9);
  for (int rep = 0; rep < 50; ++rep) {
    diff::Values z(6);
    for (double& v : z) v = 600.0 * (util::uniform01(rng) - 0.5);
    Tensor p = ops::softmax(Tensor::constant(z));
    Tensor lp = ops::log_softmax(Tensor::constant(z));
    double total = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      CHECK(std::isfinite(p[i]));
      CHECK(std::isfinite(lp[i]));
      CHECK(p[i] > 0.0);
      total += p[i];
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
}
