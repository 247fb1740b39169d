#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "entropg/checkpoint.hpp"
#include "entropg/estimators.hpp"
#include "entropg/models.hpp"
#include "entropg/run_config.hpp"
#include "entropg/softmax_table.hpp"
#include "entropg/trainer.hpp"
#include "entropg/util.hpp"
#include "entropg/verify.hpp"

namespace py = pybind11;
using namespace entropg;

namespace {

/// Python-facing wrapper that owns a model plus the scratch state needed for
/// value-level queries, hiding the tape machinery.
class PyPolicy {
 public:
  PyPolicy(std::unique_ptr<policy::PolicyModel> model) : model_(std::move(model)) {}

  static PyPolicy make(const std::string& kind, int dims, int arity, int state_dim,
                       int hidden, int layers, std::uint64_t seed) {
    return PyPolicy(policy::make_policy(kind, policy::ActionSpace(dims, arity), state_dim,
                                        hidden, layers, seed));
  }

  static PyPolicy random_table(int dims, int arity, std::uint64_t seed, double logit_scale) {
    return PyPolicy(std::make_unique<entropy::SoftmaxTable>(
        entropy::SoftmaxTable::random(dims, arity, seed, logit_scale)));
  }

  std::string kind() const { return model_->kind(); }
  int dims() const { return model_->action_space().dims; }
  int arity() const { return model_->action_space().arity; }
  int state_dim() const { return model_->state_dim(); }

  std::vector<double> conditional_dist(const std::vector<double>& state,
                                       const std::vector<int>& prefix) {
    diff::Tape tape;
    return model_->conditional_dist(tape, state, prefix).values();
  }

  py::dict sample(const std::vector<double>& state, std::uint64_t seed) {
    auto rng = util::make_rng(seed, 0x5a);
    diff::Tape tape;
    auto trace = policy::sample(*model_, tape, state, rng);
    py::dict out;
    out["action"] = trace.action;
    out["log_prob"] = policy::trace_log_prob(trace).value();
    out["crude_entropy"] = entropy::crude_entropy_value(trace);
    out["smoothed_entropy"] = entropy::smoothed_entropy_value(trace);
    std::vector<std::vector<double>> dists;
    for (const auto& d : trace.cond_dists) dists.push_back(d.values());
    out["cond_dists"] = dists;
    return out;
  }

  double log_prob(const std::vector<double>& state, const std::vector<int>& action) {
    return policy::log_prob_value(*model_, state, action);
  }

  std::vector<int> greedy(const std::vector<double>& state) {
    return policy::greedy_action(*model_, state);
  }

  std::vector<int> beam_search(const std::vector<double>& state, int beam) {
    return policy::beam_search(*model_, state, beam);
  }

  double exact_entropy(const std::vector<double>& state, std::size_t cap) {
    diff::Tape tape;
    return entropy::exact_entropy(*model_, tape, state, cap).value();
  }

  double smoothed_mode_entropy(const std::vector<double>& state, int beam) {
    diff::Tape tape;
    return entropy::smoothed_mode_entropy(*model_, tape, state, beam).value.value();
  }

  py::dict exact_entropy_gradient(const std::vector<double>& state, std::size_t cap) {
    const auto grads = entropy::exact_entropy_gradient(*model_, state, cap);
    auto params = model_->parameters();
    py::dict out;
    for (std::size_t i = 0; i < params.size(); ++i)
      out[py::str(params[i]->name())] = grads[i];
    return out;
  }

  std::uint64_t conditional_evals() const { return model_->conditional_evals(); }
  void reset_conditional_evals() { model_->reset_conditional_evals(); }

  policy::PolicyModel& model() { return *model_; }

 private:
  std::unique_ptr<policy::PolicyModel> model_;
};

py::dict eval_report_to_dict(const train::EvalReport& r) {
  py::dict out;
  out["episodes"] = r.episodes;
  out["mean_length"] = r.mean_length;
  out["std_length"] = r.std_length;
  out["mean_reward"] = r.mean_reward;
  out["std_reward"] = r.std_reward;
  out["mean_discounted_reward"] = r.mean_discounted;
  out["std_discounted_reward"] = r.std_discounted;
  out["optimal_config_pct"] = r.optimal_config_pct;
  return out;
}

py::dict suite_to_dict(const verify::SuiteResult& suite) {
  py::dict out;
  out["name"] = suite.name;
  out["pass"] = suite.pass();
  py::list rows;
  for (const auto& r : suite.rows) {
    py::dict row;
    row["estimator"] = r.estimator;
    row["d"] = r.d;
    row["k"] = r.k;
    row["trials"] = r.trials;
    row["mc_mean"] = r.mc_mean;
    row["exact"] = r.exact;
    row["std_err"] = r.std_err;
    row["pass"] = r.pass;
    row["informational"] = r.informational;
    rows.append(row);
  }
  out["rows"] = rows;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "autoregressive policies over multidimensional discrete action spaces "
            "with efficient entropy-bonus estimators";

  py::class_<PyPolicy>(m, "Policy")
      .def_static("make", &PyPolicy::make, py::arg("kind"), py::arg("dims"), py::arg("arity"),
                  py::arg("state_dim"), py::arg("hidden") = 32, py::arg("layers") = 1,
                  py::arg("seed") = 0)
      .def_static("random_table", &PyPolicy::random_table, py::arg("dims"), py::arg("arity"),
                  py::arg("seed") = 0, py::arg("logit_scale") = 1.0)
      .def_property_readonly("kind", &PyPolicy::kind)
      .def_property_readonly("dims", &PyPolicy::dims)
      .def_property_readonly("arity", &PyPolicy::arity)
      .def_property_readonly("state_dim", &PyPolicy::state_dim)
      .def("conditional_dist", &PyPolicy::conditional_dist, py::arg("state"),
           py::arg("prefix") = std::vector<int>{})
      .def("sample", &PyPolicy::sample, py::arg("state"), py::arg("seed") = 0)
      .def("log_prob", &PyPolicy::log_prob, py::arg("state"), py::arg("action"))
      .def("greedy", &PyPolicy::greedy, py::arg("state"))
      .def("beam_search", &PyPolicy::beam_search, py::arg("state"), py::arg("beam"))
      .def("exact_entropy", &PyPolicy::exact_entropy, py::arg("state"),
           py::arg("cap") = std::size_t{1000000})
      .def("smoothed_mode_entropy", &PyPolicy::smoothed_mode_entropy, py::arg("state"),
           py::arg("beam") = 1)
      .def("exact_entropy_gradient", &PyPolicy::exact_entropy_gradient, py::arg("state"),
           py::arg("cap") = std::size_t{1000000})
      .def_property_readonly("conditional_evals", &PyPolicy::conditional_evals)
      .def("reset_conditional_evals", &PyPolicy::reset_conditional_evals);

  py::class_<envs::HuntersConfig>(m, "HuntersConfig")
      .def(py::init<>())
      .def_readwrite("grid_size", &envs::HuntersConfig::grid_size)
      .def_readwrite("num_hunters", &envs::HuntersConfig::num_hunters)
      .def_readwrite("num_rabbits", &envs::HuntersConfig::num_rabbits)
      .def_readwrite("max_steps", &envs::HuntersConfig::max_steps);

  py::class_<envs::BanditConfig>(m, "BanditConfig")
      .def(py::init<>())
      .def_readwrite("agents", &envs::BanditConfig::agents)
      .def_readwrite("arms", &envs::BanditConfig::arms)
      .def_readwrite("arm_rewards", &envs::BanditConfig::arm_rewards)
      .def_readwrite("bonus_amount", &envs::BanditConfig::bonus_amount)
      .def_readwrite("bonus_prob", &envs::BanditConfig::bonus_prob)
      .def_readwrite("bonus_config", &envs::BanditConfig::bonus_config);

  struct PyEnv {
    std::unique_ptr<envs::Env> env;
    std::mt19937_64 rng;
  };
  py::class_<PyEnv>(m, "Env")
      .def_static("hunters",
                  [](const envs::HuntersConfig& cfg, std::uint64_t seed) {
                    return PyEnv{std::make_unique<envs::HuntersEnv>(cfg),
                                 util::make_rng(seed, 0xe)};
                  },
                  py::arg("config") = envs::HuntersConfig{}, py::arg("seed") = 0)
      .def_static("bandit",
                  [](const envs::BanditConfig& cfg, std::uint64_t seed) {
                    return PyEnv{std::make_unique<envs::BanditEnv>(cfg),
                                 util::make_rng(seed, 0xe)};
                  },
                  py::arg("config") = envs::BanditConfig{}, py::arg("seed") = 0)
      .def_property_readonly("kind", [](PyEnv& e) { return e.env->kind(); })
      .def_property_readonly("dims", [](PyEnv& e) { return e.env->action_space().dims; })
      .def_property_readonly("arity", [](PyEnv& e) { return e.env->action_space().arity; })
      .def_property_readonly("state_dim", [](PyEnv& e) { return e.env->state_dim(); })
      .def_property_readonly("done", [](PyEnv& e) { return e.env->done(); })
      .def_property_readonly("reset_reward", [](PyEnv& e) { return e.env->reset_reward(); })
      .def("reset", [](PyEnv& e) { return e.env->reset(e.rng); })
      .def("step", [](PyEnv& e, const std::vector<int>& action) {
        auto res = e.env->step(action);
        return py::make_tuple(res.state, res.reward, res.done);
      })
      .def("episode_info", [](PyEnv& e) { return e.env->episode_info(); });

  m.def("gaussian_smoothed_check",
        [](const std::array<double, 2>& mu, const std::array<double, 4>& cov, int samples,
           std::uint64_t seed) {
          auto report = entropy::gaussian_smoothed_check(mu, cov, samples, seed);
          py::dict out;
          out["exact_entropy"] = report.exact_entropy;
          out["max_abs_deviation"] = report.max_abs_deviation;
          out["samples"] = report.samples;
          return out;
        },
        py::arg("mu"), py::arg("cov"), py::arg("samples") = 10000, py::arg("seed") = 0);

  m.def("verify",
        [](const std::string& suite) {
          if (suite == "unbiasedness") return suite_to_dict(verify::verify_unbiasedness());
          if (suite == "gradient") return suite_to_dict(verify::verify_gradient());
          if (suite == "theorem2") return suite_to_dict(verify::verify_gaussian_closed_form());
          if (suite == "theorem3") return suite_to_dict(verify::verify_entropy_limits());
          if (suite == "beam") return suite_to_dict(verify::verify_beam());
          throw std::invalid_argument("unknown verify suite: " + suite);
        },
        py::arg("suite"));

  m.def("train_from_config",
        [](const std::string& config_text, std::uint64_t seed) {
          auto cfg = cli::parse_run_config_text(config_text, "<python>");
          cfg.base.seed = seed;
          auto result = train::train(cfg.base);
          py::dict out;
          out["episodes"] = result.curve.size();
          out["discarded_episodes"] = result.discarded_episodes;
          out["tail_mean_reward"] = result.tail_mean_reward;
          out["tail_optimal_config_pct"] = result.tail_optimal_config_pct;
          std::vector<double> rewards;
          std::vector<int> lengths;
          for (const auto& row : result.curve) {
            rewards.push_back(row.reward_raw);
            lengths.push_back(row.length);
          }
          out["reward_raw"] = rewards;
          out["length"] = lengths;

          auto env = cfg.base.make_env();
          auto eval = train::evaluate(*result.model, *env, cfg.base.eval_episodes,
                                      cfg.base.discount, seed + 1000003, cfg.base.eval_greedy);
          out["eval"] = eval_report_to_dict(eval);
          return out;
        },
        py::arg("config_text"), py::arg("seed") = 0,
        "run a full training job from run-config text and return curve + evaluation");

  m.def("config_reference", [] { return cli::config_reference(); });
}
