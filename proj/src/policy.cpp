#include "entropg/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "entropg/util.hpp"

namespace entropg::policy {

namespace ops = diff::ops;

ActionSpace::ActionSpace(int d, int k) : dims(d), arity(k) {
  if (d < 1) throw std::invalid_argument("action space needs at least one dimension");
  if (k < 2) throw std::invalid_argument("action space arity must be at least 2");
}

std::size_t ActionSpace::total_actions() const {
  std::size_t total = 1;
  for (int i = 0; i < dims; ++i) {
    if (total > (std::size_t{1} << 62) / static_cast<std::size_t>(arity))
      throw std::overflow_error("k^d exceeds the representable action count");
    total *= static_cast<std::size_t>(arity);
  }
  return total;
}

void validate_action(const ActionSpace& space, const Action& a) {
  if (static_cast<int>(a.size()) != space.dims)
    throw std::invalid_argument("action has wrong number of components");
  for (int c : a)
    if (c < 0 || c >= space.arity)
      throw std::invalid_argument("action component out of range");
}

diff::Tensor trace_log_prob(const SampleTrace& trace) {
  diff::Tensor acc = trace.log_prob_terms.at(0);
  for (std::size_t i = 1; i < trace.log_prob_terms.size(); ++i)
    acc = ops::add(acc, trace.log_prob_terms[i]);
  return acc;
}

PolicyModel::PolicyModel(ActionSpace space, int state_dim)
    : space_(space), state_dim_(state_dim) {
  if (state_dim < 0) throw std::invalid_argument("negative state dimension");
}

std::unique_ptr<StepState> PolicyModel::begin(diff::Tape& tape,
                                              std::span<const double> state) {
  if (static_cast<int>(state.size()) != state_dim_)
    throw std::invalid_argument("state dimension mismatch: got " +
                                std::to_string(state.size()) + ", expected " +
                                std::to_string(state_dim_));
  auto st = begin_impl(tape, state);
  st->depth = 0;
  return st;
}

diff::Tensor PolicyModel::step_logits(diff::Tape& tape, StepState& st, int prev_component) {
  if (st.depth >= space_.dims)
    throw std::invalid_argument("step past the last action dimension");
  if (st.depth > 0 && (prev_component < 0 || prev_component >= space_.arity))
    throw std::invalid_argument("previous action component out of range");
  diff::Tensor logits = step_impl(tape, st, prev_component);
  ++st.depth;
  ++conditional_evals_;
  return logits;
}

diff::Tensor PolicyModel::conditional_dist(diff::Tape& tape, std::span<const double> state,
                                           std::span<const int> prefix) {
  if (static_cast<int>(prefix.size()) > space_.dims - 1)
    throw std::invalid_argument("prefix longer than d-1 components");
  for (int c : prefix)
    if (c < 0 || c >= space_.arity)
      throw std::invalid_argument("prefix component out of range");
  auto st = begin(tape, state);
  diff::Tensor logits = step_logits(tape, *st, -1);
  for (int c : prefix) logits = step_logits(tape, *st, c);
  return ops::softmax(logits);
}

int sample_index(std::span<const double> probs, std::mt19937_64& rng) {
  const double u = util::uniform01(rng);
  double cum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cum += probs[i];
    if (u < cum) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;  // rounding left cum just below 1
}

SampleTrace sample(PolicyModel& model, diff::Tape& tape, std::span<const double> state,
                   std::mt19937_64& rng) {
  const ActionSpace& space = model.action_space();
  SampleTrace trace;
  trace.cond_dists.reserve(static_cast<std::size_t>(space.dims));
  auto st = model.begin(tape, state);
  int prev = -1;
  for (int i = 0; i < space.dims; ++i) {
    diff::Tensor logits = model.step_logits(tape, *st, prev);
    diff::Tensor dist = ops::softmax(logits);
    diff::Tensor log_dist = ops::log_softmax(logits);
    for (double p : dist.values())
      if (!std::isfinite(p))
        throw diff::NumericError("non-finite probabilities in " + model.kind() +
                                 " conditional at dimension " + std::to_string(i));
    const int a = sample_index(dist.values(), rng);
    trace.action.push_back(a);
    trace.cond_dists.push_back(dist);
    trace.log_dists.push_back(log_dist);
    trace.log_prob_terms.push_back(ops::index(log_dist, a));
    prev = a;
  }
  return trace;
}

namespace {

int argmax_lowest(std::span<const double> v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

struct BeamItem {
  std::unique_ptr<StepState> st;  // has consumed the prefix
  Action prefix;
  double log_prob = 0.0;
  std::vector<double> dist;  // conditional for the next dimension
  bool greedy_path = false;
};

}  // namespace

Action beam_search(PolicyModel& model, std::span<const double> state, int beam) {
  if (beam < 1) throw std::invalid_argument("beam size must be at least 1");
  const ActionSpace& space = model.action_space();
  const int d = space.dims, k = space.arity;

  diff::Tape scratch;
  std::vector<BeamItem> items;
  {
    BeamItem root;
    root.st = model.begin(scratch, state);
    diff::Tensor dist = ops::softmax(model.step_logits(scratch, *root.st, -1));
    root.dist = dist.values();
    root.greedy_path = true;
    items.push_back(std::move(root));
  }

  for (int i = 0; i < d; ++i) {
    struct Candidate {
      std::size_t parent;
      int component;
      double log_prob;
      bool greedy_path;
    };
    std::vector<Candidate> cands;
    cands.reserve(items.size() * static_cast<std::size_t>(k));
    for (std::size_t pi = 0; pi < items.size(); ++pi) {
      const int g = argmax_lowest(items[pi].dist);
      for (int c = 0; c < k; ++c) {
        const double lp =
            items[pi].log_prob + std::log(std::max(items[pi].dist[static_cast<std::size_t>(c)], 1e-300));
        cands.push_back({pi, c, lp, items[pi].greedy_path && c == g});
      }
    }
    // Candidates are generated in (parent order, component ascending) order;
    // a stable sort therefore breaks log-prob ties toward lower indices.
    std::stable_sort(cands.begin(), cands.end(),
                     [](const Candidate& a, const Candidate& b) { return a.log_prob > b.log_prob; });

    std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(beam), cands.size());
    // Keep the greedy continuation alive even when it falls out of the top
    // `beam`; this guarantees the result is never worse than greedy decoding.
    auto greedy_it = std::find_if(cands.begin(), cands.end(),
                                  [](const Candidate& c) { return c.greedy_path; });
    const std::size_t greedy_pos = static_cast<std::size_t>(greedy_it - cands.begin());
    if (greedy_pos >= keep) std::swap(cands[keep - 1], cands[greedy_pos]);

    const bool last = (i == d - 1);
    std::vector<BeamItem> next;
    next.reserve(keep);
    for (std::size_t ci = 0; ci < keep; ++ci) {
      const Candidate& c = cands[ci];
      BeamItem item;
      item.prefix = items[c.parent].prefix;
      item.prefix.push_back(c.component);
      item.log_prob = c.log_prob;
      item.greedy_path = c.greedy_path;
      if (!last) {
        item.st = items[c.parent].st->clone();
        diff::Tensor dist = ops::softmax(model.step_logits(scratch, *item.st, c.component));
        item.dist = dist.values();
      }
      next.push_back(std::move(item));
      if (last && ci == 0) break;  // sorted: the first completed item is the answer
    }
    items = std::move(next);
  }
  return items.front().prefix;
}

Action greedy_action(PolicyModel& model, std::span<const double> state) {
  return beam_search(model, state, 1);
}

diff::Tensor log_prob(PolicyModel& model, diff::Tape& tape, std::span<const double> state,
                      const Action& action) {
  validate_action(model.action_space(), action);
  auto st = model.begin(tape, state);
  diff::Tensor acc;
  int prev = -1;
  for (int i = 0; i < model.action_space().dims; ++i) {
    diff::Tensor log_dist = ops::log_softmax(model.step_logits(tape, *st, prev));
    diff::Tensor term = ops::index(log_dist, action[static_cast<std::size_t>(i)]);
    acc = acc.defined() ? ops::add(acc, term) : term;
    prev = action[static_cast<std::size_t>(i)];
  }
  return acc;
}

double log_prob_value(PolicyModel& model, std::span<const double> state, const Action& action) {
  diff::Tape scratch;
  return log_prob(model, scratch, state, action).value();
}

Action nth_action(const ActionSpace& space, std::size_t n) {
  Action a(static_cast<std::size_t>(space.dims));
  for (int i = space.dims - 1; i >= 0; --i) {
    a[static_cast<std::size_t>(i)] = static_cast<int>(n % static_cast<std::size_t>(space.arity));
    n /= static_cast<std::size_t>(space.arity);
  }
  return a;
}

}  // namespace entropg::policy
