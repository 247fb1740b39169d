#include "entropg/softmax_table.hpp"

#include <cmath>
#include <stdexcept>

#include "entropg/util.hpp"

namespace entropg::entropy {

namespace ops = diff::ops;
using policy::ActionSpace;
using policy::StepState;

namespace {

struct TableState : StepState {
  int row = 0;  // base-k encoding of the consumed prefix
  std::unique_ptr<StepState> clone() const override {
    return std::make_unique<TableState>(*this);
  }
};

std::vector<std::vector<double>> random_tables(int d, int k, std::uint64_t seed,
                                               double logit_scale) {
  auto rng = util::make_rng(seed, 0x7ab1e);
  std::vector<std::vector<double>> tables;
  std::size_t rows = 1;
  for (int i = 0; i < d; ++i) {
    std::vector<double> t(rows * static_cast<std::size_t>(k));
    for (double& v : t) v = logit_scale * util::standard_normal(rng);
    tables.push_back(std::move(t));
    rows *= static_cast<std::size_t>(k);
  }
  return tables;
}

}  // namespace

SoftmaxTable SoftmaxTable::random(int d, int k, std::uint64_t seed, double logit_scale) {
  return SoftmaxTable(d, k, random_tables(d, k, seed, logit_scale));
}

SoftmaxTable SoftmaxTable::uniform(int d, int k) {
  auto tables = random_tables(d, k, 0, 0.0);
  return SoftmaxTable(d, k, std::move(tables));
}

SoftmaxTable::SoftmaxTable(int d, int k, std::vector<std::vector<double>> logit_tables)
    : PolicyModel(ActionSpace(d, k), 0) {
  if (d > 3 || k > 6)
    throw std::invalid_argument("softmax table is capped at d <= 3, k <= 6");
  if (static_cast<int>(logit_tables.size()) != d)
    throw std::invalid_argument("expected one logit table per dimension");
  std::size_t rows = 1;
  for (int i = 0; i < d; ++i) {
    if (logit_tables[static_cast<std::size_t>(i)].size() != rows * static_cast<std::size_t>(k))
      throw std::invalid_argument("logit table " + std::to_string(i) + " has wrong size");
    logit_tables_.emplace_back("table.logits" + std::to_string(i),
                               std::move(logit_tables[static_cast<std::size_t>(i)]),
                               std::vector<int>{static_cast<int>(rows), k});
    rows *= static_cast<std::size_t>(k);
  }
}

std::vector<diff::Parameter*> SoftmaxTable::parameters() {
  std::vector<diff::Parameter*> out;
  for (auto& t : logit_tables_) out.push_back(&t);
  return out;
}

void SoftmaxTable::set_temperature(double t) {
  if (!(t > 0.0)) throw std::invalid_argument("temperature must be positive");
  temperature_ = t;
}

int SoftmaxTable::prefix_row(std::span<const int> prefix) const {
  int row = 0;
  for (int c : prefix) row = row * action_space().arity + c;
  return row;
}

std::unique_ptr<StepState> SoftmaxTable::begin_impl(diff::Tape&, std::span<const double>) {
  return std::make_unique<TableState>();
}

diff::Tensor SoftmaxTable::step_impl(diff::Tape& tape, StepState& st, int prev) {
  auto& ts = static_cast<TableState&>(st);
  if (st.depth > 0) ts.row = ts.row * action_space().arity + prev;
  diff::Tensor row =
      ops::index_row(logit_tables_[static_cast<std::size_t>(st.depth)].use(tape), ts.row);
  return temperature_ == 1.0 ? row : ops::scale(row, 1.0 / temperature_);
}

}  // namespace entropg::entropy
