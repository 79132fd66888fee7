// Acceptance suite. Prints one PASS/FAIL line per criterion after the
// regular gtest output.

#include <gtest/gtest.h>

#include <chrono>
#include <iostream>
#include <map>
#include <random>

#include "dcshap/external.hpp"
#include "dcshap/shapley.hpp"
#include "dcshap/wire.hpp"
#include "support.hpp"

using namespace dcshap;
using namespace testing_support;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

const std::map<std::string, std::string> kCriteria = {
    {"FixtureConstraintValues", "fixture constraint Shapley values"},
    {"CityIndicators", "indicators for t5[City]"},
    {"ShapleyAxioms", "Shapley axioms on random instances"},
    {"SamplerMatchesExact", "sampler against exact enumeration"},
    {"LeagueRanksFirst", "t5[League] ranks first under column-distribution sampling"},
    {"Determinism", "determinism"},
    {"ParserCorpus", "parser corpus and violation counts"},
    {"BlackBoxAdapter", "constraint mode through the external adapter"},
};

class CriterionPrinter : public ::testing::EmptyTestEventListener {
 public:
  void OnTestEnd(const ::testing::TestInfo& info) override {
    auto it = kCriteria.find(info.name());
    std::string label = it == kCriteria.end() ? info.name() : it->second;
    lines_.push_back((info.result()->Passed() ? "PASS  " : "FAIL  ") + label);
  }
  void OnTestProgramEnd(const ::testing::UnitTest&) override {
    std::cout << "\n";
    for (const auto& line : lines_) std::cout << line << "\n";
    std::cout.flush();
  }

 private:
  std::vector<std::string> lines_;
};

std::string csv_value_list(const std::vector<Rational>& values) {
  std::ostringstream out;
  for (std::size_t i = 0; i < values.size(); ++i) out << (i ? ", " : "") << values[i];
  return out.str();
}

// Membership-vector view of a game whose values are already tabulated by
// bit mask.
struct Tabulated {
  std::vector<int> v;
  int operator()(const std::vector<bool>& members) const {
    std::size_t mask = 0;
    for (std::size_t i = 0; i < members.size(); ++i) mask |= std::size_t{members[i]} << i;
    return v[mask];
  }
};

template <class Game>
Tabulated tabulate(std::size_t n, const Game& game) {
  Tabulated t;
  t.v.resize(std::size_t{1} << n);
  std::vector<bool> members(n);
  for (std::size_t mask = 0; mask < t.v.size(); ++mask) {
    for (std::size_t i = 0; i < n; ++i) members[i] = mask >> i & 1;
    t.v[mask] = game(members);
  }
  return t;
}

struct AxiomTally {
  std::size_t dummies = 0;
  std::size_t symmetric_pairs = 0;
};

// Checks efficiency, dummy and symmetry of `values` against the tabulated
// game. Dummies and symmetric pairs are found by enumeration.
::testing::AssertionResult satisfies_axioms(const std::vector<Rational>& values,
                                            const Tabulated& game, AxiomTally& tally) {
  const std::size_t n = values.size();
  const std::size_t full = game.v.size() - 1;
  Rational sum(0);
  for (const auto& v : values) sum += v;
  if (sum != Rational(game.v[full] - game.v[0])) {
    return ::testing::AssertionFailure() << "efficiency: sum " << sum << " over ["
                                         << csv_value_list(values) << "]";
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    bool dummy = true;
    for (std::size_t s = 0; s <= full && dummy; ++s) {
      if (!(s & bit)) dummy = game.v[s | bit] == game.v[s];
    }
    if (dummy) {
      ++tally.dummies;
      if (values[i] != Rational(0)) {
        return ::testing::AssertionFailure() << "dummy player " << i << " has " << values[i];
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const std::size_t bi = std::size_t{1} << i, bj = std::size_t{1} << j;
      bool symmetric = true;
      for (std::size_t s = 0; s <= full && symmetric; ++s) {
        if (!(s & bi) && !(s & bj)) symmetric = game.v[s | bi] == game.v[s | bj];
      }
      if (symmetric) {
        ++tally.symmetric_pairs;
        if (values[i] != values[j]) {
          return ::testing::AssertionFailure() << "symmetric players " << i << ", " << j
                                               << " differ: " << values[i] << " vs " << values[j];
        }
      }
    }
  }
  return ::testing::AssertionSuccess();
}

AdapterConfig self_adapter() {
  AdapterConfig config;
  config.name = "self";
  config.executable = DCSHAP_REFERENCE_ADAPTER;
  return config;
}

const std::vector<Rational> kFixtureValues = {Rational(1, 6), Rational(1, 6), Rational(2, 3),
                                              Rational(0)};

}  // namespace

TEST(Acceptance, FixtureConstraintValues) {
  Table dirty = laliga_dirty();
  ASSERT_EQ(dirty.row_count(), 6u);
  RepairAlgorithm alg = reference_repair;
  ASSERT_EQ(diff_tables(dirty, reference_repair(laliga_constraints(), dirty)),
            (std::vector<CellChange>{
                {{5, "City"}, Value::text("Capital"), Value::text("Madrid")},
                {{5, "Country"}, Value::text("España"), Value::text("Spain")}}));

  auto start = Clock::now();
  auto task = make_task(alg, laliga_constraints(), dirty, {5, "Country"});
  auto report = shapley_constraints(alg, task);
  double elapsed = seconds_since(start);

  EXPECT_EQ(report.players, (std::vector<std::string>{"C1", "C2", "C3", "C4"}));
  EXPECT_EQ(report.values, kFixtureValues) << csv_value_list(report.values);
  EXPECT_EQ(report.evaluations, 16u);
  EXPECT_LT(elapsed, 1.0);
}

TEST(Acceptance, CityIndicators) {
  auto all = laliga_constraints();
  RepairAlgorithm alg = reference_repair;
  auto task = make_task(alg, all, laliga_dirty(), {5, "City"});
  EXPECT_EQ(indicator(alg, task, pick(all, {"C1", "C2", "C3"}), task.dirty), 1);
  EXPECT_EQ(indicator(alg, task, pick(all, {"C2", "C3"}), task.dirty), 0);
}

TEST(Acceptance, ShapleyAxioms) {
  auto start = Clock::now();
  std::mt19937_64 rng(2024);
  AxiomTally constraint_tally, cell_tally;
  const int kInstances = 120;
  for (int trial = 0; trial < kInstances; ++trial) {
    Instance inst = next_instance(rng);
    const auto& change = inst.changes[rng() % inst.changes.size()];
    RepairTask task = inst.task(change.ref);

    auto by_constraint = shapley_constraints(inst.alg, task);
    auto constraint_game = tabulate(task.constraints.size(), ConstraintGame{inst.alg, task});
    ASSERT_TRUE(satisfies_axioms(by_constraint.values, constraint_game, constraint_tally))
        << "constraints, instance " << trial << "\n" << serialize_table(task.dirty);

    auto by_cell = shapley_cells_exact(inst.alg, task);
    CellGame cells(inst.alg, task);
    ASSERT_EQ(by_cell.players, cells.players);
    auto cell_game = tabulate(cells.players.size(), cells);
    ASSERT_TRUE(satisfies_axioms(by_cell.exact, cell_game, cell_tally))
        << "cells, instance " << trial << "\n" << serialize_table(task.dirty);
  }
  // The checks above are only meaningful if dummies and symmetric pairs occur.
  EXPECT_GT(constraint_tally.dummies, 0u);
  EXPECT_GT(constraint_tally.symmetric_pairs, 0u);
  EXPECT_GT(cell_tally.dummies, 0u);
  EXPECT_GT(cell_tally.symmetric_pairs, 0u);
  double elapsed = seconds_since(start);
  std::cout << "  axioms: " << kInstances << " instances, " << constraint_tally.dummies << "+"
            << cell_tally.dummies << " dummies, " << constraint_tally.symmetric_pairs << "+"
            << cell_tally.symmetric_pairs << " symmetric pairs, " << elapsed << " s\n";
  EXPECT_LT(elapsed, 60.0);
}

TEST(Acceptance, SamplerMatchesExact) {
  auto start = Clock::now();
  std::mt19937_64 rng(77);
  InstanceShape toy;
  toy.min_rows = 2;
  toy.max_rows = 3;
  toy.min_cols = 2;
  toy.max_cols = 4;
  std::size_t players = 0, within = 0;
  for (int trial = 0; trial < 12; ++trial) {
    Instance inst = next_instance(rng, toy);
    RepairTask task = inst.task(inst.changes[rng() % inst.changes.size()].ref);
    auto exact = shapley_cells_exact(inst.alg, task);
    ASSERT_LE(exact.players.size(), 12u);

    CellGame game(inst.alg, task);
    auto oracle = brute_force_shapley(game.players.size(), game);
    ASSERT_EQ(exact.exact.size(), oracle.size());
    for (std::size_t i = 0; i < oracle.size(); ++i) {
      ASSERT_EQ(exact.exact[i].numerator(), oracle[i].numerator());
      ASSERT_EQ(exact.exact[i].denominator(), oracle[i].denominator());
    }

    SamplingOptions options;
    options.samples = 20000;
    options.seed = 5;
    options.imputation = Imputation::kNull;
    auto sampled = shapley_cells_sampled(inst.alg, task, options);
    ASSERT_EQ(sampled.players, exact.players);
    for (std::size_t i = 0; i < sampled.values.size(); ++i) {
      ++players;
      within += std::abs(sampled.values[i] - exact.values[i]) <= 0.05;
    }
  }
  std::cout << "  sampler: " << within << "/" << players << " players within 0.05, "
            << seconds_since(start) << " s\n";
  EXPECT_GE(within * 100, players * 95);
  EXPECT_LT(seconds_since(start), 300.0);
}

TEST(Acceptance, LeagueRanksFirst) {
  RepairAlgorithm alg = reference_repair;
  auto task = make_task(alg, laliga_constraints(), laliga_dirty(), {5, "Country"});
  int top = 0;
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    SamplingOptions options;
    options.samples = 50000;
    options.seed = seed;
    options.imputation = Imputation::kColumnDistribution;
    auto report = shapley_cells_sampled(alg, task, options);
    auto ranked = rank(report);
    std::cout << "  seed " << seed << ": top " << ranked[0].player << " " << ranked[0].value
              << ", t5[League] " << report.value_of({5, "League"}) << "\n";
    top += ranked[0].player == CellRef{5, "League"};
  }
  EXPECT_EQ(top, 5) << "t5[League] ranked first for " << top << " of 5 seeds";
}

TEST(Acceptance, Determinism) {
  RepairAlgorithm alg = reference_repair;
  auto task = make_task(alg, laliga_constraints(), laliga_dirty(), {5, "Country"});
  for (auto imputation : {Imputation::kNull, Imputation::kColumnDistribution}) {
    std::vector<std::string> dumps;
    for (unsigned workers : {1u, 1u, 4u, 4u}) {
      SamplingOptions options;
      options.samples = 500;
      options.seed = 99;
      options.imputation = imputation;
      options.workers = workers;
      dumps.push_back(wire::to_json(shapley_cells_sampled(alg, task, options)).dump());
    }
    EXPECT_EQ(dumps[0], dumps[1]);
    EXPECT_EQ(dumps[2], dumps[3]);
    EXPECT_EQ(dumps[0], dumps[2]);
  }

  std::mt19937_64 rng(4242);
  for (int trial = 0; trial < 50; ++trial) {
    Instance inst = next_instance(rng);
    ASSERT_EQ(inst.alg(inst.constraints, inst.dirty), inst.alg(inst.constraints, inst.dirty));
  }
  // The reference rules only apply to the fixture schema, so its random
  // instances are perturbed fixtures.
  auto dcs = laliga_constraints();
  Table base = laliga_dirty();
  for (int trial = 0; trial < 50; ++trial) {
    Table t = base;
    for (int k = 0; k < 3; ++k) t.set(1 + rng() % 6, rng() % 6, base.at(1 + rng() % 6, rng() % 6));
    std::string first, second;
    for (std::string* out : {&first, &second}) {
      try {
        *out = serialize_table(reference_repair(dcs, t));
      } catch (const FixpointError& e) {
        *out = "fixpoint:" + serialize_table(e.last_table());
      }
    }
    ASSERT_EQ(first, second);
  }
}

TEST(Acceptance, ParserCorpus) {
  auto dcs = parse_constraints(read_text(std::string(DCSHAP_TEST_DIR) + "/corpus/constraints.dc"));
  ASSERT_GE(dcs.size(), 20u);
  std::set<std::string> ids;
  for (const auto& dc : dcs) {
    ids.insert(dc.id);
    auto again = parse_dc(print_dc(dc));
    ASSERT_EQ(again, dc);
    ASSERT_EQ(print_dc(again), print_dc(dc));
  }
  for (const char* id : {"C1", "C2", "C3", "C4", "C4_printed"}) EXPECT_TRUE(ids.count(id)) << id;

  // Quadratic reference count: every ordered pair of distinct rows (or every
  // row, for single-tuple constraints) checked predicate by predicate.
  Table t = laliga_dirty();
  auto cell = [&](const Term& term, std::size_t i, std::size_t j) {
    if (const auto* ta = std::get_if<TupleAttr>(&term)) return t.at({ta->tuple == 1 ? i : j, ta->attr});
    return std::get<Value>(term);
  };
  for (const auto& dc : dcs) {
    bool pairwise = false;
    for (const auto& p : dc.predicates) {
      for (const Term* term : {&p.left, &p.right}) {
        if (const auto* ta = std::get_if<TupleAttr>(term)) pairwise |= ta->tuple == 2;
      }
    }
    std::size_t expected = 0;
    for (std::size_t i = 1; i <= t.row_count(); ++i) {
      for (std::size_t j = 1; j <= t.row_count(); ++j) {
        if (pairwise ? i == j : i != j) continue;
        bool all = true;
        for (const auto& p : dc.predicates) {
          Value a = cell(p.left, i, j), b = cell(p.right, i, j);
          bool holds = false;
          if (!a.is_null() && !b.is_null()) {
            bool comparable = a.is_number() == b.is_number();
            switch (p.op) {
              case CompareOp::kEq: holds = comparable && a == b; break;
              case CompareOp::kNeq: holds = !comparable || a != b; break;
              case CompareOp::kLt: holds = a < b; break;
              case CompareOp::kLeq: holds = a <= b; break;
              case CompareOp::kGt: holds = a > b; break;
              case CompareOp::kGeq: holds = a >= b; break;
            }
          }
          all = all && holds;
        }
        expected += all;
      }
    }
    EXPECT_EQ(violations(dc, t).size(), expected) << dc.id;
  }
}

TEST(Acceptance, BlackBoxAdapter) {
  RepairAlgorithm remote = ExternalRepairer(self_adapter());
  RepairAlgorithm local = reference_repair;
  auto all = laliga_constraints();
  Table dirty = laliga_dirty();

  ASSERT_EQ(run_repair(remote, all, dirty), laliga_clean());
  auto task = make_task(remote, all, dirty, {5, "Country"});
  auto report = shapley_constraints(remote, task);
  EXPECT_EQ(report.values, kFixtureValues) << csv_value_list(report.values);
  EXPECT_EQ(rank(report)[0].player, "C3");

  auto city = make_task(remote, all, dirty, {5, "City"});
  EXPECT_EQ(indicator(remote, city, pick(all, {"C1", "C2", "C3"}), dirty), 1);
  EXPECT_EQ(indicator(remote, city, pick(all, {"C2", "C3"}), dirty), 0);

  // Constraint-mode axioms and agreement with the in-process algorithm on
  // perturbed fixtures.
  std::mt19937_64 rng(808);
  AxiomTally tally;
  int checked = 0;
  for (int trial = 0; trial < 200 && checked < 25; ++trial) {
    Table t = dirty;
    for (int k = 0; k < 2; ++k) t.set(1 + rng() % 6, rng() % 6, dirty.at(1 + rng() % 6, rng() % 6));
    std::vector<CellChange> changes;
    try {
      changes = diff_tables(t, reference_repair(all, t));
    } catch (const FixpointError&) {
      continue;
    }
    if (changes.empty()) continue;
    ++checked;
    auto target = changes[rng() % changes.size()].ref;
    auto remote_report = shapley_constraints(remote, make_task(remote, all, t, target));
    auto local_report = shapley_constraints(local, make_task(local, all, t, target));
    ASSERT_EQ(remote_report.values, local_report.values);
    auto game = tabulate(all.size(), ConstraintGame{remote, remote_report.task});
    ASSERT_TRUE(satisfies_axioms(remote_report.values, game, tally));
  }
  EXPECT_EQ(checked, 25);
}

int main(int argc, char** argv) {
  ::testing::InitGoogleTest(&argc, argv);
  ::testing::UnitTest::GetInstance()->listeners().Append(new CriterionPrinter);
  return RUN_ALL_TESTS();
}
