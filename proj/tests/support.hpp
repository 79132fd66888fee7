#ifndef DCSHAP_TESTS_SUPPORT_HPP
#define DCSHAP_TESTS_SUPPORT_HPP

// Shared test fixtures, oracles and instance generators. The oracles here
// deliberately avoid the engine's own enumeration code.

#include <algorithm>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <boost/rational.hpp>

#include "dcshap/dc.hpp"
#include "dcshap/repair.hpp"
#include "dcshap/shapley.hpp"
#include "dcshap/table.hpp"

namespace testing_support {

using namespace dcshap;

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string data_path(const std::string& name) {
  return std::string(DCSHAP_DATA_DIR) + "/" + name;
}

inline Table laliga_dirty() { return parse_table(read_text(data_path("laliga/dirty.csv"))); }
inline Table laliga_clean() { return parse_table(read_text(data_path("laliga/clean.csv"))); }
inline std::vector<DenialConstraint> laliga_constraints() {
  return parse_constraints(read_text(data_path("laliga/constraints.dc")));
}

inline std::vector<DenialConstraint> pick(const std::vector<DenialConstraint>& all,
                                          std::initializer_list<const char*> ids) {
  std::vector<DenialConstraint> out;
  for (const char* id : ids) {
    for (const auto& dc : all) {
      if (dc.id == id) out.push_back(dc);
    }
  }
  return out;
}

using Exact = boost::rational<long long>;

// Shapley values straight from the defining sum: for each player i, sum over
// every subset S of the other players of |S|!(n-|S|-1)!/n! * (v(S+i) - v(S)),
// with every coefficient computed as its own rational. `v` receives a
// membership vector.
template <class V>
std::vector<Exact> brute_force_shapley(std::size_t n, V&& v) {
  auto fact = [](std::size_t k) {
    long long f = 1;
    for (std::size_t i = 2; i <= k; ++i) f *= static_cast<long long>(i);
    return f;
  };
  std::vector<Exact> out(n, Exact(0));
  std::vector<bool> members(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> others;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) others.push_back(j);
    }
    for (unsigned long long bits = 0; bits < (1ULL << others.size()); ++bits) {
      std::fill(members.begin(), members.end(), false);
      std::size_t size = 0;
      for (std::size_t k = 0; k < others.size(); ++k) {
        if (bits >> k & 1) {
          members[others[k]] = true;
          ++size;
        }
      }
      int without = v(members);
      members[i] = true;
      int with = v(members);
      if (with != without) {
        out[i] += Exact(fact(size) * fact(n - size - 1), fact(n)) * (with - without);
      }
    }
  }
  return out;
}

// Shapley values as the average marginal contribution over all n! orders.
template <class V>
std::vector<Exact> permutation_shapley(std::size_t n, V&& v) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<long long> totals(n, 0);
  long long count = 0;
  std::vector<bool> members(n);
  do {
    std::fill(members.begin(), members.end(), false);
    int before = v(members);
    for (std::size_t k = 0; k < n; ++k) {
      members[order[k]] = true;
      int after = v(members);
      totals[order[k]] += after - before;
      before = after;
    }
    ++count;
  } while (std::next_permutation(order.begin(), order.end()));
  std::vector<Exact> out;
  for (auto t : totals) out.emplace_back(t, count);
  return out;
}

// Characteristic functions written directly from their definitions.
struct ConstraintGame {
  const RepairAlgorithm& alg;
  const RepairTask& task;
  int operator()(const std::vector<bool>& members) const {
    std::vector<DenialConstraint> subset;
    for (std::size_t i = 0; i < members.size(); ++i) {
      if (members[i]) subset.push_back(task.constraints[i]);
    }
    return indicator(alg, task, subset, task.dirty);
  }
};

struct CellGame {
  const RepairAlgorithm& alg;
  const RepairTask& task;
  std::vector<CellRef> players;
  CellGame(const RepairAlgorithm& a, const RepairTask& t) : alg(a), task(t) {
    for (const auto& ref : t.dirty.all_cells()) {
      if (ref != t.target) players.push_back(ref);
    }
  }
  int operator()(const std::vector<bool>& members) const {
    std::vector<CellRef> coalition{task.target};
    for (std::size_t i = 0; i < members.size(); ++i) {
      if (members[i]) coalition.push_back(players[i]);
    }
    return indicator(alg, task, task.constraints, mask_cells(task.dirty, coalition));
  }
};

// A small random repair problem: FD-style constraints
//   Ck: !(t1.X = t2.X & t1.Y != t2.Y)
// each driving a rule that rewrites Y, optionally conditioned on X.
struct Instance {
  std::vector<DenialConstraint> constraints;
  Table dirty;
  std::vector<RepairRule> rules;
  RepairAlgorithm alg;
  std::vector<CellChange> changes;

  RepairTask task(const CellRef& target) const {
    return make_task(alg, constraints, dirty, target);
  }
};

struct InstanceShape {
  std::size_t min_rows = 2, max_rows = 4;
  std::size_t min_cols = 2, max_cols = 4;
  std::size_t max_constraints = 4;
  double null_rate = 0.1;
};

inline std::optional<Instance> random_instance(std::mt19937_64& rng, const InstanceShape& shape) {
  auto below = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  std::size_t rows = below(shape.min_rows, shape.max_rows);
  std::size_t cols = below(shape.min_cols, shape.max_cols);
  std::size_t n_dcs = below(1, shape.max_constraints);

  std::vector<std::string> schema;
  for (std::size_t c = 0; c < cols; ++c) schema.push_back(std::string(1, char('A' + c)));
  std::bernoulli_distribution null_cell(shape.null_rate);
  std::vector<std::vector<Value>> data(rows);
  for (auto& row : data) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (null_cell(rng)) {
        row.push_back(Value::null());
      } else if (c % 2 == 0) {
        row.push_back(Value::text(std::string(1, char('a' + below(0, 2)))));
      } else {
        row.push_back(Value::number(std::to_string(below(1, 3))));
      }
    }
  }

  Instance inst;
  inst.dirty = Table(schema, std::move(data));
  for (std::size_t k = 0; k < n_dcs; ++k) {
    std::size_t x = below(0, cols - 1);
    std::size_t y = below(0, cols - 2);
    if (y >= x) ++y;
    std::string id = "C" + std::to_string(k + 1);
    inst.constraints.push_back(parse_dc(id + ": !(t1." + schema[x] + " = t2." + schema[x] +
                                        " & t1." + schema[y] + " != t2." + schema[y] + ")"));
    std::optional<std::string> given;
    if (below(0, 1)) given = schema[x];
    inst.rules.push_back({id, schema[y], given});
  }
  inst.alg = RuleRepair(inst.rules);
  try {
    Table clean = inst.alg(inst.constraints, inst.dirty);
    inst.changes = diff_tables(inst.dirty, clean);
  } catch (const FixpointError&) {
    return std::nullopt;
  }
  if (inst.changes.empty()) return std::nullopt;
  return inst;
}

inline Instance next_instance(std::mt19937_64& rng, const InstanceShape& shape = {}) {
  for (;;) {
    if (auto inst = random_instance(rng, shape)) return std::move(*inst);
  }
}

}  // namespace testing_support

#endif  // DCSHAP_TESTS_SUPPORT_HPP
