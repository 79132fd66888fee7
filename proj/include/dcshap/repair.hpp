#ifndef DCSHAP_REPAIR_HPP
#define DCSHAP_REPAIR_HPP

#include <algorithm>
#include <concepts>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dcshap/dc.hpp"
#include "dcshap/errors.hpp"
#include "dcshap/table.hpp"

namespace dcshap {

// Any deterministic map (constraints, dirty table) -> repaired table of the
// same shape. The explanation engine only ever calls it; it never looks
// inside.
using RepairAlgorithm =
    std::function<Table(std::span<const DenialConstraint>, const Table&)>;

template <class F>
concept RepairCallable = requires(const F& f, std::span<const DenialConstraint> dcs,
                                  const Table& t) {
  { f(dcs, t) } -> std::convertible_to<Table>;
};

// The repair loop did not settle within its sweep budget.
class FixpointError : public Error {
 public:
  FixpointError(const std::string& message, Table last)
      : Error(message), last_(std::move(last)) {}
  const Table& last_table() const { return last_; }

 private:
  Table last_;
};

// When constraint `constraint_id` is violated by a row, overwrite the row's
// `target` attribute with the most frequent value of that column, optionally
// restricted to rows sharing the row's current `given` value.
struct RepairRule {
  std::string constraint_id;
  std::string target;
  std::optional<std::string> given;
};

// The four rules of the simple La Liga repair algorithm, bound to C1..C4.
inline std::vector<RepairRule> simple_repair_rules() {
  return {
      {"C1", "City", std::nullopt},
      {"C2", "Country", "City"},
      {"C3", "Country", std::nullopt},
      {"C4", "Place", "Team"},
  };
}

// Rule-driven repair. Rules whose constraint is absent from the input set
// are disabled. Rules run in order, rows ascending, and sweeps repeat until
// nothing changes or 2*n*m sweeps have run. Frequencies are taken over the
// current working table, non-null cells only; ties go to the smallest value
// in canonical order. An empty distribution leaves the cell unchanged.
class RuleRepair {
 public:
  explicit RuleRepair(std::vector<RepairRule> rules) : rules_(std::move(rules)) {}

  const std::vector<RepairRule>& rules() const { return rules_; }

  Table operator()(std::span<const DenialConstraint> constraints, const Table& dirty) const {
    thread_local Workspace ws;
    ws.reset(dirty);
    for (const auto& rule : rules_) {
      auto it = std::find_if(constraints.begin(), constraints.end(),
                             [&](const auto& dc) { return dc.id == rule.constraint_id; });
      if (it == constraints.end()) continue;
      std::size_t target = require(dirty, rule.target, rule.constraint_id);
      int given = rule.given ? static_cast<int>(require(dirty, *rule.given, rule.constraint_id))
                             : -1;
      ws.add_rule(*it, dirty, target, given);
    }
    if (ws.rules.empty()) return dirty;
    ws.encode(dirty);

    const std::size_t n = ws.rows;
    const std::size_t cap = std::max<std::size_t>(1, 2 * n * ws.cols);

    // End-of-sweep states are kept; once one repeats the loop is periodic and
    // the state after `cap` sweeps can be read off the history.
    ws.remember_state();
    for (std::size_t sweep = 1; sweep <= cap; ++sweep) {
      bool changed = false;
      for (const auto& rule : ws.rules) {
        ws.find_participants(rule);
        for (std::size_t r = 0; r < n; ++r) {
          if (!ws.participants[r]) continue;
          int best = ws.argmax(rule, r);
          if (best >= 0 && ws.code(r, rule.target) != best) {
            ws.set(r, rule.target, best);
            changed = true;
            ws.find_participants(rule);
          }
        }
      }
      if (!changed) return ws.decode(dirty, ws.codes.data());

      if (auto first = ws.find_state()) {
        std::size_t period = sweep - *first;
        const int* last = ws.state(*first + (cap - *first) % period);
        throw FixpointError(non_convergence_message(cap), ws.decode(dirty, last));
      }
      ws.remember_state();
    }
    throw FixpointError(non_convergence_message(cap), ws.decode(dirty, ws.codes.data()));
  }

 private:
  static std::string non_convergence_message(std::size_t cap) {
    return "repair did not reach a fixpoint within " + std::to_string(cap) + " sweeps";
  }

  static std::size_t require(const Table& t, const std::string& attr, const std::string& id) {
    auto idx = t.column_index(attr);
    if (!idx) {
      throw BindError("repair rule for " + id + " needs attribute '" + attr + "'");
    }
    return *idx;
  }

  // Scratch state for one run, reused across calls on the same thread.
  //
  // Every value is replaced by its rank in the sorted dictionary of distinct
  // values (null = -1). Rank order is the canonical value order, so integer
  // comparisons implement both predicate comparisons within a kind and the
  // argmax tie-break.
  struct Workspace {
    struct Term {
      int tuple = 0;  // 0 = constant
      std::size_t column = 0;
      const Value* constant = nullptr;
      int code = -1;
    };
    struct Pred {
      Term left;
      CompareOp op = CompareOp::kEq;
      Term right;
    };
    struct Rule {
      std::size_t pred_begin = 0;
      std::size_t pred_end = 0;
      bool single_tuple = false;
      std::size_t target = 0;
      int given = -1;
    };

    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<Pred> preds;
    std::vector<Rule> rules;
    std::vector<const Value*> dict;
    std::vector<const Value*> distinct;  // per-column distinct values, flattened
    std::vector<std::size_t> distinct_offset;
    std::vector<int> distinct_code;
    std::vector<int> local;
    std::vector<int> original;
    std::vector<int> codes;
    std::vector<std::size_t> counts;
    std::vector<char> participants;
    std::vector<int> history;
    std::size_t history_count = 0;

    void reset(const Table& t) {
      rows = t.row_count();
      cols = t.column_count();
      preds.clear();
      rules.clear();
      history.clear();
      history_count = 0;
    }

    void add_rule(const DenialConstraint& dc, const Table& t, std::size_t target, int given) {
      bool uses[3] = {false, false, false};
      auto bind_term = [&](const dcshap::Term& term) {
        Term out;
        if (const auto* ta = std::get_if<TupleAttr>(&term)) {
          auto idx = t.column_index(ta->attr);
          if (!idx) {
            throw BindError("constraint " + dc.id + " references unknown attribute '" +
                            ta->attr + "'");
          }
          out.tuple = ta->tuple;
          out.column = *idx;
          uses[ta->tuple] = true;
        } else {
          out.constant = &std::get<Value>(term);
        }
        return out;
      };
      Rule rule;
      rule.pred_begin = preds.size();
      for (const auto& p : dc.predicates) {
        preds.push_back({bind_term(p.left), p.op, bind_term(p.right)});
      }
      rule.pred_end = preds.size();
      rule.single_tuple = !(uses[1] && uses[2]);
      rule.target = target;
      rule.given = given;
      rules.push_back(rule);
    }

    void encode(const Table& t) {
      const auto& cells = t.cells();
      distinct.clear();
      distinct_offset.assign(cols + 1, 0);
      local.assign(cells.size(), -1);
      for (std::size_t c = 0; c < cols; ++c) {
        std::size_t begin = distinct.size();
        for (std::size_t r = 0; r < rows; ++r) {
          const Value& v = cells[r * cols + c];
          if (v.is_null()) continue;
          std::size_t k = begin;
          while (k < distinct.size() && !(*distinct[k] == v)) ++k;
          if (k == distinct.size()) distinct.push_back(&v);
          local[r * cols + c] = static_cast<int>(k - begin);
        }
        distinct_offset[c + 1] = distinct.size();
      }

      dict.assign(distinct.begin(), distinct.end());
      for (const auto& p : preds) {
        if (p.left.constant && !p.left.constant->is_null()) dict.push_back(p.left.constant);
        if (p.right.constant && !p.right.constant->is_null()) dict.push_back(p.right.constant);
      }
      std::sort(dict.begin(), dict.end(), [](const Value* a, const Value* b) { return *a < *b; });
      dict.erase(std::unique(dict.begin(), dict.end(),
                             [](const Value* a, const Value* b) { return *a == *b; }),
                 dict.end());

      distinct_code.resize(distinct.size());
      for (std::size_t k = 0; k < distinct.size(); ++k) distinct_code[k] = lookup(*distinct[k]);
      codes.resize(cells.size());
      for (std::size_t i = 0; i < cells.size(); ++i) {
        codes[i] = local[i] < 0 ? -1 : distinct_code[distinct_offset[i % cols] + local[i]];
      }
      original = codes;
      for (auto& p : preds) {
        if (p.left.constant) p.left.code = lookup(*p.left.constant);
        if (p.right.constant) p.right.code = lookup(*p.right.constant);
      }
      counts.assign(dict.size(), 0);
      participants.assign(rows, 0);
    }

    int lookup(const Value& v) const {
      if (v.is_null()) return -1;
      auto it = std::lower_bound(dict.begin(), dict.end(), &v,
                                 [](const Value* a, const Value* b) { return *a < *b; });
      return static_cast<int>(it - dict.begin());
    }

    int code(std::size_t r, std::size_t c) const { return codes[r * cols + c]; }
    void set(std::size_t r, std::size_t c, int v) { codes[r * cols + c] = v; }

    int resolve(const Term& t, std::size_t first, std::size_t second) const {
      if (t.tuple == 1) return code(first, t.column);
      if (t.tuple == 2) return code(second, t.column);
      return t.code;
    }

    bool compare(int a, CompareOp op, int b) const {
      if (a < 0 || b < 0) return false;
      switch (op) {
        case CompareOp::kEq: return a == b;
        case CompareOp::kNeq: return a != b;
        default: break;
      }
      if (dict[a]->kind() != dict[b]->kind()) {
        throw TypeError("order comparison between " + dict[a]->to_string() + " and " +
                        dict[b]->to_string() + " of different kinds");
      }
      switch (op) {
        case CompareOp::kLt: return a < b;
        case CompareOp::kLeq: return a <= b;
        case CompareOp::kGt: return a > b;
        case CompareOp::kGeq: return a >= b;
        default: return false;
      }
    }

    bool violated(const Rule& rule, std::size_t first, std::size_t second) const {
      for (std::size_t k = rule.pred_begin; k < rule.pred_end; ++k) {
        const Pred& p = preds[k];
        if (!compare(resolve(p.left, first, second), p.op, resolve(p.right, first, second))) {
          return false;
        }
      }
      return true;
    }

    // Marks every row that takes part in a violation of the rule's constraint.
    void find_participants(const Rule& rule) {
      std::fill(participants.begin(), participants.end(), 0);
      for (std::size_t i = 0; i < rows; ++i) {
        if (rule.single_tuple) {
          participants[i] = violated(rule, i, i);
          continue;
        }
        for (std::size_t j = i + 1; j < rows; ++j) {
          if (participants[i] && participants[j]) continue;
          if (violated(rule, i, j) || violated(rule, j, i)) participants[i] = participants[j] = 1;
        }
      }
    }

    int argmax(const Rule& rule, std::size_t r) {
      int condition = rule.given >= 0 ? code(r, static_cast<std::size_t>(rule.given)) : -1;
      if (rule.given >= 0 && condition < 0) return -1;
      for (std::size_t j = 0; j < rows; ++j) {
        int v = code(j, rule.target);
        if (v < 0) continue;
        if (rule.given >= 0 && code(j, static_cast<std::size_t>(rule.given)) != condition) {
          continue;
        }
        ++counts[v];
      }
      int best = -1;
      std::size_t best_count = 0;
      for (std::size_t j = 0; j < rows; ++j) {
        int v = code(j, rule.target);
        if (v < 0 || counts[v] == 0) continue;
        if (counts[v] > best_count || (counts[v] == best_count && v < best)) {
          best = v;
          best_count = counts[v];
        }
      }
      for (std::size_t j = 0; j < rows; ++j) {
        int v = code(j, rule.target);
        if (v >= 0) counts[v] = 0;
      }
      return best;
    }

    void remember_state() {
      history.insert(history.end(), codes.begin(), codes.end());
      ++history_count;
    }
    const int* state(std::size_t index) const { return history.data() + index * codes.size(); }
    std::optional<std::size_t> find_state() const {
      for (std::size_t h = 0; h < history_count; ++h) {
        if (std::equal(codes.begin(), codes.end(), state(h))) return h;
      }
      return std::nullopt;
    }

    Table decode(const Table& source, const int* state) const {
      Table out = source;
      for (std::size_t i = 0; i < codes.size(); ++i) {
        if (state[i] == original[i]) continue;
        out.set(i / cols + 1, i % cols, state[i] < 0 ? Value::null() : *dict[state[i]]);
      }
      return out;
    }
  };

  std::vector<RepairRule> rules_;
};

// The simple four-rule repair algorithm over Team/City/Country/Place.
inline Table reference_repair(std::span<const DenialConstraint> constraints,
                              const Table& dirty) {
  static const RuleRepair algorithm(simple_repair_rules());
  return algorithm(constraints, dirty);
}

// Calls `alg`, converting foreign failures to BlackBoxError and checking the
// shape contract.
template <RepairCallable Alg>
Table run_repair(const Alg& alg, std::span<const DenialConstraint> constraints,
                 const Table& input) {
  Table out;
  try {
    out = alg(constraints, input);
  } catch (const BlackBoxError&) {
    throw;
  } catch (const ContractError&) {
    throw;
  } catch (const FixpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw BlackBoxError(std::string("repair algorithm failed: ") + e.what());
  }
  if (out.schema() != input.schema()) {
    throw ContractError("repair algorithm changed the schema");
  }
  if (out.row_count() != input.row_count()) {
    throw ContractError("repair algorithm returned " + std::to_string(out.row_count()) +
                        " rows for an input of " + std::to_string(input.row_count()));
  }
  return out;
}

// Frozen inputs of one explanation: the full constraint set, the dirty table,
// the cell of interest and the value the full repair gave it.
struct RepairTask {
  std::vector<DenialConstraint> constraints;
  Table dirty;
  CellRef target;
  Value expected;

  const Value& dirty_value() const { return dirty.at(target); }
};

// Runs the full repair and builds the task for `target`. Throws
// UnexplainableError if the repair leaves the target unchanged.
template <RepairCallable Alg>
RepairTask make_task(const Alg& alg, std::vector<DenialConstraint> constraints, Table dirty,
                     CellRef target) {
  dirty.locate(target);
  for (const auto& dc : constraints) bind(dc, dirty);
  Table clean = run_repair(alg, constraints, dirty);
  Value expected = clean.at(target);
  if (expected == dirty.at(target)) {
    throw UnexplainableError("cell " + target.to_string() +
                             " is not changed by the repair; only changed cells are explainable");
  }
  return RepairTask{std::move(constraints), std::move(dirty), std::move(target),
                    std::move(expected)};
}

// 1 iff repairing `variant` under `constraints` sets the target cell to the
// task's expected value.
//
// A run that does not settle is scored on the table its last sweep left
// behind. That table is still a deterministic function of the inputs, so the
// characteristic function stays well defined on oscillating variants.
template <RepairCallable Alg>
int indicator(const Alg& alg, const RepairTask& task,
              std::span<const DenialConstraint> constraints, const Table& variant) {
  try {
    Table out = run_repair(alg, constraints, variant);
    return out.at(task.target) == task.expected ? 1 : 0;
  } catch (const FixpointError& e) {
    const Table& last = e.last_table();
    if (!last.same_shape(variant)) throw ContractError("repair algorithm changed the table shape");
    return last.at(task.target) == task.expected ? 1 : 0;
  }
}

}  // namespace dcshap

#endif  // DCSHAP_REPAIR_HPP
