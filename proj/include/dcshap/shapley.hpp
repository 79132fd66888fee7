#ifndef DCSHAP_SHAPLEY_HPP
#define DCSHAP_SHAPLEY_HPP

// Shapley attribution of a single cell repair to constraints and to cells.
//
// The characteristic function of a task is the repair indicator: a coalition
// of constraints is run against the original dirty table; a coalition of
// cells keeps those cells and imputes the rest (null, or a draw from the
// column's empirical distribution). The target cell is never a player and
// always keeps its dirty value.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <boost/rational.hpp>

#include "dcshap/dc.hpp"
#include "dcshap/errors.hpp"
#include "dcshap/repair.hpp"
#include "dcshap/table.hpp"

namespace dcshap {

using Rational = boost::rational<std::int64_t>;

inline double to_double(const Rational& r) {
  return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

enum class Imputation { kNull, kColumnDistribution };

inline std::string_view to_string(Imputation imputation) {
  return imputation == Imputation::kNull ? "null" : "column-distribution";
}

struct ConstraintShapleyReport {
  RepairTask task;
  std::vector<std::string> players;  // constraint ids, input order
  std::vector<Rational> values;
  std::string method = "exact-enumeration";
  std::size_t evaluations = 0;

  Rational value_of(std::string_view id) const {
    for (std::size_t i = 0; i < players.size(); ++i) {
      if (players[i] == id) return values[i];
    }
    throw RefError("no constraint '" + std::string(id) + "' in report");
  }
};

struct CellShapleyReport {
  RepairTask task;
  std::vector<CellRef> players;  // canonical order: row, then attribute position
  std::vector<double> values;
  std::vector<Rational> exact;    // exact-enumeration only
  std::vector<double> std_errors;  // permutation-sampling only
  std::string method;
  Imputation imputation = Imputation::kNull;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  std::size_t evaluations = 0;

  bool is_exact() const { return method == "exact-enumeration"; }

  double value_of(const CellRef& ref) const {
    for (std::size_t i = 0; i < players.size(); ++i) {
      if (players[i] == ref) return values[i];
    }
    throw RefError("no player " + ref.to_string() + " in report");
  }
};

template <class Player>
struct RankedPlayer {
  Player player;
  double value = 0;
};

struct SamplingOptions {
  std::size_t samples = 1000;
  std::uint64_t seed = 0;
  Imputation imputation = Imputation::kColumnDistribution;
  unsigned workers = 1;  // 0 = hardware concurrency
};

inline constexpr std::size_t kDefaultEnumerationCap = 20;
// 20! is the largest factorial that fits in int64.
inline constexpr std::size_t kMaxEnumerablePlayers = 20;

namespace detail {

inline std::int64_t factorial(std::size_t n) {
  std::int64_t f = 1;
  for (std::size_t i = 2; i <= n; ++i) f *= static_cast<std::int64_t>(i);
  return f;
}

// Exact Shapley values from a characteristic function tabulated over all
// 2^n coalitions (bit i set = player i present). Numerators are accumulated
// over the common denominator n!, which bounds them by n! in magnitude.
inline std::vector<Rational> shapley_from_coalitions(std::size_t n,
                                                     const std::vector<int>& v) {
  std::vector<std::int64_t> weight(n == 0 ? 1 : n);
  for (std::size_t s = 0; s < n; ++s) weight[s] = factorial(s) * factorial(n - s - 1);
  std::vector<std::int64_t> numerators(n, 0);
  const std::uint64_t full = std::uint64_t{1} << n;
  for (std::uint64_t mask = 0; mask < full; ++mask) {
    std::size_t size = static_cast<std::size_t>(__builtin_popcountll(mask));
    if (size == n) continue;
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t bit = std::uint64_t{1} << i;
      if (mask & bit) continue;
      int delta = v[mask | bit] - v[mask];
      if (delta != 0) numerators[i] += delta * weight[size];
    }
  }
  std::vector<Rational> out;
  out.reserve(n);
  std::int64_t denominator = factorial(n);
  for (auto num : numerators) out.emplace_back(num, denominator);
  return out;
}

inline void check_cap(std::size_t players, std::size_t cap, const char* what) {
  std::size_t limit = std::min(cap, kMaxEnumerablePlayers);
  if (players > limit) {
    throw CapError(std::string("exact enumeration over ") + std::to_string(players) + " " +
                   what + " exceeds the cap of " + std::to_string(limit));
  }
}

// Uniform integer in [0, n) by rejection, so results do not depend on the
// standard library's distribution implementation.
inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  const std::uint64_t range = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<std::size_t>(x % range);
}

inline std::mt19937_64 player_stream(std::uint64_t seed, std::size_t player) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(player),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(player) >> 32)};
  return std::mt19937_64(seq);
}

// Empirical column distribution as parallel arrays for weighted draws.
struct ColumnSampler {
  std::vector<Value> values;
  std::vector<std::size_t> cumulative;

  explicit ColumnSampler(const ColumnDistribution& dist) {
    std::size_t running = 0;
    for (const auto& [value, count] : dist.weights) {
      running += count;
      values.push_back(value);
      cumulative.push_back(running);
    }
  }

  Value draw(std::mt19937_64& rng) const {
    if (values.empty()) return Value::null();
    std::size_t x = uniform_index(rng, cumulative.back());
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), x);
    return values[static_cast<std::size_t>(it - cumulative.begin())];
  }
};

}  // namespace detail

// Players of the cell game: every cell except the target, canonical order.
inline std::vector<CellRef> cell_players(const RepairTask& task) {
  std::vector<CellRef> players;
  for (auto& ref : task.dirty.all_cells()) {
    if (ref != task.target) players.push_back(std::move(ref));
  }
  return players;
}

// Exact Shapley values of the constraints. Evaluates the indicator once per
// subset of the constraint set (2^|C| calls).
template <RepairCallable Alg>
ConstraintShapleyReport shapley_constraints(const Alg& alg, const RepairTask& task,
                                            std::size_t cap = kDefaultEnumerationCap) {
  const std::size_t n = task.constraints.size();
  detail::check_cap(n, cap, "constraints");
  const std::uint64_t full = std::uint64_t{1} << n;
  std::vector<int> v(full);
  std::vector<DenialConstraint> subset;
  for (std::uint64_t mask = 0; mask < full; ++mask) {
    subset.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (std::uint64_t{1} << i)) subset.push_back(task.constraints[i]);
    }
    v[mask] = indicator(alg, task, subset, task.dirty);
  }

  ConstraintShapleyReport report{task, {}, detail::shapley_from_coalitions(n, v),
                                 "exact-enumeration", static_cast<std::size_t>(full)};
  for (const auto& dc : task.constraints) report.players.push_back(dc.id);
  return report;
}

// Exact Shapley values of the non-target cells under null masking. Evaluates
// the indicator once per coalition (2^(cells-1) calls).
template <RepairCallable Alg>
CellShapleyReport shapley_cells_exact(const Alg& alg, const RepairTask& task,
                                      std::size_t cap = kDefaultEnumerationCap) {
  std::vector<CellRef> players = cell_players(task);
  const std::size_t n = players.size();
  detail::check_cap(n, cap, "cells");

  std::vector<std::pair<std::size_t, std::size_t>> positions;
  for (const auto& p : players) positions.push_back(task.dirty.locate(p));

  const std::uint64_t full = std::uint64_t{1} << n;
  std::vector<int> v(full);
  Table variant = task.dirty;
  for (std::uint64_t mask = 0; mask < full; ++mask) {
    for (std::size_t i = 0; i < n; ++i) {
      auto [r, c] = positions[i];
      bool present = mask & (std::uint64_t{1} << i);
      variant.set(r, c, present ? task.dirty.at(r, c) : Value::null());
    }
    v[mask] = indicator(alg, task, task.constraints, variant);
  }

  CellShapleyReport report;
  report.task = task;
  report.players = std::move(players);
  report.exact = detail::shapley_from_coalitions(n, v);
  for (const auto& r : report.exact) report.values.push_back(to_double(r));
  report.method = "exact-enumeration";
  report.imputation = Imputation::kNull;
  report.evaluations = static_cast<std::size_t>(full);
  return report;
}

// Monte-Carlo permutation estimate of the cell Shapley values. For each
// player and each of `samples` iterations: draw a uniform permutation of the
// players; the players before it form the coalition; every other player is
// imputed; the player's marginal contribution is the indicator with its
// original value minus the indicator with an imputed value.
//
// Each player draws from its own generator seeded by (seed, player index),
// so the report does not depend on the worker count.
template <RepairCallable Alg>
CellShapleyReport shapley_cells_sampled(const Alg& alg, const RepairTask& task,
                                        const SamplingOptions& options) {
  if (options.samples == 0) throw ArgError("sample count must be at least 1");

  std::vector<CellRef> players = cell_players(task);
  const std::size_t n = players.size();
  std::vector<std::pair<std::size_t, std::size_t>> positions;
  for (const auto& p : players) positions.push_back(task.dirty.locate(p));

  std::vector<detail::ColumnSampler> samplers;
  for (const auto& attr : task.dirty.schema()) {
    samplers.emplace_back(column_distribution(task.dirty, attr));
  }

  struct Tally {
    std::int64_t sum = 0;
    std::int64_t sum_sq = 0;
    std::size_t evaluations = 0;
  };
  std::vector<Tally> tallies(n);

  auto estimate_player = [&](std::size_t p, Table& work) {
    std::mt19937_64 rng = detail::player_stream(options.seed, p);
    std::vector<std::size_t> order(n);
    std::vector<bool> in_coalition(n);
    std::vector<Value> imputed(n);
    Tally tally;
    for (std::size_t it = 0; it < options.samples; ++it) {
      for (std::size_t i = 0; i < n; ++i) order[i] = i;
      for (std::size_t i = n; i > 1; --i) {
        std::swap(order[i - 1], order[detail::uniform_index(rng, i)]);
      }
      std::fill(in_coalition.begin(), in_coalition.end(), false);
      for (std::size_t k = 0; k < n && order[k] != p; ++k) in_coalition[order[k]] = true;

      for (std::size_t q = 0; q < n; ++q) {
        if (in_coalition[q]) continue;
        auto [r, c] = positions[q];
        imputed[q] = options.imputation == Imputation::kNull ? Value::null()
                                                              : samplers[c].draw(rng);
        if (q != p) work.set(r, c, imputed[q]);
      }

      auto [pr, pc] = positions[p];
      int delta = 0;
      if (imputed[p] != task.dirty.at(pr, pc)) {
        int with = indicator(alg, task, task.constraints, work);
        work.set(pr, pc, imputed[p]);
        int without = indicator(alg, task, task.constraints, work);
        work.set(pr, pc, task.dirty.at(pr, pc));
        tally.evaluations += 2;
        delta = with - without;
      }
      tally.sum += delta;
      tally.sum_sq += delta * delta;

      for (std::size_t q = 0; q < n; ++q) {
        if (in_coalition[q] || q == p) continue;
        auto [r, c] = positions[q];
        work.set(r, c, task.dirty.at(r, c));
      }
    }
    tallies[p] = tally;
  };

  unsigned workers = options.workers == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                          : options.workers;
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(n, 1)));

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    Table work = task.dirty;
    while (!failed.load()) {
      std::size_t p = next.fetch_add(1);
      if (p >= n) break;
      try {
        estimate_player(p, work);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);

  CellShapleyReport report;
  report.task = task;
  report.players = std::move(players);
  report.method = "permutation-sampling";
  report.imputation = options.imputation;
  report.samples = options.samples;
  report.seed = options.seed;
  const double m = static_cast<double>(options.samples);
  for (const auto& t : tallies) {
    double mean = static_cast<double>(t.sum) / m;
    double se = 0;
    if (options.samples > 1) {
      double var = (static_cast<double>(t.sum_sq) - m * mean * mean) / (m - 1);
      se = std::sqrt(std::max(0.0, var) / m);
    }
    report.values.push_back(mean);
    report.std_errors.push_back(se);
    report.evaluations += t.evaluations;
  }
  return report;
}

// Descending by value; equal values keep the canonical order of `players`.
template <class Player, class Score>
std::vector<RankedPlayer<Player>> rank_players(const std::vector<Player>& players,
                                               const std::vector<Score>& scores) {
  std::vector<std::size_t> idx(players.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return scores[b] < scores[a]; });
  std::vector<RankedPlayer<Player>> out;
  out.reserve(idx.size());
  for (auto i : idx) {
    double value;
    if constexpr (std::is_same_v<Score, Rational>) {
      value = to_double(scores[i]);
    } else {
      value = static_cast<double>(scores[i]);
    }
    out.push_back({players[i], value});
  }
  return out;
}

// Constraints ranked by exact value, ties broken by id.
inline std::vector<RankedPlayer<std::string>> rank(const ConstraintShapleyReport& report) {
  std::vector<std::size_t> idx(report.players.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return report.players[a] < report.players[b];
  });
  std::vector<std::string> players;
  std::vector<Rational> values;
  for (auto i : idx) {
    players.push_back(report.players[i]);
    values.push_back(report.values[i]);
  }
  return rank_players(players, values);
}

// Cells ranked by value (exact when available), ties in row-major order.
inline std::vector<RankedPlayer<CellRef>> rank(const CellShapleyReport& report) {
  if (report.is_exact() && report.exact.size() == report.players.size()) {
    return rank_players(report.players, report.exact);
  }
  return rank_players(report.players, report.values);
}

}  // namespace dcshap

#endif  // DCSHAP_SHAPLEY_HPP
