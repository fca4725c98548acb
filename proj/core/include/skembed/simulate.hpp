#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "skembed/law.hpp"
#include "skembed/transform.hpp"

namespace skembed {

enum class Scheme { skew_walk, time_change };

struct SimConfig {
  double dx = 0.01;            // spatial step; the time step is dx^2
  std::int64_t n_paths = 200000;
  std::uint64_t seed = 1;
  std::int64_t max_steps = 50000000;
  std::vector<double> record_levels;
  Scheme scheme = Scheme::skew_walk;
  int threads = 0;  // 0: hardware concurrency
};

enum class StopSide : std::uint8_t { upper, lower, terminal, unfinished };

struct PathResult {
  double B_T = 0.0;
  double L_T = 0.0;
  double sup_B = 0.0;
  double inf_B = 0.0;
  std::int64_t steps = 0;
  StopSide side = StopSide::unfinished;
};

/// Per-path outputs of a simulation run. Level statistics are stored
/// flattened as paths x levels, in path-major order.
struct PathEnsemble {
  SimConfig config;
  std::vector<PathResult> paths;
  std::vector<double> levels;
  std::vector<std::uint32_t> level_visits;
  std::vector<std::uint32_t> level_crossings;  // sign changes of B - x, sgn(0) = +
  std::vector<std::uint8_t> level_hit;         // touched strictly before the stop

  double unfinished_fraction() const;
  std::size_t level_index(double x) const;  // throws ConfigError when absent
};

/// Lattice walk of the variably skewed motion under the stopping rule:
/// off zero the walk is symmetric; each visit to zero first accrues dx of
/// local time, then leaves upward with probability p(l). Stops are recorded
/// at the exact barrier values; paths that exhaust l_max stop at the
/// terminal location.
PathEnsemble simulate_paths(const EmbeddingSpec& spec, const SimConfig& config);

/// Tabulated machinery of the time-change construction: v solves
/// v' = sqrt(2/(1+G'^2)), y is its inverse, n = (y - G(y))/2, m = (y + G(y))/2.
struct TimeChangeAux {
  std::vector<double> x;            // transformed local-time knots
  std::vector<double> y, n, m;      // values at the knots
  std::vector<double> yp, np, mp;   // per-interval derivatives
  double y_at(double v) const;
  double n_at(double v) const;
  double m_at(double v) const;
  std::size_t interval(double v) const;
};

TimeChangeAux build_time_change_aux(const std::vector<double>& l_knots,
                                    const std::vector<double>& G_knots);

/// Weak-solution sampler: drive an auxiliary lattice walk, accumulate the
/// quadratic-variation clock A, and read the skewed state (X, L) when A
/// crosses t_clock.
std::vector<std::pair<double, double>> simulate_time_change(const std::vector<double>& l_knots,
                                                            const std::vector<double>& G_knots,
                                                            const SimConfig& config,
                                                            double t_clock);

/// Barrier-free skew walk sampled at a fixed real time, for cross-scheme
/// comparisons: p(l) = (1 - G'(l))/2 from the same G table.
std::vector<std::pair<double, double>> simulate_skew_free(const std::vector<double>& l_knots,
                                                          const std::vector<double>& G_knots,
                                                          const SimConfig& config, double t_end);

struct LevelDiag {
  double x = 0.0;
  double hit_fraction = 0.0;
  double ui_value = 0.0;  // x * P(T > H_x)
};

struct StatsReport {
  double ks_BT = 0.0;
  double ks_Y = 0.0;  // H^{-1}(L_T) against the survival Gamma
  double mean_BT = 0.0, se_BT = 0.0;
  double mean_absBT = 0.0, se_absBT = 0.0;
  double c0_reference = 0.0;
  double mean_LT = 0.0;
  double unfinished_fraction = 0.0;
  std::int64_t n_finished = 0;
  std::vector<AtomCheck> atom_table;  // empirical vs analytic mass per atom
  std::vector<LevelDiag> ui;
};

/// Goodness-of-fit of a simulated ensemble against the analytic laws.
/// Requires a finished fraction above 99%.
StatsReport empirical_stats(const PathEnsemble& ensemble, const ExitLaw& law,
                            const EmbeddingSpec& spec, const TangentProfile& profile,
                            const CenteredAtomicMeasure& mu);

enum class LevelEstimator { identity, crossing };

/// Per-path estimates of the local time accumulated at level x before the
/// stop. The identity method is exact for the local_time_at_x preset
/// (L_T^x = L_T - sup B ^ x); the crossing method counts sign changes of
/// B - x scaled by dx and needs x among the recorded levels.
std::vector<double> estimate_level_local_time(const PathEnsemble& ensemble,
                                              const EmbeddingSpec& spec, double x,
                                              LevelEstimator method);

}  // namespace skembed
