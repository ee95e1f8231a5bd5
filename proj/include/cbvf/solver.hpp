#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <json.hpp>

#include "cbvf/cbf.hpp"
#include "cbvf/dynamics.hpp"
#include "cbvf/grid.hpp"

namespace cbvf {

enum class Accuracy { Euler, TvdRk2 };

/// Lax-Friedrichs dissipation: one bound per axis over the whole grid, or a
/// bound per node and axis.
enum class Dissipation { Global, Local };

struct SolverConfig {
  double gamma = 0.0;            ///< construction discount rate
  double cfl = 0.5;
  double dt_max = 0.1;
  double convergence_tol = 1e-4; ///< sup-norm change per unit pseudo-time
  double max_time = 50.0;        ///< backward pseudo-time budget (positive)
  Accuracy accuracy = Accuracy::Euler;
  double snapshot_interval = 0.1;
  Boundary boundary = Boundary::Linear;
  Dissipation dissipation = Dissipation::Global;

  void validate() const;
};

struct SolveReport {
  std::size_t iterations = 0;
  double final_time = 0.0;
  bool converged = false;
  double time_step = 0.0;
  std::vector<double> residual_history;
  /// Largest per-step increase at nodes that may only decrease (Lemma 2 regime).
  double monotonicity_violation = 0.0;
  /// Largest excess over the reference at nodes starting below it (Lemma 1
  /// regime); zero when no reference was supplied.
  double conservativeness_violation = 0.0;
  std::size_t monotone_nodes = 0;
  std::size_t conservative_nodes = 0;
  std::vector<double> snapshot_times;
  std::vector<std::size_t> safe_node_counts;

  nlohmann::json to_json() const;
};

struct HamiltonianResult {
  double value = 0.0;
  Vec input;
};

/// max over the input box of p^T (f(x) + g(x) u), with a maximiser.
HamiltonianResult optimal_hamiltonian(const ControlAffineSystem& system, const Vec& x,
                                      const Vec& costate);

/**
 * Precomputed per-node dynamics and dissipation bounds for one
 * (system, grid, constraint) triple.
 *
 * One explicit step in variational-inequality form:
 *   B(x, t - d) = min( l(x), B(x, t) + d * [ H_LF(x) + gamma * B(x, t) ] )
 * with the monotone Lax-Friedrichs Hamiltonian
 *   H_LF = H*(x, (p- + p+)/2) + sum_j a_j (p+_j - p-_j) / 2,
 * where a_j bounds |f_j + (g u)_j| over the input box, either over the
 * whole grid or at each node (Dissipation::Local).
 */
class DpOperator {
 public:
  DpOperator(const ControlAffineSystem& system, const ValueField& constraint, SolverConfig config);

  const Grid& grid() const { return constraint_.grid; }
  const ValueField& constraint() const { return constraint_; }
  const SolverConfig& config() const { return config_; }
  const std::vector<double>& dissipation() const { return dissipation_; }

  /// CFL step cfl / max_x sum_j a_j(x) / dx_j, capped at dt_max.
  double stable_step() const { return stable_step_; }

  /// Advances `in` backward by `dt` into `out`; returns max |out - in|.
  double step(std::span<const double> in, std::span<double> out, double dt) const;

 private:
  double euler(std::span<const double> in, std::span<double> out, double dt) const;

  SolverConfig config_;
  ValueField constraint_;
  std::size_t state_dim_;
  std::size_t input_dim_;
  std::vector<double> drift_;      // [node * n + j]
  std::vector<double> actuation_;  // [node * n * m + j * m + i]
  std::vector<double> input_lo_;
  std::vector<double> input_hi_;
  std::vector<double> dissipation_;       // grid-wide bound per axis
  std::vector<double> node_dissipation_;  // [node * n + j], as used by the step
  double stable_step_ = 0.0;
  mutable std::vector<double> stage_;
};

/// Single step of the scheme with the CFL time step (or dt_max when the
/// dissipation bound vanishes).
ValueField lax_friedrichs_step(const ControlAffineSystem& system, const ValueField& field,
                               const ValueField& constraint, const SolverConfig& config);

struct SolveOptions {
  /// Converged vanilla solution; enables the per-step Lemma 1/2 bookkeeping.
  const ValueField* reference = nullptr;
  bool keep_snapshots = false;
  std::function<void(const ValueField&)> on_snapshot;
};

struct SolveResult {
  ValueField field;
  SolveReport report;
  std::vector<ValueField> snapshots;
};

/**
 * Iterates the DP step from `init` (time 0) until the per-unit-time sup-norm
 * change drops below `convergence_tol` twice in a row or `max_time` elapses.
 * The field at t = 0 is min(init, l), and the t = 0 snapshot and the Lemma
 * masks use that clamped field. Snapshots are emitted at t = 0 and
 * every `snapshot_interval` of pseudo-time, so solves with different
 * initialisations compare at identical times.
 */
SolveResult solve(const ControlAffineSystem& system, const ValueField& init,
                  const ValueField& constraint, const SolverConfig& config,
                  const SolveOptions& options = {});

struct Theorem1Check {
  double max_excess = 0.0;  ///< max over matched snapshots and nodes of B_h - B_l
  std::size_t matched_snapshots = 0;
};

/// Compares warm-started and vanilla traces at shared snapshot times.
Theorem1Check check_theorem1(std::span<const ValueField> warm, std::span<const ValueField> vanilla);

struct Theorem2Check {
  /// max of B_h(t - d) - max(B*, B_h(t)) over consecutive snapshots.
  double theorem2_excess = 0.0;
  /// max of B_h(t) - B* over nodes with h <= B*.
  double lemma1_excess = 0.0;
  /// max of B_h(t - d) - B_h(t) over nodes with h >= B*.
  double lemma2_excess = 0.0;
  std::size_t lemma1_nodes = 0;
  std::size_t lemma2_nodes = 0;
  std::size_t snapshots = 0;
};

Theorem2Check check_theorem2(std::span<const ValueField> warm, const ValueField& reference);

/// Streaming form of check_theorem1: feed warm snapshots as they are produced.
class Theorem1Monitor {
 public:
  explicit Theorem1Monitor(std::span<const ValueField> vanilla);
  void observe(const ValueField& warm);
  const Theorem1Check& result() const { return result_; }

 private:
  std::span<const ValueField> vanilla_;
  Theorem1Check result_;
};

/// Streaming form of check_theorem2; the first observed snapshot is h.
class Theorem2Monitor {
 public:
  explicit Theorem2Monitor(const ValueField& reference);
  void observe(const ValueField& warm);
  const Theorem2Check& result() const { return result_; }

 private:
  const ValueField& reference_;
  std::vector<double> initial_;
  std::vector<double> previous_;
  Theorem2Check result_;
};

}  // namespace cbvf
