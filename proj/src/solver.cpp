#include "cbvf/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cbvf/errors.hpp"
#include "cbvf/parallel.hpp"

namespace cbvf {

namespace {

// Snapshot times closer than this are considered identical.
constexpr double kTimeMatch = 1e-9;

void require_same_grid(const Grid& a, const Grid& b, const char* what) {
  if (!a.same_layout(b)) throw ConfigError(std::string(what) + ": grids do not match");
}

// Chunked max-reduction over [0, n); max is exact, so the result does not
// depend on the chunking.
template <typename Body>
double parallel_max(std::size_t n, Body&& body) {
  std::vector<double> partial(chunk_count(n), -std::numeric_limits<double>::infinity());
  parallel_chunks(n, [&](std::size_t c, std::size_t begin, std::size_t end) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = begin; i < end; ++i) m = std::max(m, body(i));
    partial[c] = m;
  });
  return *std::max_element(partial.begin(), partial.end());
}

}  // namespace

void SolverConfig::validate() const {
  if (!(cfl > 0.0 && cfl <= 1.0)) throw ConfigError("solver cfl must be in (0, 1]");
  if (!(gamma >= 0.0)) throw ConfigError("solver gamma must be non-negative");
  if (!(dt_max > 0.0)) throw ConfigError("solver dt_max must be positive");
  if (!(convergence_tol > 0.0)) throw ConfigError("solver convergence_tol must be positive");
  if (!(max_time > 0.0)) throw ConfigError("solver max_time must be positive");
  if (!(snapshot_interval > 0.0)) throw ConfigError("solver snapshot_interval must be positive");
}

nlohmann::json SolveReport::to_json() const {
  return {{"iterations", iterations},
          {"final_time", final_time},
          {"converged", converged},
          {"time_step", time_step},
          {"residual_history", residual_history},
          {"monotonicity_violation", monotonicity_violation},
          {"conservativeness_violation", conservativeness_violation},
          {"monotone_nodes", monotone_nodes},
          {"conservative_nodes", conservative_nodes},
          {"snapshot_times", snapshot_times},
          {"safe_node_counts", safe_node_counts}};
}

HamiltonianResult optimal_hamiltonian(const ControlAffineSystem& system, const Vec& x,
                                      const Vec& p) {
  const Vec f = system.drift(x);
  const Mat g = system.actuation(x);
  const Vec s = g.transpose() * p;
  HamiltonianResult out{p.dot(f), Vec(s.size())};
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double u = s[i] > 0.0 ? system.input_hi()[i] : system.input_lo()[i];
    out.input[i] = u;
    out.value += s[i] * u;
  }
  return out;
}

DpOperator::DpOperator(const ControlAffineSystem& system, const ValueField& constraint,
                       SolverConfig config)
    : config_(config),
      constraint_(constraint),
      state_dim_(system.state_dim()),
      input_dim_(system.input_dim()) {
  config_.validate();
  const Grid& grid = constraint_.grid;
  if (grid.dim() != state_dim_) throw ConfigError("grid and system dimensions differ");
  for (double v : constraint_.values) {
    if (!std::isfinite(v)) throw ConfigError("constraint samples must be finite");
  }
  const std::size_t n = state_dim_;
  const std::size_t m = input_dim_;
  drift_.resize(grid.size() * n);
  actuation_.resize(grid.size() * n * m);
  for (std::size_t i = 0; i < m; ++i) {
    input_lo_.push_back(system.input_lo()[static_cast<Eigen::Index>(i)]);
    input_hi_.push_back(system.input_hi()[static_cast<Eigen::Index>(i)]);
  }
  dissipation_.assign(n, 0.0);
  node_dissipation_.resize(grid.size() * n);
  for (std::size_t node = 0; node < grid.size(); ++node) {
    const Vec x = grid.node(node);
    const Vec f = system.drift(x);
    const Mat g = system.actuation(x);
    if (!f.allFinite() || !g.allFinite()) throw NonFiniteError("non-finite dynamics", x);
    for (std::size_t j = 0; j < n; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      drift_[node * n + j] = f[jj];
      double hi = f[jj];
      double lo = f[jj];
      for (std::size_t i = 0; i < m; ++i) {
        const double gji = g(jj, static_cast<Eigen::Index>(i));
        actuation_[node * n * m + j * m + i] = gji;
        hi += std::max(gji * input_lo_[i], gji * input_hi_[i]);
        lo += std::min(gji * input_lo_[i], gji * input_hi_[i]);
      }
      const double bound = std::max(std::abs(hi), std::abs(lo));
      node_dissipation_[node * n + j] = bound;
      dissipation_[j] = std::max(dissipation_[j], bound);
    }
  }
  if (config_.dissipation == Dissipation::Global) {
    for (std::size_t node = 0; node < grid.size(); ++node) {
      std::copy(dissipation_.begin(), dissipation_.end(), node_dissipation_.begin() + node * n);
    }
  }
  double rate = 0.0;
  for (std::size_t node = 0; node < grid.size(); ++node) {
    double r = 0.0;
    for (std::size_t j = 0; j < n; ++j) r += node_dissipation_[node * n + j] / grid.spacing(j);
    rate = std::max(rate, r);
  }
  stable_step_ = rate > 0.0 ? std::min(config_.dt_max, config_.cfl / rate) : config_.dt_max;
}

double DpOperator::euler(std::span<const double> in, std::span<double> out, double dt) const {
  const Grid& grid = constraint_.grid;
  const std::size_t n = state_dim_;
  const std::size_t m = input_dim_;
  const double gamma = config_.gamma;
  return parallel_max(grid.size(), [&](std::size_t node) {
    std::array<double, Grid::kMaxDim> avg{};
    double ham = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const auto [left, right] = upwind_difference(grid, in, node, k, config_.boundary);
      avg[k] = 0.5 * (left + right);
      ham += 0.5 * node_dissipation_[node * n + k] * (right - left) + avg[k] * drift_[node * n + k];
    }
    const double* g = &actuation_[node * n * m];
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += avg[k] * g[k * m + i];
      ham += std::max(s * input_lo_[i], s * input_hi_[i]);
    }
    const double b = in[node];
    const double next = std::min(constraint_.values[node], b + dt * (ham + gamma * b));
    out[node] = next;
    if (!std::isfinite(next)) return std::numeric_limits<double>::infinity();
    return std::abs(next - b);
  });
}

double DpOperator::step(std::span<const double> in, std::span<double> out, double dt) const {
  if (config_.accuracy == Accuracy::Euler) return euler(in, out, dt);
  // Heun / TVD-RK2: average of the input and two chained Euler stages.
  stage_.resize(in.size());
  euler(in, stage_, dt);
  euler(stage_, out, dt);
  const auto& ell = constraint_.values;
  return parallel_max(in.size(), [&](std::size_t i) {
    out[i] = std::min(ell[i], 0.5 * (in[i] + out[i]));
    if (!std::isfinite(out[i])) return std::numeric_limits<double>::infinity();
    return std::abs(out[i] - in[i]);
  });
}

ValueField lax_friedrichs_step(const ControlAffineSystem& system, const ValueField& field,
                               const ValueField& constraint, const SolverConfig& config) {
  require_same_grid(field.grid, constraint.grid, "lax_friedrichs_step");
  const DpOperator op(system, constraint, config);
  std::vector<double> out(field.values.size());
  const double change = op.step(field.values, out, op.stable_step());
  if (!std::isfinite(change)) throw DivergenceError(1, "non-finite value after one step");
  return ValueField(field.grid, std::move(out), field.time - op.stable_step());
}

SolveResult solve(const ControlAffineSystem& system, const ValueField& init,
                  const ValueField& constraint, const SolverConfig& config,
                  const SolveOptions& options) {
  config.validate();
  require_same_grid(init.grid, constraint.grid, "solve");
  if (init.time != 0.0) throw ConfigError("solve expects an initial field at time 0");
  if (options.reference) require_same_grid(init.grid, options.reference->grid, "solve reference");
  for (double v : init.values) {
    if (!std::isfinite(v)) throw ConfigError("initial field must be finite");
  }

  const DpOperator op(system, constraint, config);
  const std::size_t size = init.grid.size();
  const auto& ell = constraint.values;

  SolveResult result{init, {}, {}};
  SolveReport& report = result.report;
  report.time_step = op.stable_step();

  // Nodes that may only decrease: h >= B* with a reference, else h >= l
  // (which implies h >= B* since B* <= l).
  std::vector<double> clamped(size);
  for (std::size_t i = 0; i < size; ++i) clamped[i] = std::min(init.values[i], ell[i]);
  std::vector<char> monotone_mask(size, 0);
  std::vector<char> conservative_mask(size, 0);
  for (std::size_t i = 0; i < size; ++i) {
    const double bound = options.reference ? options.reference->values[i] : ell[i];
    monotone_mask[i] = clamped[i] >= bound;
    conservative_mask[i] = options.reference && clamped[i] <= bound;
  }
  report.monotone_nodes = static_cast<std::size_t>(
      std::count(monotone_mask.begin(), monotone_mask.end(), 1));
  report.conservative_nodes = static_cast<std::size_t>(
      std::count(conservative_mask.begin(), conservative_mask.end(), 1));

  auto emit = [&](const ValueField& f) {
    report.snapshot_times.push_back(f.time);
    report.safe_node_counts.push_back(safe_node_count(f));
    if (options.on_snapshot) options.on_snapshot(f);
    if (options.keep_snapshots) result.snapshots.push_back(f);
  };
  emit(ValueField(init.grid, clamped, 0.0));

  std::vector<double> current = clamped;
  std::vector<double> next(size);

  double t = 0.0;
  std::size_t checkpoint = 1;
  bool pending_verification = false;
  const double horizon = -config.max_time;
  while (t > horizon) {
    const double checkpoint_time = -static_cast<double>(checkpoint) * config.snapshot_interval;
    double dt = op.stable_step();
    bool at_checkpoint = false;
    if (t - dt <= checkpoint_time + kTimeMatch) {
      dt = t - checkpoint_time;
      at_checkpoint = true;
    }
    bool at_horizon = false;
    if (t - dt <= horizon + kTimeMatch) {
      dt = t - horizon;
      at_horizon = true;
      at_checkpoint = std::abs(horizon - checkpoint_time) <= kTimeMatch;
    }

    const double change = op.step(current, next, dt);
    ++report.iterations;
    if (!std::isfinite(change)) throw DivergenceError(report.iterations, "non-finite value");

    double increase = -std::numeric_limits<double>::infinity();
    double excess = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < size; ++i) {
      if (monotone_mask[i]) increase = std::max(increase, next[i] - current[i]);
      if (conservative_mask[i]) excess = std::max(excess, next[i] - options.reference->values[i]);
    }
    report.monotonicity_violation = std::max(report.monotonicity_violation, increase);
    report.conservativeness_violation = std::max(report.conservativeness_violation, excess);

    const double residual = change / dt;
    report.residual_history.push_back(residual);
    current.swap(next);
    t = at_checkpoint ? checkpoint_time : (at_horizon ? horizon : t - dt);

    if (at_checkpoint) {
      emit(ValueField(init.grid, current, t));
      ++checkpoint;
    }
    if (residual < config.convergence_tol) {
      if (pending_verification) {
        report.converged = true;
        break;
      }
      pending_verification = true;
    } else {
      pending_verification = false;
    }
    if (at_horizon) break;
  }
  report.final_time = t;
  result.field = ValueField(init.grid, std::move(current), t);
  return result;
}

Theorem1Monitor::Theorem1Monitor(std::span<const ValueField> vanilla) : vanilla_(vanilla) {
  result_.max_excess = -std::numeric_limits<double>::infinity();
}

void Theorem1Monitor::observe(const ValueField& w) {
  for (const auto& v : vanilla_) {
    require_same_grid(w.grid, v.grid, "check_theorem1");
    if (std::abs(w.time - v.time) > kTimeMatch) continue;
    ++result_.matched_snapshots;
    for (std::size_t i = 0; i < w.values.size(); ++i) {
      result_.max_excess = std::max(result_.max_excess, w.values[i] - v.values[i]);
    }
    return;
  }
}

Theorem1Check check_theorem1(std::span<const ValueField> warm, std::span<const ValueField> vanilla) {
  Theorem1Monitor monitor(vanilla);
  for (const auto& w : warm) monitor.observe(w);
  return monitor.result();
}

Theorem2Monitor::Theorem2Monitor(const ValueField& reference) : reference_(reference) {
  const double lowest = -std::numeric_limits<double>::infinity();
  result_.theorem2_excess = result_.lemma1_excess = result_.lemma2_excess = lowest;
}

void Theorem2Monitor::observe(const ValueField& w) {
  require_same_grid(w.grid, reference_.grid, "check_theorem2");
  const auto& ref = reference_.values;
  const auto& cur = w.values;
  if (result_.snapshots == 0) {
    initial_ = cur;
    for (std::size_t i = 0; i < cur.size(); ++i) {
      result_.lemma1_nodes += cur[i] <= ref[i];
      result_.lemma2_nodes += cur[i] >= ref[i];
    }
  }
  for (std::size_t i = 0; i < cur.size(); ++i) {
    if (initial_[i] <= ref[i]) result_.lemma1_excess = std::max(result_.lemma1_excess, cur[i] - ref[i]);
  }
  if (result_.snapshots > 0) {
    for (std::size_t i = 0; i < cur.size(); ++i) {
      result_.theorem2_excess =
          std::max(result_.theorem2_excess, cur[i] - std::max(ref[i], previous_[i]));
      if (initial_[i] >= ref[i]) {
        result_.lemma2_excess = std::max(result_.lemma2_excess, cur[i] - previous_[i]);
      }
    }
  }
  previous_ = cur;
  ++result_.snapshots;
}

Theorem2Check check_theorem2(std::span<const ValueField> warm, const ValueField& reference) {
  Theorem2Monitor monitor(reference);
  for (const auto& w : warm) monitor.observe(w);
  return monitor.result();
}

}  // namespace cbvf
