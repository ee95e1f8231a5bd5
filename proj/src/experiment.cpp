#include "cbvf/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numbers>
#include <set>

#include <spdlog/spdlog.h>

#include "cbvf/errors.hpp"

namespace cbvf {

MemoryLimitError::MemoryLimitError(std::size_t requested, std::size_t limit)
    : std::runtime_error("grid allocation needs " + std::to_string(requested) + " bytes but " +
                         kMemoryLimitVariable + " allows " + std::to_string(limit)),
      requested_(requested),
      limit_(limit) {}

std::size_t estimate_solver_bytes(const Grid& grid, std::size_t input_dim, std::size_t fields) {
  const std::size_t per_node = fields + grid.dim() + grid.dim() * input_dim;
  const std::size_t nodes = grid.size();
  if (nodes > std::numeric_limits<std::size_t>::max() / sizeof(double) / per_node) {
    return std::numeric_limits<std::size_t>::max();
  }
  return nodes * per_node * sizeof(double);
}

void enforce_memory_limit(std::size_t bytes) {
  const char* raw = std::getenv(kMemoryLimitVariable);
  if (!raw || !*raw) return;
  char* end = nullptr;
  const unsigned long long limit = std::strtoull(raw, &end, 10);
  if (!end || *end != '\0') {
    throw ConfigError(std::string(kMemoryLimitVariable) + " must be a byte count, got '" + raw + "'");
  }
  if (bytes > limit) throw MemoryLimitError(bytes, static_cast<std::size_t>(limit));
}

ControlAffineSystem build_system(const SystemSpec& spec) {
  if (spec.name == "acc") return acc_system(spec.acc);
  if (spec.name == "dubins") return dubins_system(spec.dubins_speed);
  if (spec.name == "quadrotor") return planar_quadrotor_system(spec.quadrotor);
  if (spec.name == "pendulum") return inverted_pendulum_system(spec.pendulum);
  throw ConfigError("unknown system '" + spec.name + "'");
}

namespace {

std::vector<std::string> default_axis_names(std::size_t n) {
  std::vector<std::string> names;
  for (std::size_t k = 0; k < n; ++k) names.push_back("x" + std::to_string(k));
  return names;
}

}  // namespace

Grid build_grid(const GridSpec& spec) {
  auto names = spec.axis_names.empty() ? default_axis_names(spec.lo.size()) : spec.axis_names;
  return Grid(spec.lo, spec.hi, spec.counts, spec.periodic, std::move(names));
}

ScalarStateFunction build_constraint(const ConstraintSpec& spec) {
  if (spec.type == "acc") return acc_constraint(spec.look_ahead);
  if (spec.type == "ellipse") {
    return ellipse_constraint({spec.center[0], spec.center[1]}, {spec.semi_axes[0], spec.semi_axes[1]});
  }
  if (spec.type == "slab") return slab_constraint(spec.axis, spec.floor, spec.ceiling);
  throw ConfigError("unknown constraint type '" + spec.type + "'");
}

namespace {

class NominalParams {
 public:
  explicit NominalParams(const NominalSpec& spec) : spec_(spec) {}

  void expect(const std::set<std::string>& known) const {
    for (const auto& [key, value] : spec_.params) {
      if (!known.contains(key)) fail("unknown parameter nominal." + key);
    }
  }

  double scalar(const std::string& key, double fallback) const {
    const auto it = spec_.params.find(key);
    if (it == spec_.params.end()) return fallback;
    if (it->second.size() != 1) fail("nominal." + key + " expects one number");
    return it->second[0];
  }

  Vec vector(const std::string& key, const Vec& fallback) const {
    const auto it = spec_.params.find(key);
    if (it == spec_.params.end()) return fallback;
    if (static_cast<Eigen::Index>(it->second.size()) != fallback.size()) {
      fail("nominal." + key + " expects " + std::to_string(fallback.size()) + " numbers");
    }
    return Eigen::Map<const Vec>(it->second.data(), fallback.size());
  }

  [[noreturn]] void fail(const std::string& message) const {
    throw ConfigError(spec_.source + ":" + std::to_string(spec_.line) + ": [filter] " + message);
  }

 private:
  const NominalSpec& spec_;
};

}  // namespace

Policy build_nominal(const NominalSpec& spec, const SystemSpec& system) {
  const NominalParams params(spec);
  const ControlAffineSystem sys = build_system(system);
  const auto require = [&](const char* name) {
    if (system.name != name) {
      params.fail("nominal " + spec.name + " is defined for system " + name + ", not " + system.name);
    }
  };
  if (spec.name == "zero") {
    params.expect({});
    const auto m = static_cast<Eigen::Index>(sys.input_dim());
    return [m](const Vec&) { return Vec::Zero(m).eval(); };
  }
  if (spec.name == "speed_tracker") {
    require("acc");
    params.expect({"gain", "desired_speed"});
    const AccParams p = system.acc;
    const double gain = params.scalar("gain", 1.0);
    const double target = params.scalar("desired_speed", p.desired_speed);
    if (!(gain > 0.0)) params.fail("nominal.gain must be positive");
    return [p, gain, target](const Vec& x) {
      Vec u(1);
      u << p.friction(x[0]) + p.mass * gain * (target - x[0]);
      return u;
    };
  }
  if (spec.name == "goal_heading") {
    require("dubins");
    params.expect({"goal", "gain"});
    const Vec goal = params.vector("goal", Vec::Zero(2));
    const double gain = params.scalar("gain", 1.0);
    if (!(gain > 0.0)) params.fail("nominal.gain must be positive");
    return [goal, gain](const Vec& x) {
      const double heading = std::atan2(goal[1] - x[1], goal[0] - x[0]);
      Vec u(1);
      u << gain * std::remainder(heading - x[2], 2.0 * std::numbers::pi);
      return u;
    };
  }
  if (spec.name == "lqr_hover") {
    require("quadrotor");
    params.expect({"target", "q_diag", "r_diag"});
    const Vec target = params.vector("target", Vec::Zero(4));
    const Vec q = params.vector("q_diag", Vec::Ones(4));
    const Vec r = params.vector("r_diag", Vec::Ones(2));
    if ((q.array() < 0.0).any()) params.fail("nominal.q_diag entries must be non-negative");
    if ((r.array() <= 0.0).any()) params.fail("nominal.r_diag entries must be positive");
    const Vec trim = trim_input(sys, target);
    const Linearization lin = linearize(sys, target, trim);
    const LqrSolution lqr = solve_lqr(lin.A, lin.B, q.asDiagonal(), r.asDiagonal());
    const Mat K = lqr.K;
    return [sys, target, trim, K](const Vec& x) -> Vec { return trim + K * sys.difference(x, target); };
  }
  if (spec.name == "pd_angle") {
    require("pendulum");
    params.expect({"target", "kp", "kd"});
    const double target = params.scalar("target", 0.0);
    const double kp = params.scalar("kp", 10.0);
    const double kd = params.scalar("kd", 2.0);
    return [target, kp, kd](const Vec& x) {
      Vec u(1);
      u << -kp * (x[0] - target) - kd * x[1];
      return u;
    };
  }
  params.fail("unknown nominal policy '" + spec.name + "'");
}

Experiment build_experiment(const ExperimentConfig& config) {
  ControlAffineSystem system = build_system(config.system);
  Grid grid = build_grid(config.grid);
  enforce_memory_limit(estimate_solver_bytes(grid, system.input_dim(), 5));
  for (std::size_t k = 0; k < grid.dim(); ++k) {
    if (!grid.is_periodic(k)) continue;
    bool matched = false;
    for (const auto& p : system.periodic()) {
      matched |= p.index == k && std::abs(p.lo - grid.lo()[k]) < 1e-9 &&
                 std::abs(p.hi - grid.hi()[k]) < 1e-9;
    }
    if (!matched) {
      config.document.section("grid").fail(
          "periodic", "axis " + std::to_string(k) + " is periodic but the system has no matching period");
    }
  }
  ScalarStateFunction constraint = build_constraint(config.constraint);
  ValueField constraint_field = sample(grid, constraint.evaluate);

  ValueField candidate = constraint_field;
  Provenance provenance = Provenance::Constraint;
  bool conservative = false;
  const CandidateSpec& c = config.candidate;
  if (c.type == "analytic") {
    AccParams p = config.system.acc;
    p.look_ahead = config.constraint.look_ahead;
    const ScalarStateFunction h = acc_analytic_cbf(p);
    candidate = sample(grid, h.evaluate);
    provenance = h.provenance;
    conservative = h.conservative;
  } else if (c.type == "lyapunov") {
    const Vec point = Eigen::Map<const Vec>(c.point.data(), static_cast<Eigen::Index>(c.point.size()));
    const Vec q = Eigen::Map<const Vec>(c.q_diag.data(), static_cast<Eigen::Index>(c.q_diag.size()));
    const Vec r = Eigen::Map<const Vec>(c.r_diag.data(), static_cast<Eigen::Index>(c.r_diag.size()));
    const LyapunovCbf h = lyapunov_cbf(system, point, q.asDiagonal(), r.asDiagonal(), c.level);
    candidate = sample(grid, h.function.evaluate);
    provenance = h.function.provenance;
    conservative = h.function.conservative;
  } else if (c.type == "backup") {
    const PendulumBackup backup = pendulum_lqr_backup(system, c.horizon, c.eval_dt, c.level);
    candidate = backup_cbf(system, backup.spec, constraint, grid);
    provenance = Provenance::BackupCbf;
    conservative = true;
  }
  // Backup rollouts that fall away make the terminal term arbitrarily
  // negative. With gamma = 0 the vanilla solve never drops below min l, so
  // values under it are raised to it.
  const double floor = *std::min_element(constraint_field.values.begin(), constraint_field.values.end());
  if (c.type == "backup" && config.solver.gamma == 0.0 && floor < 0.0) {
    std::size_t raised = 0;
    for (double& v : candidate.values) {
      if (v < floor) {
        v = floor;
        ++raised;
      }
    }
    if (raised > 0) spdlog::info("raised {} candidate values to min l = {}", raised, floor);
  }
  if (conservative) {
    const std::size_t bad = sign_consistency_violations(candidate, constraint_field);
    if (bad > 0) {
      spdlog::warn("candidate flagged conservative is non-negative at {} nodes where l < 0", bad);
    }
  }
  Policy nominal = build_nominal(config.filter.nominal, config.system);
  return Experiment{config,
                    std::move(system),
                    std::move(grid),
                    std::move(constraint),
                    std::move(constraint_field),
                    std::move(candidate),
                    provenance,
                    conservative,
                    std::move(nominal)};
}

FilterProblem build_filter(const Experiment& experiment, std::shared_ptr<const ValueField> field) {
  const FilterSpec& f = experiment.config.filter;
  Mat weight;
  if (!f.r_diag.empty()) {
    weight = Eigen::Map<const Vec>(f.r_diag.data(), static_cast<Eigen::Index>(f.r_diag.size()))
                 .asDiagonal();
  }
  return FilterProblem(std::move(field), experiment.system, f.gamma_online, weight, f.mode);
}

}  // namespace cbvf
