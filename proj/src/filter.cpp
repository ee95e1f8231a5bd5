#include "cbvf/filter.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <Eigen/Dense>
#include <spdlog/spdlog.h>

namespace cbvf {

FilterProblem::FilterProblem(std::shared_ptr<const ValueField> f, ControlAffineSystem sys,
                             double gamma, Mat r, InfeasibilityMode m)
    : field(std::move(f)), system(std::move(sys)), gamma_online(gamma), weight(std::move(r)), mode(m) {
  if (!field) throw ConfigError("filter needs a value field");
  if (field->grid.dim() != system.state_dim()) {
    throw ConfigError("filter field and system dimensions differ");
  }
  if (!(gamma_online >= 0.0)) throw ConfigError("online gamma must be non-negative");
  const auto m_in = static_cast<Eigen::Index>(system.input_dim());
  if (weight.size() == 0) weight = Mat::Identity(m_in, m_in);
  if (weight.rows() != m_in || weight.cols() != m_in) {
    throw ConfigError("filter weight must be input_dim square");
  }
  if ((weight - weight.transpose()).norm() > 1e-12 * std::max(1.0, weight.norm())) {
    throw ConfigError("filter weight must be symmetric");
  }
  if (Eigen::LLT<Mat>(weight).info() != Eigen::Success) {
    throw ConfigError("filter weight must be positive definite");
  }
}

LieDerivatives lie_derivatives(const FilterProblem& problem, const Vec& x) {
  const ValueField& field = *problem.field;
  LieDerivatives out;
  out.value = interpolate(field, x);
  const Vec p = gradient_at(field, x);
  out.lf = p.dot(problem.system.drift(x));
  out.lg = problem.system.actuation(x).transpose() * p;
  if (problem.earlier) {
    const double span = field.time - problem.earlier->time;
    if (span != 0.0) out.lf += (out.value - interpolate(*problem.earlier, x)) / span;
  }
  return out;
}

namespace {

double objective(const Vec& u, const Vec& target, const Mat& weight) {
  const Vec d = u - target;
  return d.dot(weight * d);
}

// Least-violating input: maximise lg . u over the box; channels with zero
// coefficient keep the nominal value.
Vec least_violating(const Vec& u_nom, const Vec& lg, const Vec& lo, const Vec& hi) {
  Vec u = u_nom;
  for (Eigen::Index i = 0; i < lg.size(); ++i) {
    if (lg[i] > 0.0) u[i] = hi[i];
    if (lg[i] < 0.0) u[i] = lo[i];
  }
  return u;
}

}  // namespace

FilterResult solve_filter_qp(const Vec& u_nom_raw, const Vec& lg, double offset, const Vec& lo,
                             const Vec& hi, const Mat& weight, InfeasibilityMode mode) {
  const Eigen::Index m = lg.size();
  if (u_nom_raw.size() != m || lo.size() != m || hi.size() != m) {
    throw ConfigError("filter QP dimensions disagree");
  }
  if (!u_nom_raw.allFinite()) throw ConfigError("nominal input must be finite");
  const Vec u_nom = u_nom_raw.cwiseMax(lo).cwiseMin(hi);

  FilterResult out;
  out.constraint_value = offset + lg.dot(u_nom);
  if (out.constraint_value >= 0.0) {
    out.u_star = u_nom;
    return out;
  }

  double best_reachable = offset;
  for (Eigen::Index i = 0; i < m; ++i) best_reachable += std::max(lg[i] * lo[i], lg[i] * hi[i]);
  if (best_reachable < 0.0) {
    if (mode == InfeasibilityMode::Error) {
      throw InfeasibleError("no input in the box satisfies the barrier constraint (best " +
                            std::to_string(best_reachable) + ")");
    }
    out.u_star = least_violating(u_nom, lg, lo, hi);
    out.constraint_value = offset + lg.dot(out.u_star);
    out.feasible = false;
    out.active = true;
    return out;
  }

  // Enumerate every assignment of each channel to {free, lower, upper} with
  // the barrier constraint inactive or active; the best primal-feasible
  // stationary point is the global optimum of this convex QP.
  const double scale = std::abs(offset) + lg.cwiseAbs().dot(lo.cwiseAbs().cwiseMax(hi.cwiseAbs()));
  const double slack_tol = 1e-12 * std::max(1.0, scale);
  double best = std::numeric_limits<double>::infinity();
  Vec best_u;
  std::size_t patterns = 1;
  for (Eigen::Index i = 0; i < m; ++i) patterns *= 3;
  for (std::size_t code = 0; code < patterns; ++code) {
    std::vector<Eigen::Index> free_idx;
    Vec u = u_nom;
    std::size_t c = code;
    for (Eigen::Index i = 0; i < m; ++i, c /= 3) {
      switch (c % 3) {
        case 0: free_idx.push_back(i); break;
        case 1: u[i] = lo[i]; break;
        default: u[i] = hi[i]; break;
      }
    }
    const auto nz = static_cast<Eigen::Index>(free_idx.size());
    for (int active = 0; active < 2; ++active) {
      Vec cand = u;
      if (nz > 0) {
        // Stationarity in the free block with the fixed block held:
        // R_zz (u_z - n_z) + R_zf (u_f - n_f) = lambda * a_z.
        Mat rzz(nz, nz);
        Vec rhs(nz);
        Vec az(nz);
        const Vec fixed_dev = [&] {
          Vec d = u - u_nom;
          for (auto i : free_idx) d[i] = 0.0;
          return d;
        }();
        for (Eigen::Index a = 0; a < nz; ++a) {
          az[a] = lg[free_idx[static_cast<std::size_t>(a)]];
          for (Eigen::Index b = 0; b < nz; ++b) {
            rzz(a, b) = weight(free_idx[static_cast<std::size_t>(a)],
                               free_idx[static_cast<std::size_t>(b)]);
          }
          const auto ia = free_idx[static_cast<std::size_t>(a)];
          rhs[a] = -weight.row(ia).dot(fixed_dev);
        }
        Vec uz(nz);
        if (active == 0) {
          uz = rzz.llt().solve(rhs);
          for (Eigen::Index a = 0; a < nz; ++a) uz[a] += u_nom[free_idx[static_cast<std::size_t>(a)]];
        } else {
          if (az.cwiseAbs().maxCoeff() == 0.0) continue;
          double target = -offset;
          for (Eigen::Index i = 0; i < m; ++i) {
            if (std::find(free_idx.begin(), free_idx.end(), i) == free_idx.end()) target -= lg[i] * u[i];
          }
          Mat kkt = Mat::Zero(nz + 1, nz + 1);
          kkt.topLeftCorner(nz, nz) = rzz;
          kkt.topRightCorner(nz, 1) = -az;
          kkt.bottomLeftCorner(1, nz) = az.transpose();
          Vec kkt_rhs(nz + 1);
          Vec nz_nom(nz);
          for (Eigen::Index a = 0; a < nz; ++a) nz_nom[a] = u_nom[free_idx[static_cast<std::size_t>(a)]];
          kkt_rhs.head(nz) = rhs + rzz * nz_nom;
          kkt_rhs[nz] = target;
          Eigen::FullPivLU<Mat> lu(kkt);
          if (!lu.isInvertible()) continue;
          const Vec sol = lu.solve(kkt_rhs);
          uz = sol.head(nz);
        }
        for (Eigen::Index a = 0; a < nz; ++a) cand[free_idx[static_cast<std::size_t>(a)]] = uz[a];
      } else if (active == 1) {
        continue;
      }
      const Vec box_tol = 1e-12 * (Vec::Ones(m) + lo.cwiseAbs().cwiseMax(hi.cwiseAbs()));
      if (((cand - lo).array() < -box_tol.array()).any() ||
          ((hi - cand).array() < -box_tol.array()).any()) {
        continue;
      }
      cand = cand.cwiseMax(lo).cwiseMin(hi);
      if (offset + lg.dot(cand) < -slack_tol) continue;
      const double obj = objective(cand, u_nom, weight);
      if (obj < best) {
        best = obj;
        best_u = cand;
      }
    }
  }
  if (best_u.size() == 0) {
    // Unreachable when best_reachable >= 0: the maximising vertex is feasible.
    best_u = least_violating(u_nom, lg, lo, hi);
  }
  out.u_star = best_u;
  out.constraint_value = offset + lg.dot(best_u);
  out.active = (best_u - u_nom).norm() > 1e-12 * (1.0 + u_nom.norm());
  return out;
}

FilterResult filter(const FilterProblem& problem, const Vec& x, const Vec& u_nom) {
  const LieDerivatives lie = lie_derivatives(problem, x);
  FilterResult r =
      solve_filter_qp(u_nom, lie.lg, lie.lf + problem.gamma_online * lie.value,
                      problem.system.input_lo(), problem.system.input_hi(), problem.weight,
                      problem.mode);
  if (!r.feasible) {
    spdlog::debug("filter infeasible at {}: least-violating input applied", format_state(x));
  }
  return r;
}

FeasibleInterval feasible_interval(const LieDerivatives& lie, const Vec& lo, const Vec& hi,
                                   double gamma) {
  double smin = 0.0;
  double smax = 0.0;
  for (Eigen::Index i = 0; i < lie.lg.size(); ++i) {
    smin += std::min(lie.lg[i] * lo[i], lie.lg[i] * hi[i]);
    smax += std::max(lie.lg[i] * lo[i], lie.lg[i] * hi[i]);
  }
  const double threshold = -lie.lf - gamma * lie.value;
  FeasibleInterval out;
  out.lo = std::max(smin, threshold);
  out.hi = smax;
  out.empty = threshold > smax;
  return out;
}

bool gamma_monotonicity_check(const FilterProblem& problem, const Vec& x, double gamma_low,
                              double gamma_high) {
  if (gamma_low > gamma_high) throw ConfigError("gamma_low must not exceed gamma_high");
  const LieDerivatives lie = lie_derivatives(problem, x);
  const auto& lo = problem.system.input_lo();
  const auto& hi = problem.system.input_hi();
  const FeasibleInterval narrow = feasible_interval(lie, lo, hi, gamma_low);
  const FeasibleInterval wide = feasible_interval(lie, lo, hi, gamma_high);
  if (narrow.empty) return true;
  return !wide.empty && wide.lo <= narrow.lo && narrow.hi <= wide.hi;
}

Trajectory simulate(const FilterProblem& problem, const ScalarStateFunction& constraint,
                    const Vec& x0, const Policy& nominal, double dt, double horizon) {
  if (!(dt > 0.0) || !(horizon >= 0.0)) throw ConfigError("simulation dt and horizon must be positive");
  Trajectory traj;
  Vec x = problem.system.wrap(x0);
  locate(problem.field->grid, x);
  const auto steps = static_cast<std::size_t>(std::llround(std::ceil(horizon / dt - 1e-9)));
  for (std::size_t k = 0;; ++k) {
    const FilterResult r = filter(problem, x, nominal(x));
    traj.times.push_back(static_cast<double>(k) * dt);
    traj.states.push_back(x);
    traj.annotations.push_back({interpolate(*problem.field, x), constraint(x), r.active, r.feasible});
    if (k == steps) {
      traj.terminal_input = r.u_star;
      break;
    }
    try {
      x = step_rk4(problem.system, x, r.u_star, dt);
    } catch (const IntegrationError& e) {
      traj.terminal_input = r.u_star;
      throw SimulationError(e, std::move(traj));
    }
    traj.inputs.push_back(r.u_star);
    try {
      locate(problem.field->grid, x);
    } catch (const OutOfDomainError&) {
      traj.exited_domain = true;
      traj.times.push_back(static_cast<double>(k + 1) * dt);
      traj.states.push_back(x);
      traj.annotations.push_back({std::numeric_limits<double>::quiet_NaN(), constraint(x), false, false});
      traj.terminal_input = Vec::Constant(r.u_star.size(), std::numeric_limits<double>::quiet_NaN());
      break;
    }
  }
  return traj;
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj,
                          std::size_t input_dim) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  const std::size_t n = traj.states.empty() ? 0 : static_cast<std::size_t>(traj.states[0].size());
  out << 't';
  for (std::size_t i = 0; i < n; ++i) out << ",x" << i;
  for (std::size_t i = 0; i < input_dim; ++i) out << ",u" << i;
  out << ",value,ell,active,feasible\n";
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    out << traj.times[k];
    for (Eigen::Index i = 0; i < traj.states[k].size(); ++i) out << ',' << traj.states[k][i];
    const Vec& u = k < traj.inputs.size() ? traj.inputs[k] : traj.terminal_input;
    for (std::size_t i = 0; i < input_dim; ++i) {
      out << ',';
      if (static_cast<std::size_t>(u.size()) > i) out << u[static_cast<Eigen::Index>(i)];
    }
    const auto& a = traj.annotations[k];
    out << ',' << a.value << ',' << a.ell << ',' << (a.active ? 1 : 0) << ','
        << (a.feasible ? 1 : 0) << '\n';
  }
}

}  // namespace cbvf
