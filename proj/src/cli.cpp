#include "cbvf/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <openssl/evp.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "cbvf/errors.hpp"
#include "cbvf/experiment.hpp"
#include "cbvf/export.hpp"
#include "cbvf/field_io.hpp"
#include "cbvf/parallel.hpp"
#include "cbvf/solver.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cbvf {

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  std::ostringstream out;
  for (unsigned int i = 0; i < length; ++i) {
    out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return out.str();
}

namespace {

void write_json(const fs::path& path, const json& value) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << value.dump(2) << '\n';
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

// NaN and infinities have no JSON form; they are reported as null.
json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json base_manifest(const ExperimentConfig& config, const char* command) {
  return {{"command", command},
          {"config_source", config.document.source()},
          {"config_hash", sha256_hex(config.document.text())},
          {"system", config.system.name},
          {"artifacts", json::array()}};
}

void add_artifact(json& manifest, const std::string& path, const char* kind) {
  manifest["artifacts"].push_back({{"path", path}, {"kind", kind}});
}

json solver_summary(const SolveReport& r, const ValueField& init, const ValueField& final) {
  return {{"converged", r.converged},
          {"iterations", r.iterations},
          {"final_time", r.final_time},
          {"time_step", r.time_step},
          {"final_residual", r.residual_history.empty() ? json(nullptr)
                                                        : finite_or_null(r.residual_history.back())},
          {"safe_nodes_initial", safe_node_count(init)},
          {"safe_nodes_final", safe_node_count(final)}};
}

// Largest change of l across one grid cell, over cells cut by the zero level
// of l; central differences give the per-axis slopes.
double ell_cell_tolerance(const ValueField& ell) {
  const Grid& g = ell.grid;
  const auto cell_change = [&](std::size_t i) {
    double change = 0.0;
    for (std::size_t k = 0; k < g.dim(); ++k) {
      change += std::abs(central_difference(ell, i, k)) * g.spacing(k);
    }
    return change;
  };
  double worst = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t k = 0; k < g.dim(); ++k) {
      const std::size_t j = g.neighbor(i, k, 1);
      if (j == Grid::npos || (ell.values[i] >= 0.0) == (ell.values[j] >= 0.0)) continue;
      worst = std::max({worst, cell_change(i), cell_change(j)});
    }
  }
  return worst;
}

std::string snapshot_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "snapshots/s%05zu", index);
  return buf;
}

}  // namespace

json write_manifest(const fs::path& out_dir, json manifest) {
  write_json(out_dir / "manifest.json", manifest);
  return manifest;
}

json cmd_solve(const ExperimentConfig& config, const fs::path& out_dir) {
  const Experiment ex = build_experiment(config);
  fs::create_directories(out_dir);
  json manifest = base_manifest(config, "solve");
  write_text(out_dir / "config.ini", config.document.text());
  add_artifact(manifest, "config.ini", "config");
  write_field(out_dir / "constraint", ex.constraint_field);
  add_artifact(manifest, "constraint", "field");
  write_field(out_dir / "initial", ex.candidate_field);
  add_artifact(manifest, "initial", "field");

  std::size_t index = 0;
  SolveOptions options;
  const std::size_t stride = config.output.snapshot_stride;
  options.on_snapshot = [&](const ValueField& f) {
    if (stride > 0 && index % stride == 0) {
      const std::string name = snapshot_name(index);
      write_field(out_dir / name, f);
      add_artifact(manifest, name, "snapshot");
    }
    ++index;
  };
  const SolveResult result =
      solve(ex.system, ex.candidate_field, ex.constraint_field, config.solver, options);
  write_field(out_dir / "field", result.field);
  add_artifact(manifest, "field", "field");
  json report = result.report.to_json();
  report["candidate"] = std::string(to_string(ex.candidate_provenance));
  write_json(out_dir / "report.json", report);
  add_artifact(manifest, "report.json", "report");
  manifest["solver"] = solver_summary(result.report, ex.candidate_field, result.field);
  if (!result.report.converged) {
    spdlog::warn("solver stopped at t = {} without converging; the field is a finite-horizon value",
                 result.report.final_time);
  }
  return write_manifest(out_dir, std::move(manifest));
}

SimulateOutcome cmd_simulate(const ExperimentConfig& config, const fs::path& field_dir,
                             const fs::path& out_dir, std::uint64_t seed) {
  const Experiment ex = build_experiment(config);
  auto field = std::make_shared<const ValueField>(read_field(field_dir));
  if (!field->grid.same_layout(ex.grid)) {
    throw ConfigError("field at " + field_dir.string() + " does not match the config grid");
  }
  if (config.simulate.x0.empty()) throw ConfigError("[simulate] lists no x0 entries");
  const FilterProblem problem = build_filter(ex, field);
  fs::create_directories(out_dir);
  SimulateOutcome outcome;
  json manifest = base_manifest(config, "simulate");
  manifest["field"] = field_dir.string();
  manifest["seed"] = seed;
  const double tolerance = ell_cell_tolerance(ex.constraint_field);
  manifest["ell_cell_tolerance"] = tolerance;
  json summaries = json::array();
  std::mt19937_64 rng(seed);

  for (std::size_t k = 0; k < config.simulate.x0.size(); ++k) {
    const Vec& x0 = config.simulate.x0[k];
    char name[32];
    std::snprintf(name, sizeof name, "traj_%03zu.csv", k);
    Trajectory traj;
    std::string status = "completed";
    try {
      traj = simulate(problem, ex.constraint, x0, ex.nominal, config.simulate.dt,
                      config.simulate.horizon);
      if (traj.exited_domain) status = "exited_domain";
    } catch (const SimulationError& e) {
      traj = e.partial();
      status = "integration_failure";
      outcome.all_completed = false;
      spdlog::error("rollout {} failed: {}", k, e.what());
    } catch (const InfeasibleError& e) {
      status = "infeasible";
      outcome.all_completed = false;
      spdlog::error("rollout {} stopped: {}", k, e.what());
    }
    write_trajectory_csv(out_dir / name, traj, ex.system.input_dim());
    add_artifact(manifest, name, "trajectory");

    double min_ell = std::numeric_limits<double>::infinity();
    double min_value = std::numeric_limits<double>::infinity();
    std::size_t active = 0;
    std::size_t infeasible = 0;
    std::size_t filtered = 0;
    std::size_t audit_violations = 0;
    for (std::size_t s = 0; s < traj.annotations.size(); ++s) {
      const auto& a = traj.annotations[s];
      min_ell = std::min(min_ell, a.ell);
      if (std::isnan(a.value)) continue;
      min_value = std::min(min_value, a.value);
      ++filtered;
      active += a.active;
      infeasible += !a.feasible;
    }
    if (config.filter.audit_samples > 0) {
      const Vec& lo = ex.system.input_lo();
      const Vec& hi = ex.system.input_hi();
      for (std::size_t s = 0; s < traj.states.size(); ++s) {
        if (std::isnan(traj.annotations[s].value)) continue;
        const Vec& x = traj.states[s];
        const Vec u_nom = ex.system.clamp_input(ex.nominal(x));
        const LieDerivatives lie = lie_derivatives(problem, x);
        const double offset = lie.lf + problem.gamma_online * lie.value;
        const FilterResult r = solve_filter_qp(u_nom, lie.lg, offset, lo, hi, problem.weight,
                                               InfeasibilityMode::LeastViolating);
        if (!r.feasible) continue;
        const double best = (r.u_star - u_nom).dot(problem.weight * (r.u_star - u_nom));
        for (std::size_t j = 0; j < config.filter.audit_samples; ++j) {
          Vec u(lo.size());
          for (Eigen::Index i = 0; i < u.size(); ++i) {
            u[i] = std::uniform_real_distribution<double>(lo[i], hi[i])(rng);
          }
          if (offset + lie.lg.dot(u) < 0.0) continue;
          const double cost = (u - u_nom).dot(problem.weight * (u - u_nom));
          audit_violations += cost < best - 1e-9 * (1.0 + best);
        }
      }
    }
    json summary = {{"file", name},
                    {"x0", std::vector<double>(x0.data(), x0.data() + x0.size())},
                    {"status", status},
                    {"steps", traj.inputs.size()},
                    {"min_ell", finite_or_null(min_ell)},
                    {"min_value", finite_or_null(min_value)},
                    {"safe", std::isfinite(min_ell) && min_ell >= -tolerance},
                    {"filter_active_fraction",
                     filtered ? static_cast<double>(active) / static_cast<double>(filtered) : 0.0},
                    {"infeasible_steps", infeasible}};
    if (config.filter.audit_samples > 0) {
      summary["audit"] = {{"samples_per_state", config.filter.audit_samples},
                          {"violations", audit_violations}};
    }
    summaries.push_back(std::move(summary));
  }
  manifest["trajectories"] = std::move(summaries);
  outcome.manifest = write_manifest(out_dir, std::move(manifest));
  return outcome;
}

CompareOutcome cmd_compare(const ExperimentConfig& config, const fs::path& out_dir) {
  if (!config.has_candidate_section) {
    throw ConfigError(config.document.source() + ": compare needs a [candidate] section");
  }
  const Experiment ex = build_experiment(config);
  const SolverConfig& sc = config.solver;
  const double max_snapshots = std::floor(sc.max_time / sc.snapshot_interval) + 2.0;
  enforce_memory_limit(estimate_solver_bytes(ex.grid, ex.system.input_dim(), 8) +
                       static_cast<std::size_t>(max_snapshots) * ex.grid.field_bytes());
  fs::create_directories(out_dir);
  CompareOutcome outcome;
  json manifest = base_manifest(config, "compare");

  SolveOptions vanilla_options;
  vanilla_options.keep_snapshots = true;
  const SolveResult vanilla =
      solve(ex.system, ex.constraint_field, ex.constraint_field, sc, vanilla_options);

  Theorem1Monitor thm1(vanilla.snapshots);
  Theorem2Monitor thm2(vanilla.field);
  SolveOptions warm_options;
  warm_options.reference = &vanilla.field;
  warm_options.on_snapshot = [&](const ValueField& f) {
    thm1.observe(f);
    thm2.observe(f);
  };
  const SolveResult warm = solve(ex.system, ex.candidate_field, ex.constraint_field, sc, warm_options);

  const double tol = 5.0 * sc.convergence_tol;
  const Theorem1Check& t1 = thm1.result();
  const Theorem2Check& t2 = thm2.result();
  const auto within = [tol](double excess) { return !std::isfinite(excess) || excess <= tol; };
  const auto monotone = [](const std::vector<std::size_t>& v, bool increasing) {
    for (std::size_t i = 1; i < v.size(); ++i) {
      if (increasing ? v[i] < v[i - 1] : v[i] > v[i - 1]) return false;
    }
    return true;
  };
  json checks = {
      {"theorem1", {{"excess", finite_or_null(t1.max_excess)},
                    {"matched_snapshots", t1.matched_snapshots},
                    {"pass", within(t1.max_excess)}}},
      {"theorem2", {{"excess", finite_or_null(t2.theorem2_excess)}, {"pass", within(t2.theorem2_excess)}}},
      {"lemma1", {{"excess", finite_or_null(t2.lemma1_excess)},
                  {"nodes", t2.lemma1_nodes},
                  {"pass", within(t2.lemma1_excess)}}},
      {"lemma2", {{"excess", finite_or_null(t2.lemma2_excess)},
                  {"nodes", t2.lemma2_nodes},
                  {"pass", within(t2.lemma2_excess)}}}};
  outcome.passed = within(t1.max_excess) && within(t2.theorem2_excess) &&
                   within(t2.lemma1_excess) && within(t2.lemma2_excess);
  outcome.metrics = {
      {"tolerance", tol},
      {"candidate", std::string(to_string(ex.candidate_provenance))},
      {"checks", checks},
      {"per_step",
       {{"monotonicity_violation", warm.report.monotonicity_violation},
        {"monotone_nodes", warm.report.monotone_nodes},
        {"conservativeness_violation", warm.report.conservativeness_violation},
        {"conservative_nodes", warm.report.conservative_nodes}}},
      {"vanilla",
       {{"iterations", vanilla.report.iterations},
        {"converged", vanilla.report.converged},
        {"final_time", vanilla.report.final_time},
        {"snapshot_times", vanilla.report.snapshot_times},
        {"safe_node_counts", vanilla.report.safe_node_counts}}},
      {"warm",
       {{"iterations", warm.report.iterations},
        {"converged", warm.report.converged},
        {"final_time", warm.report.final_time},
        {"snapshot_times", warm.report.snapshot_times},
        {"safe_node_counts", warm.report.safe_node_counts},
        {"safe_nodes_non_decreasing", monotone(warm.report.safe_node_counts, true)},
        {"safe_nodes_non_increasing", monotone(warm.report.safe_node_counts, false)}}},
      {"passed", outcome.passed}};
  write_json(out_dir / "metrics.json", outcome.metrics);
  add_artifact(manifest, "metrics.json", "metrics");
  write_field(out_dir / "vanilla_field", vanilla.field);
  add_artifact(manifest, "vanilla_field", "field");
  write_field(out_dir / "warm_field", warm.field);
  add_artifact(manifest, "warm_field", "field");
  manifest["solver"] = {{"vanilla", solver_summary(vanilla.report, ex.constraint_field, vanilla.field)},
                        {"warm", solver_summary(warm.report, ex.candidate_field, warm.field)}};
  manifest["passed"] = outcome.passed;
  outcome.manifest = write_manifest(out_dir, std::move(manifest));
  return outcome;
}

fs::path cmd_export(const fs::path& field_dir, std::string_view format, std::string_view slice_text,
                    const fs::path& out_file) {
  const ValueField field = read_field(field_dir);
  const SliceSpec slice = parse_slice(slice_text, field.grid);
  if (out_file.has_parent_path()) fs::create_directories(out_file.parent_path());
  if (format == "csv-slice") {
    write_slice_csv(out_file, field, slice);
  } else if (format == "json-contour") {
    write_json(out_file, contour_json(field, slice));
  } else {
    throw ConfigError("unknown export format '" + std::string(format) +
                      "' (known: csv-slice, json-contour)");
  }
  return out_file;
}

namespace {

int report_failure(int code, const std::string& message) {
  spdlog::error("{}", message);
  return code;
}

// Maps the in-flight exception to an exit code.
int handle_exception() {
  try {
    throw;
  } catch (const ConfigError& e) {
    return report_failure(kExitInvalidConfig, e.what());
  } catch (const OutOfDomainError& e) {
    return report_failure(kExitInvalidConfig, e.what());
  } catch (const MemoryLimitError& e) {
    return report_failure(kExitMemoryLimit, e.what());
  } catch (const DivergenceError& e) {
    return report_failure(kExitDiverged, e.what());
  } catch (const IntegrationError& e) {
    return report_failure(kExitSimulationFailed, e.what());
  } catch (const InfeasibleError& e) {
    return report_failure(kExitSimulationFailed, e.what());
  } catch (const std::exception& e) {
    return report_failure(kExitFailure, e.what());
  }
}

}  // namespace

int run_cli(int argc, char** argv) {
  if (!spdlog::get("cbvf")) spdlog::set_default_logger(spdlog::stderr_color_mt("cbvf"));
  spdlog::set_pattern("%l: %v");

  CLI::App app{"Refine candidate barrier functions into barrier-value functions on a grid"};
  app.require_subcommand(1);
  std::string config_path;
  std::string field_path;
  std::string out_path;
  std::string format;
  std::string slice;
  unsigned threads = 0;
  std::uint64_t seed = 0;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config (INI)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_path, "output directory (default: [output] dir)");
    sub->add_option("--threads", threads, "worker threads, 0 for all cores")->capture_default_str();
    sub->add_option("--seed", seed, "seed for sampled optimality audits")->capture_default_str();
  };
  auto* solve_cmd = app.add_subcommand("solve", "refine the candidate into a value field");
  common(solve_cmd);
  auto* sim_cmd = app.add_subcommand("simulate", "closed-loop rollouts with the safety filter");
  common(sim_cmd);
  sim_cmd->add_option("--field", field_path, "value field directory")->required();
  auto* cmp_cmd = app.add_subcommand("compare", "vanilla vs warm-started solves and theorem checks");
  common(cmp_cmd);
  auto* exp_cmd = app.add_subcommand("export", "slices and zero contours of a field");
  exp_cmd->add_option("--field", field_path, "value field directory")->required();
  exp_cmd->add_option("--format", format, "csv-slice or json-contour")
      ->required()
      ->check(CLI::IsMember({"csv-slice", "json-contour"}));
  exp_cmd->add_option("--slice", slice, "one entry per axis, ':' for the two free axes");
  exp_cmd->add_option("--out", out_path, "output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalidConfig;
  }

  try {
    set_thread_count(threads);
    if (exp_cmd->parsed()) {
      const fs::path written = cmd_export(field_path, format, slice, out_path);
      std::cout << written.string() << '\n';
      return kExitOk;
    }
    const ExperimentConfig config = load_experiment(config_path);
    const fs::path out = out_path.empty() ? config.output.dir : fs::path(out_path);
    if (solve_cmd->parsed()) {
      const json m = cmd_solve(config, out);
      std::cout << (out / "manifest.json").string() << " converged="
                << m["solver"]["converged"].get<bool>() << '\n';
      return kExitOk;
    }
    if (sim_cmd->parsed()) {
      const SimulateOutcome r = cmd_simulate(config, field_path, out, seed);
      std::cout << (out / "manifest.json").string() << '\n';
      return r.all_completed ? kExitOk : kExitSimulationFailed;
    }
    const CompareOutcome r = cmd_compare(config, out);
    std::cout << (out / "manifest.json").string() << " passed=" << r.passed << '\n';
    return r.passed ? kExitOk : kExitTheoremViolation;
  } catch (...) {
    return handle_exception();
  }
}

}  // namespace cbvf
