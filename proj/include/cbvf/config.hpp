#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cbvf/dynamics.hpp"
#include "cbvf/filter.hpp"
#include "cbvf/solver.hpp"

namespace cbvf {

/// One `key = value` line.
struct IniEntry {
  std::string key;
  std::string value;
  int line = 0;
};

/// A `[name]` block. Accessors throw ConfigError tagged with source and line.
class IniSection {
 public:
  IniSection(std::string source, std::string name, int line);

  const std::string& source() const { return source_; }
  const std::string& name() const { return name_; }
  int line() const { return line_; }
  const std::vector<IniEntry>& entries() const { return entries_; }

  void add(IniEntry entry);
  bool has(std::string_view key) const;
  const IniEntry& entry(std::string_view key) const;

  std::string text(std::string_view key) const;
  std::string text(std::string_view key, std::string fallback) const;
  double number(std::string_view key) const;
  double number(std::string_view key, double fallback) const;
  std::vector<double> numbers(std::string_view key) const;
  std::size_t count(std::string_view key) const;
  std::size_t count(std::string_view key, std::size_t fallback) const;
  bool flag(std::string_view key, bool fallback) const;
  std::vector<bool> flags(std::string_view key) const;

  /// Entries whose key starts with `prefix`, in file order.
  std::vector<const IniEntry*> with_prefix(std::string_view prefix) const;

  /// Throws for any key not in `known` (keys ending in '*' match by prefix).
  void expect_keys(const std::vector<std::string>& known) const;

  [[noreturn]] void fail(std::string_view key, const std::string& message) const;
  [[noreturn]] void fail_at(int line, const std::string& message) const;

 private:
  std::string source_;
  std::string name_;
  int line_;
  std::vector<IniEntry> entries_;
};

class IniDocument {
 public:
  static IniDocument parse(std::string_view text, std::string source = "<config>");
  static IniDocument load(const std::filesystem::path& path);

  const std::string& source() const { return source_; }
  const std::string& text() const { return text_; }
  bool has(std::string_view section) const;
  const IniSection& section(std::string_view name) const;
  const IniSection* find(std::string_view name) const;
  const std::vector<IniSection>& sections() const { return sections_; }

 private:
  std::string source_;
  std::string text_;
  std::vector<IniSection> sections_;
};

/// Parses a number; accepts `pi` and `-pi`.
std::optional<double> parse_number(std::string_view token);

struct GridSpec {
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<std::size_t> counts;
  std::vector<bool> periodic;
  std::vector<std::string> axis_names;
};

struct ConstraintSpec {
  std::string type;  // acc | ellipse | slab
  double look_ahead = 1.8;
  std::vector<double> center;
  std::vector<double> semi_axes;
  std::size_t axis = 0;
  double floor = 0.0;
  double ceiling = 0.0;
};

struct CandidateSpec {
  std::string type = "none";  // analytic | lyapunov | backup | none
  std::vector<double> point;
  std::vector<double> q_diag;
  std::vector<double> r_diag;
  double level = 0.0;
  double horizon = 2.0;
  double eval_dt = 0.01;
};

struct NominalSpec {
  std::string name = "zero";
  std::map<std::string, std::vector<double>> params;
  std::string source;
  int line = 0;
};

struct FilterSpec {
  double gamma_online = 5.0;
  std::vector<double> r_diag;  // empty means identity
  InfeasibilityMode mode = InfeasibilityMode::LeastViolating;
  NominalSpec nominal;
  std::size_t audit_samples = 0;
};

struct SimulateSpec {
  std::vector<Vec> x0;
  double dt = 0.01;
  double horizon = 10.0;
};

struct OutputSpec {
  std::filesystem::path dir = "out";
  std::size_t snapshot_stride = 10;  ///< write every k-th snapshot; 0 writes none
};

struct SystemSpec {
  std::string name;
  AccParams acc;
  double dubins_speed = 1.0;
  QuadrotorParams quadrotor;
  PendulumParams pendulum;
};

/// A parsed and validated experiment description.
struct ExperimentConfig {
  IniDocument document;
  SystemSpec system;
  GridSpec grid;
  ConstraintSpec constraint;
  CandidateSpec candidate;
  SolverConfig solver;
  FilterSpec filter;
  SimulateSpec simulate;
  OutputSpec output;
  bool has_candidate_section = false;
};

ExperimentConfig parse_experiment(const IniDocument& document);
ExperimentConfig load_experiment(const std::filesystem::path& path);

/// Registered names, for validation messages and help output.
const std::vector<std::string>& system_names();
const std::vector<std::string>& nominal_names();

}  // namespace cbvf
