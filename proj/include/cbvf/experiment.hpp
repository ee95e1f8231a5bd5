#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>

#include "cbvf/cbf.hpp"
#include "cbvf/config.hpp"
#include "cbvf/filter.hpp"

namespace cbvf {

/// Grid allocation would exceed CBVF_MAX_GRID_BYTES.
class MemoryLimitError : public std::runtime_error {
 public:
  MemoryLimitError(std::size_t requested, std::size_t limit);
  std::size_t requested() const { return requested_; }
  std::size_t limit() const { return limit_; }

 private:
  std::size_t requested_;
  std::size_t limit_;
};

inline constexpr const char* kMemoryLimitVariable = "CBVF_MAX_GRID_BYTES";

/// Bytes the solver needs for `fields` full-grid arrays plus per-node
/// dynamics of an n-state, m-input system.
std::size_t estimate_solver_bytes(const Grid& grid, std::size_t input_dim, std::size_t fields);

/// Throws MemoryLimitError when the environment cap is set and exceeded.
void enforce_memory_limit(std::size_t bytes);

ControlAffineSystem build_system(const SystemSpec& spec);
Grid build_grid(const GridSpec& spec);
ScalarStateFunction build_constraint(const ConstraintSpec& spec);

/// Nominal policy from the registry; unknown names and bad parameters throw
/// ConfigError.
Policy build_nominal(const NominalSpec& spec, const SystemSpec& system);

/// Everything one config describes, materialised on its grid.
struct Experiment {
  ExperimentConfig config;
  ControlAffineSystem system;
  Grid grid;
  ScalarStateFunction constraint;
  ValueField constraint_field;
  ValueField candidate_field;  ///< l itself for candidate type none
  Provenance candidate_provenance = Provenance::Constraint;
  bool candidate_conservative = false;
  Policy nominal;
};

Experiment build_experiment(const ExperimentConfig& config);

/// Filter on `field` with the config's online rate, weight and mode.
FilterProblem build_filter(const Experiment& experiment, std::shared_ptr<const ValueField> field);

}  // namespace cbvf
