#include "cbvf/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "cbvf/errors.hpp"

namespace cbvf {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, ',')) out.push_back(trim(item));
  if (!value.empty() && value.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::optional<double> parse_number(std::string_view token) {
  const std::string t = lower(trim(token));
  if (t == "pi") return std::numbers::pi;
  if (t == "-pi") return -std::numbers::pi;
  double v = 0.0;
  const char* begin = t.data();
  const char* end = t.data() + t.size();
  if (!t.empty() && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

IniSection::IniSection(std::string source, std::string name, int line)
    : source_(std::move(source)), name_(std::move(name)), line_(line) {}

void IniSection::add(IniEntry entry) {
  if (has(entry.key)) {
    fail_at(entry.line, "duplicate key '" + entry.key + "' (first set on line " +
                            std::to_string(this->entry(entry.key).line) + ")");
  }
  entries_.push_back(std::move(entry));
}

bool IniSection::has(std::string_view key) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const IniEntry& e) { return e.key == key; });
}

const IniEntry& IniSection::entry(std::string_view key) const {
  for (const auto& e : entries_) {
    if (e.key == key) return e;
  }
  fail_at(line_, "missing required key '" + std::string(key) + "'");
}

void IniSection::fail_at(int line, const std::string& message) const {
  throw ConfigError(source_ + ":" + std::to_string(line) + ": [" + name_ + "] " + message);
}

void IniSection::fail(std::string_view key, const std::string& message) const {
  fail_at(entry(key).line, std::string(key) + ": " + message);
}

std::string IniSection::text(std::string_view key) const {
  const auto& e = entry(key);
  if (e.value.empty()) fail(key, "value must not be empty");
  return e.value;
}

std::string IniSection::text(std::string_view key, std::string fallback) const {
  return has(key) ? text(key) : fallback;
}

double IniSection::number(std::string_view key) const {
  const auto v = parse_number(entry(key).value);
  if (!v) fail(key, "expected a finite number, got '" + entry(key).value + "'");
  return *v;
}

double IniSection::number(std::string_view key, double fallback) const {
  return has(key) ? number(key) : fallback;
}

std::vector<double> IniSection::numbers(std::string_view key) const {
  std::vector<double> out;
  for (const auto& item : split_list(entry(key).value)) {
    const auto v = parse_number(item);
    if (!v) fail(key, "expected a comma-separated list of finite numbers, got '" + item + "'");
    out.push_back(*v);
  }
  if (out.empty()) fail(key, "list must not be empty");
  return out;
}

std::size_t IniSection::count(std::string_view key) const {
  const double v = number(key);
  if (v < 0.0 || v != std::floor(v) || v > 1e15) fail(key, "expected a non-negative integer");
  return static_cast<std::size_t>(v);
}

std::size_t IniSection::count(std::string_view key, std::size_t fallback) const {
  return has(key) ? count(key) : fallback;
}

namespace {

std::optional<bool> parse_flag(const std::string& token) {
  const std::string t = lower(token);
  if (t == "true" || t == "yes" || t == "on" || t == "1") return true;
  if (t == "false" || t == "no" || t == "off" || t == "0") return false;
  return std::nullopt;
}

}  // namespace

bool IniSection::flag(std::string_view key, bool fallback) const {
  if (!has(key)) return fallback;
  const auto v = parse_flag(trim(entry(key).value));
  if (!v) fail(key, "expected true or false");
  return *v;
}

std::vector<bool> IniSection::flags(std::string_view key) const {
  std::vector<bool> out;
  for (const auto& item : split_list(entry(key).value)) {
    const auto v = parse_flag(item);
    if (!v) fail(key, "expected a comma-separated list of true/false, got '" + item + "'");
    out.push_back(*v);
  }
  return out;
}

std::vector<const IniEntry*> IniSection::with_prefix(std::string_view prefix) const {
  std::vector<const IniEntry*> out;
  for (const auto& e : entries_) {
    if (e.key.starts_with(prefix)) out.push_back(&e);
  }
  return out;
}

void IniSection::expect_keys(const std::vector<std::string>& known) const {
  for (const auto& e : entries_) {
    const bool ok = std::any_of(known.begin(), known.end(), [&](const std::string& k) {
      if (!k.empty() && k.back() == '*') return e.key.starts_with(k.substr(0, k.size() - 1));
      return e.key == k;
    });
    if (!ok) fail_at(e.line, "unknown key '" + e.key + "'");
  }
}

IniDocument IniDocument::parse(std::string_view text, std::string source) {
  IniDocument doc;
  doc.source_ = std::move(source);
  doc.text_ = std::string(text);
  std::istringstream in(doc.text_);
  std::string raw;
  int line = 0;
  IniSection* current = nullptr;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find_first_of("#;");
    const std::string content = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (content.empty()) continue;
    const auto fail = [&](const std::string& msg) {
      throw ConfigError(doc.source_ + ":" + std::to_string(line) + ": " + msg);
    };
    if (content.front() == '[') {
      if (content.back() != ']') fail("unterminated section header");
      const std::string name = lower(trim(content.substr(1, content.size() - 2)));
      if (name.empty()) fail("empty section name");
      if (doc.has(name)) fail("duplicate section [" + name + "]");
      doc.sections_.emplace_back(doc.source_, name, line);
      current = &doc.sections_.back();
      continue;
    }
    const auto eq = content.find('=');
    if (eq == std::string::npos) fail("expected 'key = value'");
    if (!current) fail("key outside of any section");
    IniEntry entry{lower(trim(content.substr(0, eq))), trim(content.substr(eq + 1)), line};
    if (entry.key.empty()) fail("empty key");
    current->add(std::move(entry));
  }
  return doc;
}

IniDocument IniDocument::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

bool IniDocument::has(std::string_view section) const { return find(section) != nullptr; }

const IniSection* IniDocument::find(std::string_view name) const {
  for (const auto& s : sections_) {
    if (s.name() == name) return &s;
  }
  return nullptr;
}

const IniSection& IniDocument::section(std::string_view name) const {
  if (const auto* s = find(name)) return *s;
  throw ConfigError(source_ + ": missing required section [" + std::string(name) + "]");
}

const std::vector<std::string>& system_names() {
  static const std::vector<std::string> names{"acc", "dubins", "quadrotor", "pendulum"};
  return names;
}

const std::vector<std::string>& nominal_names() {
  static const std::vector<std::string> names{"zero", "speed_tracker", "goal_heading",
                                              "lqr_hover", "pd_angle"};
  return names;
}

namespace {

std::string joined(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) out += (out.empty() ? "" : ", ") + n;
  return out;
}

std::size_t state_dim_of(const std::string& system) {
  if (system == "acc") return 2;
  if (system == "dubins") return 3;
  if (system == "quadrotor") return 4;
  return 2;
}

std::vector<std::string> default_axis_names(const std::string& system) {
  if (system == "acc") return {"v", "z"};
  if (system == "dubins") return {"x", "y", "theta"};
  if (system == "quadrotor") return {"y", "vy", "phi", "omega"};
  return {"theta", "omega"};
}

void positive(const IniSection& s, std::string_view key, double v) {
  if (!(v > 0.0)) s.fail(key, "must be positive");
}

SystemSpec parse_system(const IniSection& s) {
  SystemSpec spec;
  spec.name = lower(s.text("name"));
  const auto& names = system_names();
  if (std::find(names.begin(), names.end(), spec.name) == names.end()) {
    s.fail("name", "unknown system '" + spec.name + "' (known: " + joined(names) + ")");
  }
  if (spec.name == "acc") {
    s.expect_keys({"name", "frictionless", "mass", "f0", "f1", "f2", "gravity", "cd", "lead_speed",
                   "desired_speed", "look_ahead"});
    AccParams p = s.flag("frictionless", false) ? AccParams::frictionless() : AccParams{};
    p.mass = s.number("mass", p.mass);
    p.f0 = s.number("f0", p.f0);
    p.f1 = s.number("f1", p.f1);
    p.f2 = s.number("f2", p.f2);
    p.gravity = s.number("gravity", p.gravity);
    p.cd = s.number("cd", p.cd);
    p.lead_speed = s.number("lead_speed", p.lead_speed);
    p.desired_speed = s.number("desired_speed", p.desired_speed);
    p.look_ahead = s.number("look_ahead", p.look_ahead);
    for (const char* k : {"mass", "gravity", "cd", "lead_speed", "look_ahead"}) {
      if (s.has(k)) positive(s, k, s.number(k));
    }
    for (const char* k : {"f0", "f1", "f2"}) {
      if (s.has(k) && s.number(k) < 0.0) s.fail(k, "must be non-negative");
    }
    if (!(p.lead_speed < p.desired_speed)) {
      s.fail_at(s.line(), "lead_speed must be below desired_speed");
    }
    spec.acc = p;
  } else if (spec.name == "dubins") {
    s.expect_keys({"name", "speed"});
    spec.dubins_speed = s.number("speed", spec.dubins_speed);
    positive(s, "speed", spec.dubins_speed);
  } else if (spec.name == "quadrotor") {
    s.expect_keys({"name", "mass", "arm", "inertia", "gravity", "max_thrust"});
    QuadrotorParams& p = spec.quadrotor;
    p.mass = s.number("mass", p.mass);
    p.arm = s.number("arm", p.arm);
    p.inertia = s.number("inertia", p.inertia);
    p.gravity = s.number("gravity", p.gravity);
    p.max_thrust = s.number("max_thrust", 0.75 * p.mass * p.gravity);
    for (const char* k : {"mass", "arm", "inertia", "gravity", "max_thrust"}) {
      if (s.has(k)) positive(s, k, s.number(k));
    }
  } else {
    s.expect_keys({"name", "mass", "length", "gravity", "max_torque"});
    PendulumParams& p = spec.pendulum;
    p.mass = s.number("mass", p.mass);
    p.length = s.number("length", p.length);
    p.gravity = s.number("gravity", p.gravity);
    p.max_torque = s.number("max_torque", p.max_torque);
    for (const char* k : {"mass", "length", "gravity", "max_torque"}) {
      if (s.has(k)) positive(s, k, s.number(k));
    }
  }
  return spec;
}

GridSpec parse_grid(const IniSection& s, const std::string& system, std::size_t n) {
  s.expect_keys({"lo", "hi", "counts", "periodic", "axis_names"});
  GridSpec g;
  g.lo = s.numbers("lo");
  g.hi = s.numbers("hi");
  for (const auto c : s.numbers("counts")) {
    if (c != std::floor(c) || c < 0.0) s.fail("counts", "entries must be integers");
    g.counts.push_back(static_cast<std::size_t>(c));
  }
  g.periodic = s.has("periodic") ? s.flags("periodic") : std::vector<bool>(n, false);
  if (s.has("axis_names")) {
    for (const auto& name : split_list(s.text("axis_names"))) g.axis_names.push_back(name);
  } else {
    g.axis_names = default_axis_names(system);
  }
  const auto check_len = [&](std::string_view key, std::size_t len) {
    if (len != n) {
      s.fail(key, "expected " + std::to_string(n) + " entries for this system, got " +
                      std::to_string(len));
    }
  };
  check_len("lo", g.lo.size());
  check_len("hi", g.hi.size());
  check_len("counts", g.counts.size());
  if (s.has("periodic")) check_len("periodic", g.periodic.size());
  if (s.has("axis_names")) check_len("axis_names", g.axis_names.size());
  for (std::size_t k = 0; k < n; ++k) {
    if (!(g.hi[k] > g.lo[k])) s.fail("hi", "axis " + std::to_string(k) + " needs hi > lo");
    if (g.counts[k] < 3) {
      s.fail("counts", "axis " + std::to_string(k) + " has " + std::to_string(g.counts[k]) +
                           " nodes; at least 3 are required");
    }
  }
  return g;
}

ConstraintSpec parse_constraint(const IniSection& s, const SystemSpec& sys) {
  ConstraintSpec c;
  c.type = lower(s.text("type"));
  const std::size_t n = state_dim_of(sys.name);
  if (c.type == "acc") {
    s.expect_keys({"type", "look_ahead"});
    if (sys.name != "acc") s.fail("type", "constraint 'acc' requires system acc");
    c.look_ahead = s.number("look_ahead", sys.acc.look_ahead);
    positive(s, "look_ahead", c.look_ahead);
  } else if (c.type == "ellipse") {
    s.expect_keys({"type", "center", "semi_axes"});
    c.center = s.numbers("center");
    c.semi_axes = s.numbers("semi_axes");
    if (c.center.size() != 2) s.fail("center", "expected 2 entries");
    if (c.semi_axes.size() != 2) s.fail("semi_axes", "expected 2 entries");
    if (!(c.semi_axes[0] > 0.0) || !(c.semi_axes[1] > 0.0)) s.fail("semi_axes", "must be positive");
    if (n < 2) s.fail("type", "ellipse needs at least two state components");
  } else if (c.type == "slab") {
    s.expect_keys({"type", "axis", "floor", "ceiling"});
    c.axis = s.count("axis");
    if (c.axis >= n) s.fail("axis", "state component out of range");
    c.floor = s.number("floor");
    c.ceiling = s.number("ceiling");
    if (!(c.ceiling > c.floor)) s.fail("ceiling", "must exceed floor");
  } else {
    s.fail("type", "unknown constraint type '" + c.type + "' (known: acc, ellipse, slab)");
  }
  return c;
}

CandidateSpec parse_candidate(const IniSection& s, const SystemSpec& sys) {
  CandidateSpec c;
  c.type = lower(s.text("type", "none"));
  const std::size_t n = state_dim_of(sys.name);
  if (c.type == "none") {
    s.expect_keys({"type"});
  } else if (c.type == "analytic") {
    s.expect_keys({"type"});
    if (sys.name != "acc") s.fail("type", "analytic candidate is only defined for system acc");
  } else if (c.type == "lyapunov") {
    s.expect_keys({"type", "point", "q_diag", "r_diag", "level"});
    c.point = s.numbers("point");
    if (c.point.size() != n) s.fail("point", "expected " + std::to_string(n) + " entries");
    c.q_diag = s.has("q_diag") ? s.numbers("q_diag") : std::vector<double>(n, 1.0);
    if (c.q_diag.size() != n) s.fail("q_diag", "expected " + std::to_string(n) + " entries");
    for (double q : c.q_diag) {
      if (q < 0.0) s.fail("q_diag", "entries must be non-negative");
    }
    const std::size_t m = sys.name == "quadrotor" ? 2 : 1;
    c.r_diag = s.has("r_diag") ? s.numbers("r_diag") : std::vector<double>(m, 1.0);
    if (c.r_diag.size() != m) s.fail("r_diag", "expected " + std::to_string(m) + " entries");
    for (double r : c.r_diag) {
      if (!(r > 0.0)) s.fail("r_diag", "entries must be positive");
    }
    c.level = s.number("level");
    positive(s, "level", c.level);
  } else if (c.type == "backup") {
    s.expect_keys({"type", "horizon", "eval_dt", "level"});
    if (sys.name != "pendulum") s.fail("type", "backup candidate is only defined for system pendulum");
    c.horizon = s.number("horizon", c.horizon);
    c.eval_dt = s.number("eval_dt", c.eval_dt);
    c.level = s.number("level", 0.0);
    positive(s, "horizon", c.horizon);
    positive(s, "eval_dt", c.eval_dt);
    if (c.level < 0.0) s.fail("level", "must be non-negative (0 selects it automatically)");
  } else {
    s.fail("type", "unknown candidate type '" + c.type + "' (known: analytic, lyapunov, backup, none)");
  }
  return c;
}

SolverConfig parse_solver(const IniSection& s) {
  s.expect_keys({"gamma", "cfl", "dt_max", "convergence_tol", "max_time", "accuracy",
                 "snapshot_interval", "boundary", "dissipation"});
  SolverConfig c;
  c.gamma = s.number("gamma", c.gamma);
  if (c.gamma < 0.0) s.fail("gamma", "must be non-negative");
  c.cfl = s.number("cfl", c.cfl);
  if (!(c.cfl > 0.0 && c.cfl <= 1.0)) s.fail("cfl", "must lie in (0, 1]");
  c.dt_max = s.number("dt_max", c.dt_max);
  if (s.has("dt_max")) positive(s, "dt_max", c.dt_max);
  c.convergence_tol = s.number("convergence_tol", c.convergence_tol);
  if (s.has("convergence_tol")) positive(s, "convergence_tol", c.convergence_tol);
  c.max_time = s.number("max_time", c.max_time);
  if (s.has("max_time")) positive(s, "max_time", c.max_time);
  c.snapshot_interval = s.number("snapshot_interval", c.snapshot_interval);
  if (s.has("snapshot_interval")) positive(s, "snapshot_interval", c.snapshot_interval);
  const std::string acc = lower(s.text("accuracy", "euler"));
  if (acc == "euler") {
    c.accuracy = Accuracy::Euler;
  } else if (acc == "tvd-rk2" || acc == "tvd_rk2") {
    c.accuracy = Accuracy::TvdRk2;
  } else {
    s.fail("accuracy", "expected euler or tvd-rk2");
  }
  const std::string boundary = lower(s.text("boundary", "linear"));
  if (boundary == "linear") {
    c.boundary = Boundary::Linear;
  } else if (boundary == "constant") {
    c.boundary = Boundary::Constant;
  } else {
    s.fail("boundary", "expected linear or constant");
  }
  const std::string dissipation = lower(s.text("dissipation", "global"));
  if (dissipation == "global") {
    c.dissipation = Dissipation::Global;
  } else if (dissipation == "local") {
    c.dissipation = Dissipation::Local;
  } else {
    s.fail("dissipation", "expected global or local");
  }
  c.validate();
  return c;
}

FilterSpec parse_filter(const IniSection* s, const SystemSpec& sys) {
  FilterSpec f;
  if (!s) return f;
  s->expect_keys({"gamma_online", "r_diag", "mode", "nominal", "audit_samples", "nominal.*"});
  f.gamma_online = s->number("gamma_online", f.gamma_online);
  if (f.gamma_online < 0.0) s->fail("gamma_online", "must be non-negative");
  const std::size_t m = sys.name == "quadrotor" ? 2 : 1;
  if (s->has("r_diag")) {
    f.r_diag = s->numbers("r_diag");
    if (f.r_diag.size() != m) s->fail("r_diag", "expected " + std::to_string(m) + " entries");
    for (double r : f.r_diag) {
      if (!(r > 0.0)) s->fail("r_diag", "entries must be positive");
    }
  }
  const std::string mode = lower(s->text("mode", "least-violating"));
  if (mode == "least-violating" || mode == "least_violating") {
    f.mode = InfeasibilityMode::LeastViolating;
  } else if (mode == "error") {
    f.mode = InfeasibilityMode::Error;
  } else {
    s->fail("mode", "expected least-violating or error");
  }
  f.audit_samples = s->count("audit_samples", 0);
  f.nominal.name = lower(s->text("nominal", "zero"));
  f.nominal.source = s->source();
  f.nominal.line = s->has("nominal") ? s->entry("nominal").line : s->line();
  const auto& names = nominal_names();
  if (std::find(names.begin(), names.end(), f.nominal.name) == names.end()) {
    s->fail("nominal", "unknown nominal policy '" + f.nominal.name + "' (known: " + joined(names) + ")");
  }
  for (const auto* e : s->with_prefix("nominal.")) {
    f.nominal.params[e->key.substr(8)] = s->numbers(e->key);
  }
  return f;
}

SimulateSpec parse_simulate(const IniSection* s, std::size_t n) {
  SimulateSpec sim;
  if (!s) return sim;
  s->expect_keys({"x0*", "dt", "horizon"});
  sim.dt = s->number("dt", sim.dt);
  positive(*s, "dt", sim.dt);
  sim.horizon = s->number("horizon", sim.horizon);
  positive(*s, "horizon", sim.horizon);
  for (const auto* e : s->with_prefix("x0")) {
    const auto v = s->numbers(e->key);
    if (v.size() != n) s->fail(e->key, "expected " + std::to_string(n) + " entries");
    sim.x0.push_back(Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())));
  }
  return sim;
}

OutputSpec parse_output(const IniSection* s) {
  OutputSpec out;
  if (!s) return out;
  s->expect_keys({"dir", "snapshot_stride"});
  out.dir = s->text("dir", out.dir.string());
  out.snapshot_stride = s->count("snapshot_stride", out.snapshot_stride);
  return out;
}

}  // namespace

ExperimentConfig parse_experiment(const IniDocument& doc) {
  static const std::vector<std::string> known{"system",    "grid",   "constraint", "candidate",
                                              "solver",    "filter", "simulate",   "output"};
  for (const auto& s : doc.sections()) {
    if (std::find(known.begin(), known.end(), s.name()) == known.end()) {
      s.fail_at(s.line(), "unknown section");
    }
  }
  ExperimentConfig cfg;
  cfg.document = doc;
  cfg.system = parse_system(doc.section("system"));
  const std::size_t n = state_dim_of(cfg.system.name);
  cfg.grid = parse_grid(doc.section("grid"), cfg.system.name, n);
  cfg.constraint = parse_constraint(doc.section("constraint"), cfg.system);
  if (const auto* c = doc.find("candidate")) {
    cfg.has_candidate_section = true;
    cfg.candidate = parse_candidate(*c, cfg.system);
  }
  cfg.solver = doc.has("solver") ? parse_solver(doc.section("solver")) : SolverConfig{};
  cfg.filter = parse_filter(doc.find("filter"), cfg.system);
  cfg.simulate = parse_simulate(doc.find("simulate"), n);
  cfg.output = parse_output(doc.find("output"));
  return cfg;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  return parse_experiment(IniDocument::load(path));
}

}  // namespace cbvf
