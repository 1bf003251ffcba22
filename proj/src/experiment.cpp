#include "cornerspace/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"

namespace cornerspace {

using nlohmann::json;

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

[[noreturn]] void bad(const std::string& field, const std::string& what) {
  fail(ErrorCode::config, "config field '" + field + "': " + what);
}

// Object reader that insists every key is consumed.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) bad(path_.empty() ? "<root>" : path_, "expected an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) bad(field(it.key()), "unknown key");
    }
  }

  bool has(const std::string& k) {
    used_.insert(k);
    return j_.contains(k);
  }
  const json& at(const std::string& k) {
    used_.insert(k);
    return j_.at(k);
  }
  std::string field(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

  void number(const std::string& k, double& out) {
    if (!has(k)) return;
    const json& v = j_.at(k);
    if (!v.is_number()) bad(field(k), "expected a number");
    out = v.get<double>();
    if (!std::isfinite(out)) bad(field(k), "must be finite");
  }
  template <class Int>
  void integer(const std::string& k, Int& out) {
    if (!has(k)) return;
    const json& v = j_.at(k);
    if (!v.is_number_integer()) bad(field(k), "expected an integer");
    if constexpr (std::is_unsigned_v<Int>) {
      if (v.is_number_unsigned()) {
        out = v.get<Int>();
      } else {
        bad(field(k), "must be non-negative");
      }
    } else {
      const auto x = v.get<long long>();
      if (x < static_cast<long long>(std::numeric_limits<Int>::min()) ||
          x > static_cast<long long>(std::numeric_limits<Int>::max()))
        bad(field(k), "out of range");
      out = static_cast<Int>(x);
    }
  }
  void boolean(const std::string& k, bool& out) {
    if (!has(k)) return;
    const json& v = j_.at(k);
    if (!v.is_boolean()) bad(field(k), "expected true or false");
    out = v.get<bool>();
  }
  void string(const std::string& k, std::string& out) {
    if (!has(k)) return;
    const json& v = j_.at(k);
    if (!v.is_string()) bad(field(k), "expected a string");
    out = v.get<std::string>();
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

const char* method_name(Method m) {
  switch (m) {
    case Method::corner: return "corner";
    case Method::meanfield: return "meanfield";
    case Method::brute_force: return "brute_force";
  }
  return "";
}

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::schedule: return "schedule";
    case Strategy::progression: return "progression";
    case Strategy::converge: return "converge";
  }
  return "";
}

const char* mode_name(const std::optional<OperatorMode>& m) {
  if (!m) return "auto";
  return *m == OperatorMode::exact ? "exact" : "fast";
}

json model_json(const ModelParams& m) {
  json j;
  j["delta_omega"] = m.delta_omega;
  j["hardcore"] = m.hardcore;
  if (!m.hardcore) j["u"] = m.u;
  j["j"] = m.j;
  j["f"] = m.f;
  j["gamma"] = m.gamma;
  j["n_max"] = m.n_max;
  j["z"] = m.z;
  return j;
}

json solver_json(const SolverSettings& s) {
  json j;
  j["dt"] = s.direct.dt;
  j["dt_factor"] = s.direct.dt_factor;
  j["rel_tol"] = s.direct.rel_tol;
  j["abs_floor"] = s.direct.abs_floor;
  j["check_window"] = s.direct.check_window;
  j["max_time"] = s.direct.max_time;
  j["record_stride"] = s.direct.record_stride;
  j["direct_cap"] = s.direct_cap;
  j["clip_tol"] = s.clip_tol;
  j["obs_tol"] = s.obs_tol;
  j["obs_floor"] = s.obs_floor;
  j["operator_mode"] = mode_name(s.operator_mode);
  j["fast_mode_above"] = s.fast_mode_above;
  j["leaf_cap"] = s.leaf_cap;
  j["brute_force_cap"] = s.brute_force_cap;
  return j;
}

json trajectories_json(const TrajectoryConfig& t) {
  json j;
  j["n_trajectories"] = t.n_trajectories;
  j["propagator"] = t.propagator == Propagator::spectral ? "spectral" : "rk4";
  j["dt"] = t.dt;
  j["dt_factor"] = t.dt_factor;
  j["t_relax"] = t.t_relax;
  j["t_sample"] = t.t_sample;
  j["sample_stride"] = t.sample_stride;
  j["seed"] = t.master_seed;
  j["jump_time_tol"] = t.jump_time_tol;
  j["batch"] = t.batch;
  return j;
}

json config_json(const ExperimentConfig& c) {
  json j;
  j["schema_version"] = c.schema_version;
  j["name"] = c.name;
  j["preset"] = c.preset;
  j["model"] = model_json(c.model);
  j["lattice"] = {{"lx", c.target.lx},
                  {"ly", c.target.ly},
                  {"periodic_x", c.target.periodic_x},
                  {"periodic_y", c.target.periodic_y}};
  j["base"] = {{"lx", c.base_lx}, {"ly", c.base_ly}};
  j["method"] = method_name(c.method);
  j["strategy"] = strategy_name(c.strategy);
  j["m_schedule"] = c.m_schedule;
  j["include_meanfield"] = c.include_meanfield;
  j["solver"] = solver_json(c.solver);
  j["trajectories"] = trajectories_json(c.solver.trajectories);
  j["meanfield"] = {{"damping", c.meanfield.damping},
                    {"tol", c.meanfield.tol},
                    {"max_iter", c.meanfield.max_iter}};
  j["outputs"] = {{"dir", c.outputs.dir},
                  {"results", c.outputs.results},
                  {"spectrum", c.outputs.spectrum},
                  {"timeseries", c.outputs.timeseries},
                  {"manifest", c.outputs.manifest},
                  {"checkpoint_dir", c.outputs.checkpoint_dir}};
  return j;
}

void read_model(Section& s, ModelParams& m) {
  s.number("delta_omega", m.delta_omega);
  s.boolean("hardcore", m.hardcore);
  if (m.hardcore) {
    m.n_max = 1;
    m.u = std::numeric_limits<double>::infinity();
    if (s.has("u")) bad(s.field("u"), "hard-core bosons take no finite U");
  } else {
    if (!s.has("u")) bad(s.field("u"), "required unless hardcore is true");
    s.number("u", m.u);
  }
  s.number("j", m.j);
  s.number("f", m.f);
  s.number("gamma", m.gamma);
  s.integer("n_max", m.n_max);
  s.integer("z", m.z);
}

void read_solver(Section& s, SolverSettings& o) {
  s.number("dt", o.direct.dt);
  s.number("dt_factor", o.direct.dt_factor);
  s.number("rel_tol", o.direct.rel_tol);
  s.number("abs_floor", o.direct.abs_floor);
  s.number("check_window", o.direct.check_window);
  s.number("max_time", o.direct.max_time);
  s.number("record_stride", o.direct.record_stride);
  s.integer("direct_cap", o.direct_cap);
  s.number("clip_tol", o.clip_tol);
  s.number("obs_tol", o.obs_tol);
  s.number("obs_floor", o.obs_floor);
  std::string mode = mode_name(o.operator_mode);
  s.string("operator_mode", mode);
  if (mode == "auto") {
    o.operator_mode.reset();
  } else if (mode == "exact") {
    o.operator_mode = OperatorMode::exact;
  } else if (mode == "fast") {
    o.operator_mode = OperatorMode::fast;
  } else {
    bad(s.field("operator_mode"), "expected auto, exact or fast");
  }
  s.integer("fast_mode_above", o.fast_mode_above);
  s.integer("leaf_cap", o.leaf_cap);
  s.integer("brute_force_cap", o.brute_force_cap);
}

void read_trajectories(Section& s, TrajectoryConfig& t) {
  s.integer("n_trajectories", t.n_trajectories);
  std::string prop = t.propagator == Propagator::spectral ? "spectral" : "rk4";
  s.string("propagator", prop);
  if (prop == "rk4") {
    t.propagator = Propagator::rk4;
  } else if (prop == "spectral") {
    t.propagator = Propagator::spectral;
  } else {
    bad(s.field("propagator"), "expected rk4 or spectral");
  }
  s.number("dt", t.dt);
  s.number("dt_factor", t.dt_factor);
  s.number("t_relax", t.t_relax);
  s.number("t_sample", t.t_sample);
  s.number("sample_stride", t.sample_stride);
  s.integer("seed", t.master_seed);
  s.number("jump_time_tol", t.jump_time_tol);
  s.integer("batch", t.batch);
}

}  // namespace

Geometry ExperimentConfig::base() const {
  return build_geometry(base_lx, base_ly, target.periodic_x, target.periodic_y);
}

void ExperimentConfig::validate() const {
  if (schema_version != kConfigSchemaVersion)
    bad("schema_version", "unsupported version " + std::to_string(schema_version));
  try {
    model.validate();
  } catch (const Error& e) {
    fail(ErrorCode::config, std::string("config field 'model': ") + e.what());
  }
  if (!(model.delta_omega > 0.0)) bad("model.delta_omega", "must be positive");
  if (!(model.j >= 0.0)) bad("model.j", "must be non-negative");
  if (!(model.f > 0.0)) bad("model.f", "must be positive");
  if (!model.hardcore && !(model.u >= 0.0)) bad("model.u", "must be non-negative");
  if (target.lx < 1 || target.ly < 1) bad("lattice", "lx and ly must be >= 1");
  if (base_lx < 1 || base_ly < 1) bad("base", "lx and ly must be >= 1");
  if (target.lx % base_lx != 0 || target.ly % base_ly != 0)
    bad("base", "target " + target.label() + " is not a multiple of the base cluster");
  if (m_schedule.empty()) bad("m_schedule", "must not be empty");
  for (int m : m_schedule)
    if (m < 0) bad("m_schedule", "entries must be >= 0 (0 means full)");
  if (strategy == Strategy::converge) {
    for (std::size_t k = 0; k < m_schedule.size(); ++k) {
      if (m_schedule[k] <= 0 || (k > 0 && m_schedule[k] <= m_schedule[k - 1]))
        bad("m_schedule", "the converge strategy needs positive, strictly ascending M values");
    }
  }
  if (solver.direct_cap < 1) bad("solver.direct_cap", "must be >= 1");
  if (!(solver.direct.rel_tol > 0.0)) bad("solver.rel_tol", "must be positive");
  if (!(solver.direct.dt >= 0.0)) bad("solver.dt", "must be >= 0");
  if (!(solver.direct.dt_factor > 0.0)) bad("solver.dt_factor", "must be positive");
  if (!(solver.direct.check_window > 0.0)) bad("solver.check_window", "must be positive");
  if (!(solver.direct.max_time > 0.0)) bad("solver.max_time", "must be positive");
  if (!(solver.direct.record_stride >= 0.0)) bad("solver.record_stride", "must be >= 0");
  if (!(solver.clip_tol >= 0.0)) bad("solver.clip_tol", "must be >= 0");
  if (!(solver.obs_tol > 0.0)) bad("solver.obs_tol", "must be positive");
  if (solver.leaf_cap < 1) bad("solver.leaf_cap", "must be >= 1");
  if (solver.brute_force_cap < 1) bad("solver.brute_force_cap", "must be >= 1");
  try {
    solver.trajectories.validate();
  } catch (const Error& e) {
    fail(ErrorCode::config, std::string("config field 'trajectories': ") + e.what());
  }
  if (!(meanfield.damping > 0.0 && meanfield.damping <= 1.0))
    bad("meanfield.damping", "must lie in (0, 1]");
  if (!(meanfield.tol > 0.0)) bad("meanfield.tol", "must be positive");
  if (meanfield.max_iter < 1) bad("meanfield.max_iter", "must be >= 1");
  if (outputs.dir.empty()) bad("outputs.dir", "must not be empty");
}

ExperimentConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::config, std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  {
    Section root(j, "");
    root.integer("schema_version", c.schema_version);
    root.string("name", c.name);
    root.string("preset", c.preset);
    if (root.has("model")) {
      Section s(root.at("model"), "model");
      read_model(s, c.model);
    } else {
      bad("model", "required");
    }
    if (root.has("lattice")) {
      Section s(root.at("lattice"), "lattice");
      int lx = c.target.lx, ly = c.target.ly;
      bool px = true, py = true;
      s.integer("lx", lx);
      s.integer("ly", ly);
      s.boolean("periodic_x", px);
      s.boolean("periodic_y", py);
      if (lx < 1 || ly < 1) bad("lattice", "lx and ly must be >= 1");
      c.target = build_geometry(lx, ly, px, py);
    }
    if (root.has("base")) {
      Section s(root.at("base"), "base");
      s.integer("lx", c.base_lx);
      s.integer("ly", c.base_ly);
    }
    std::string method = method_name(c.method);
    root.string("method", method);
    if (method == "corner") {
      c.method = Method::corner;
    } else if (method == "meanfield") {
      c.method = Method::meanfield;
    } else if (method == "brute_force") {
      c.method = Method::brute_force;
    } else {
      bad("method", "expected corner, meanfield or brute_force");
    }
    std::string strategy = strategy_name(c.strategy);
    root.string("strategy", strategy);
    if (strategy == "schedule") {
      c.strategy = Strategy::schedule;
    } else if (strategy == "progression") {
      c.strategy = Strategy::progression;
    } else if (strategy == "converge") {
      c.strategy = Strategy::converge;
    } else {
      bad("strategy", "expected schedule, progression or converge");
    }
    if (root.has("m_schedule")) {
      const json& m = root.at("m_schedule");
      if (!m.is_array()) bad("m_schedule", "expected a list of integers");
      c.m_schedule.clear();
      for (const auto& v : m) {
        if (!v.is_number_integer()) bad("m_schedule", "expected a list of integers");
        const auto x = v.get<long long>();
        if (x < 0 || x > std::numeric_limits<int>::max()) bad("m_schedule", "entry out of range");
        c.m_schedule.push_back(static_cast<int>(x));
      }
    }
    root.boolean("include_meanfield", c.include_meanfield);
    if (root.has("solver")) {
      Section s(root.at("solver"), "solver");
      read_solver(s, c.solver);
    }
    if (root.has("trajectories")) {
      Section s(root.at("trajectories"), "trajectories");
      read_trajectories(s, c.solver.trajectories);
    }
    if (root.has("meanfield")) {
      Section s(root.at("meanfield"), "meanfield");
      s.number("damping", c.meanfield.damping);
      s.number("tol", c.meanfield.tol);
      s.integer("max_iter", c.meanfield.max_iter);
    }
    if (root.has("outputs")) {
      Section s(root.at("outputs"), "outputs");
      s.string("dir", c.outputs.dir);
      s.string("results", c.outputs.results);
      s.string("spectrum", c.outputs.spectrum);
      s.string("timeseries", c.outputs.timeseries);
      s.string("manifest", c.outputs.manifest);
      s.string("checkpoint_dir", c.outputs.checkpoint_dir);
    }
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

std::string config_to_json(const ExperimentConfig& c, int indent) {
  return config_json(c).dump(indent);
}

std::string format_number(std::optional<double> v) {
  if (!v || !std::isfinite(*v)) return "";
  double x = *v;
  if (x == 0.0) x = 0.0;  // no "-0"
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

namespace {

ResultRow row_from(const NodeSolve& s) {
  return {s.geometry.lx, s.geometry.ly, static_cast<long long>(s.m), to_string(s.solver), s.record};
}

json node_json(const NodeSolve& s) {
  json j;
  j["node"] = s.node;
  j["geometry"] = s.geometry.label();
  j["m"] = s.m;
  j["leaf"] = s.leaf;
  j["brute_force"] = s.brute_force;
  j["restored"] = s.restored;
  j["solver"] = to_string(s.solver);
  j["operator_mode"] = s.mode == OperatorMode::exact ? "exact" : "fast";
  j["seed"] = s.seed;
  j["dt"] = s.dt;
  j["seconds"] = s.seconds;
  j["termination"] = s.termination;
  j["converged"] = s.converged;
  j["captured_probability"] = s.captured_probability;
  j["warnings"] = s.warnings;
  return j;
}

ObservableRecord meanfield_record(const MeanFieldSolution& mf) {
  ObservableRecord r;
  r.n = mf.n;
  r.re_b = mf.b.real();
  r.im_b = mf.b.imag();
  r.g2_onsite = mf.g2;
  if (mf.n > 0.0) r.g2_nn = 1.0;  // factorized state
  return r;
}

}  // namespace

ExperimentResult execute_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentResult out;
  // the output location does not change the computation
  ExperimentConfig id_config = config;
  id_config.outputs = OutputSpec{};
  out.run_id = hex64(fnv1a(config_to_json(id_config, -1)));
  const ModelParams& p = config.model;
  const SolverSettings& settings = config.solver;
  json mf_json = nullptr;

  if (config.include_meanfield || config.method == Method::meanfield) {
    MeanFieldOptions o = config.meanfield;
    o.throw_on_failure = false;
    const MeanFieldSolution mf = gutzwiller_fixed_point(p, o);
    out.rows.push_back({1, 1, p.n_max + 1, "meanfield", meanfield_record(mf)});
    mf_json = {{"iterations", mf.iterations}, {"residual", mf.residual},
               {"converged", mf.converged},   {"oscillating", mf.oscillating}};
    if (!mf.converged) {
      out.converged = false;
      out.warnings.push_back("mean-field iteration stopped after " +
                             std::to_string(mf.iterations) + " iterations, residual " +
                             format_number(mf.residual) + (mf.oscillating ? " (oscillating)" : ""));
    }
  }

  if (config.method == Method::brute_force) {
    SolvedCluster s = solve_brute_force(config.target, p, settings);
    out.solves.push_back(s.report);
    out.spectrum = s.report.spectrum;
    out.series = s.report.series;
  } else if (config.method == Method::corner) {
    const Geometry base = config.base();
    json fp = {{"model", model_json(p)},
               {"solver", solver_json(settings)},
               {"trajectories", trajectories_json(settings.trajectories)},
               {"target", config.target.label()},
               {"periodic", {config.target.periodic_x, config.target.periodic_y}},
               {"base", base.label()}};
    SolveCache cache(config.outputs.checkpoint_dir, fp.dump());
    std::shared_ptr<const SolvedCluster> root;
    switch (config.strategy) {
      case Strategy::schedule: {
        const auto sched =
            plan_merge_schedule(config.target, base, config.m_schedule, p.n_max, settings.leaf_cap);
        PipelineResult r = run_schedule(sched, p, settings, &cache);
        out.solves = r.solves;
        root = r.root;
        break;
      }
      case Strategy::progression: {
        ProgressionResult r =
            run_progression(config.target, base, p, config.m_schedule, settings, &cache);
        for (const auto& pass : r.passes)
          out.solves.insert(out.solves.end(), pass.solves.begin(), pass.solves.end());
        if (!r.converged) out.converged = false;
        // progression-level warnings not already carried by a node
        std::set<std::string> seen;
        for (const auto& s : out.solves) seen.insert(s.warnings.begin(), s.warnings.end());
        for (const auto& w : r.warnings)
          if (!seen.count(w)) out.warnings.push_back(w);
        root = r.passes.back().root;
        break;
      }
      case Strategy::converge: {
        const auto sched = plan_merge_schedule(config.target, base, {0}, p.n_max, settings.leaf_cap);
        auto [r, report] = converge_in_m(sched, p, config.m_schedule, settings);
        out.solves = report.leaves;
        for (const auto& n : report.nodes)
          out.solves.insert(out.solves.end(), n.attempts.begin(), n.attempts.end());
        if (!report.converged) out.converged = false;
        std::set<std::string> seen;
        for (const auto& s : out.solves) seen.insert(s.warnings.begin(), s.warnings.end());
        for (const auto& w : report.warnings)
          if (!seen.count(w)) out.warnings.push_back(w);
        root = r;
        break;
      }
    }
    out.spectrum = root->report.spectrum;
    out.series = root->report.series;
  }

  for (const auto& s : out.solves) {
    out.rows.push_back(row_from(s));
    if (!s.converged) out.converged = false;
    for (const auto& w : s.warnings) out.warnings.push_back(s.geometry.label() + ": " + w);
  }
  out.exit_code = out.converged ? 0 : 2;

  json m;
  m["run_id"] = out.run_id;
  m["code_version"] = kCodeVersion;
  m["schema_version"] = kConfigSchemaVersion;
  m["config"] = config_json(config);
  m["threads"] = configured_threads();
  m["meanfield"] = mf_json;
  json nodes = json::array();
  for (const auto& s : out.solves) nodes.push_back(node_json(s));
  m["nodes"] = nodes;
  m["warnings"] = out.warnings;
  m["converged"] = out.converged;
  m["exit_code"] = out.exit_code;
  m["outputs"] = {{"results", config.outputs.results},
                  {"spectrum", config.outputs.spectrum},
                  {"timeseries", config.outputs.timeseries}};
  out.manifest_json = m.dump(2);
  return out;
}

std::string results_csv(const ExperimentResult& r) {
  std::ostringstream os;
  os << "run_id,Lx,Ly,M,solver,n,n_err,re_b,re_b_err,im_b,im_b_err,g2,g2_err,g2_nn,g2_nn_err\n";
  for (const auto& row : r.rows) {
    const ObservableRecord& x = row.record;
    auto err = [&](double e) { return x.has_errors ? format_number(e) : std::string(); };
    auto err_opt = [&](const std::optional<double>& e) {
      return x.has_errors ? format_number(e) : std::string();
    };
    os << r.run_id << ',' << row.lx << ',' << row.ly << ',' << row.m << ',' << row.solver << ','
       << format_number(x.n) << ',' << err(x.n_err) << ',' << format_number(x.re_b) << ','
       << err(x.re_b_err) << ',' << format_number(x.im_b) << ',' << err(x.im_b_err) << ','
       << format_number(x.g2_onsite) << ',' << err_opt(x.g2_err) << ',' << format_number(x.g2_nn)
       << ',' << err_opt(x.g2_nn_err) << '\n';
  }
  return os.str();
}

std::string spectrum_csv(const ExperimentResult& r) {
  std::ostringstream os;
  os << "rank,p_r,n_tot_r\n";
  for (const auto& s : r.spectrum)
    os << s.rank << ',' << format_number(s.p) << ',' << format_number(s.n_total) << '\n';
  return os.str();
}

std::string timeseries_csv(const ExperimentResult& r) {
  std::ostringstream os;
  os << "t,n,g2\n";
  for (const auto& tp : r.series)
    os << format_number(tp.t) << ',' << format_number(tp.n) << ',' << format_number(tp.g2) << '\n';
  return os.str();
}

void write_outputs(const ExperimentConfig& config, const ExperimentResult& result) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(config.outputs.dir, ec);
  if (ec) fail(ErrorCode::io, "cannot create output directory " + config.outputs.dir + ": " + ec.message());
  auto put = [&](const std::string& name, const std::string& text) {
    const fs::path path = fs::path(config.outputs.dir) / name;
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f << text;
    f.flush();
    if (!f) fail(ErrorCode::io, "cannot write " + path.string());
  };
  put(config.outputs.results, results_csv(result));
  put(config.outputs.spectrum, spectrum_csv(result));
  put(config.outputs.timeseries, timeseries_csv(result));
  put(config.outputs.manifest, result.manifest_json + "\n");
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  ExperimentResult r = execute_experiment(config);
  write_outputs(config, r);
  return r;
}

// ---- presets ----

namespace {

ExperimentConfig preset_base(const std::string& name, const std::string& preset) {
  ExperimentConfig c;
  c.name = name;
  c.preset = preset;
  c.model.delta_omega = 5.0;
  c.model.f = 2.0;
  c.model.gamma = 1.0;
  c.model.z = 4;
  c.solver.trajectories.master_seed = 20140601;
  c.solver.trajectories.propagator = Propagator::spectral;
  return c;
}

void hard(ExperimentConfig& c, double j) {
  c.model.hardcore = true;
  c.model.u = std::numeric_limits<double>::infinity();
  c.model.n_max = 1;
  c.model.j = j;
}

void soft(ExperimentConfig& c, double u, double j, int n_max) {
  c.model.hardcore = false;
  c.model.u = u;
  c.model.j = j;
  c.model.n_max = n_max;
}

void lattice(ExperimentConfig& c, int lx, int ly, int bx, int by) {
  c.target = build_geometry(lx, ly, true, true);
  c.base_lx = bx;
  c.base_ly = by;
}

}  // namespace

std::vector<PresetInfo> list_presets() {
  return {
      {"table1", "4x4 hard-core bosons, J=1, F=2, dw=5: M progression 20..1600 from 2x2 leaves",
       "Table I"},
      {"table2", "4x4 soft-core U=20, J=3, N_max=3: M progression 20..6400 from 2x2 leaves",
       "Table II"},
      {"table3", "mean-field vs corner rows for hard-core, U=20 (J=1,3), U=10, U=1 and U=0.5",
       "Table III"},
      {"fig2", "time evolution of n and g2 for 3x3, 4x4 and 6x3 at U=20, J=3", "Fig. 2"},
      {"fig3", "probability spectrum of the 6x3 steady state, soft-core and hard-core",
       "Fig. 3"},
  };
}

std::vector<ExperimentConfig> preset_configs(const std::string& name,
                                             std::optional<std::uint64_t> seed,
                                             std::optional<int> m_max) {
  std::vector<ExperimentConfig> rows;
  if (name == "table1") {
    auto c = preset_base("table1", name);
    hard(c, 1.0);
    lattice(c, 4, 4, 2, 2);
    c.m_schedule = {20, 50, 100, 200, 400, 800, 1600};
    rows.push_back(c);
  } else if (name == "table2") {
    auto c = preset_base("table2", name);
    soft(c, 20.0, 3.0, 3);
    lattice(c, 4, 4, 2, 2);
    c.m_schedule = {20, 50, 100, 200, 400, 800, 1600, 3200, 6400};
    rows.push_back(c);
  } else if (name == "table3") {
    struct Row {
      const char* id;
      double u;  // < 0 for hard-core
      double j;
      int n_max, lx, ly, bx, by, m;
    };
    const Row table[] = {
        {"hardcore_8x4", -1, 1, 1, 8, 4, 2, 2, 1600},  {"hardcore_8x8", -1, 1, 1, 8, 8, 2, 2, 8000},
        {"u20_j1_4x4", 20, 1, 3, 4, 4, 2, 2, 3200},    {"u20_j1_6x3", 20, 1, 3, 6, 3, 3, 1, 6400},
        {"u20_j3_4x4", 20, 3, 3, 4, 4, 2, 2, 6400},    {"u20_j3_6x3", 20, 3, 3, 6, 3, 3, 1, 6400},
        {"u10_4x2", 10, 1, 5, 4, 2, 2, 2, 6400},       {"u10_3x3", 10, 1, 5, 3, 3, 3, 1, 8000},
        {"u1_16x8", 1, 1, 4, 16, 8, 2, 2, 600},        {"u0.5_16x16", 0.5, 1, 4, 16, 16, 2, 2, 400},
    };
    for (const Row& r : table) {
      auto c = preset_base(std::string("table3_") + r.id, name);
      if (r.u < 0) {
        hard(c, r.j);
      } else {
        soft(c, r.u, r.j, r.n_max);
      }
      lattice(c, r.lx, r.ly, r.bx, r.by);
      c.strategy = Strategy::schedule;
      c.m_schedule = {r.m};
      rows.push_back(c);
    }
  } else if (name == "fig2") {
    const int shapes[][4] = {{3, 3, 3, 1}, {4, 4, 2, 2}, {6, 3, 3, 1}};
    for (const auto& s : shapes) {
      auto c = preset_base("fig2_" + std::to_string(s[0]) + "x" + std::to_string(s[1]), name);
      soft(c, 20.0, 3.0, 3);
      lattice(c, s[0], s[1], s[2], s[3]);
      c.strategy = Strategy::schedule;
      c.m_schedule = {400};
      c.solver.direct.record_stride = 0.1;
      rows.push_back(c);
    }
  } else if (name == "fig3") {
    auto s = preset_base("fig3_softcore", name);
    soft(s, 20.0, 3.0, 3);
    lattice(s, 6, 3, 3, 1);
    s.strategy = Strategy::schedule;
    s.m_schedule = {400};
    rows.push_back(s);
    auto h = preset_base("fig3_hardcore", name);
    hard(h, 1.0);
    lattice(h, 6, 3, 3, 1);
    h.strategy = Strategy::schedule;
    h.m_schedule = {400};
    rows.push_back(h);
  } else {
    std::string known;
    for (const auto& p : list_presets()) known += (known.empty() ? "" : ", ") + p.name;
    fail(ErrorCode::config, "unknown preset '" + name + "' (known: " + known + ")");
  }
  for (auto& c : rows) {
    if (seed) c.solver.trajectories.master_seed = *seed;
    if (m_max) {
      require(*m_max >= 1, "--m-max must be >= 1", ErrorCode::config);
      std::vector<int> kept;
      for (int m : c.m_schedule)
        if (m <= *m_max) kept.push_back(m);
      if (kept.empty()) kept.push_back(*m_max);
      c.m_schedule = kept;
    }
    c.outputs.dir = c.name;
    c.validate();
  }
  return rows;
}

}  // namespace cornerspace
