#include "run_config.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <toml.hpp>

#include "gridrecon/error.hpp"
#include "gridrecon/io.hpp"

namespace gridrecon::cli {

namespace {

constexpr const char* kSubcommands[] = {"impute", "tune", "dsse", "experiment", "verify"};

/// Strict reader over one TOML table: every key must be consumed exactly by a known field.
class Section {
 public:
  Section(const toml::table& table, std::string path) : table_(table), path_(std::move(path)) {}

  void number(const char* key, double& dst) {
    if (const auto* n = find(key)) dst = as_number(*n, name(key));
  }
  void integer(const char* key, int& dst) {
    if (const auto* n = find(key)) dst = static_cast<int>(as_integer(*n, name(key)));
  }
  void unsigned_integer(const char* key, std::uint64_t& dst) {
    if (const auto* n = find(key)) {
      const auto v = as_integer(*n, name(key));
      require(v >= 0, ErrorCode::TypeError, name(key) + ": expected a nonnegative integer");
      dst = static_cast<std::uint64_t>(v);
    }
  }
  void boolean(const char* key, bool& dst) {
    if (const auto* n = find(key)) {
      if (!n->is_boolean()) fail(ErrorCode::TypeError, name(key) + ": expected a boolean");
      dst = *n->value<bool>();
    }
  }
  bool text(const char* key, std::string& dst) {
    const auto* n = find(key);
    if (!n) return false;
    if (!n->is_string()) fail(ErrorCode::TypeError, name(key) + ": expected a string");
    dst = *n->value<std::string>();
    return true;
  }
  void path(const char* key, std::optional<std::filesystem::path>& dst) {
    std::string s;
    if (text(key, s)) dst = s;
  }
  void numbers(const char* key, std::vector<double>& dst) {
    if (const auto* a = array(key)) {
      dst.clear();
      for (std::size_t i = 0; i < a->size(); ++i) dst.push_back(as_number((*a)[i], item(key, i)));
    }
  }
  void integers(const char* key, std::vector<int>& dst) {
    if (const auto* a = array(key)) {
      dst.clear();
      for (std::size_t i = 0; i < a->size(); ++i) dst.push_back(static_cast<int>(as_integer((*a)[i], item(key, i))));
    }
  }
  bool strings(const char* key, std::vector<std::string>& dst) {
    const auto* a = array(key);
    if (!a) return false;
    dst.clear();
    for (std::size_t i = 0; i < a->size(); ++i) {
      if (!(*a)[i].is_string()) fail(ErrorCode::TypeError, item(key, i) + ": expected a string");
      dst.push_back(*(*a)[i].value<std::string>());
    }
    return true;
  }
  void pair(const char* key, std::pair<double, double>& dst) {
    std::vector<double> v;
    numbers(key, v);
    if (!find_raw(key)) return;
    require(v.size() == 2, ErrorCode::TypeError, name(key) + ": expected two numbers");
    dst = {v[0], v[1]};
  }
  void matrix(const char* key, std::optional<Eigen::MatrixXd>& dst) {
    const auto* a = array(key);
    if (!a) return;
    Eigen::MatrixXd m;
    for (std::size_t i = 0; i < a->size(); ++i) {
      const auto* row = (*a)[i].as_array();
      if (!row) fail(ErrorCode::TypeError, item(key, i) + ": expected an array row");
      if (i == 0) m.resize(static_cast<Eigen::Index>(a->size()), static_cast<Eigen::Index>(row->size()));
      require(static_cast<Eigen::Index>(row->size()) == m.cols(), ErrorCode::TypeError, item(key, i) + ": ragged matrix");
      for (std::size_t j = 0; j < row->size(); ++j)
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = as_number((*row)[j], item(key, i));
    }
    dst = std::move(m);
  }
  std::optional<Section> table(const char* key) {
    const auto* n = find(key);
    if (!n) return std::nullopt;
    if (!n->is_table()) fail(ErrorCode::TypeError, name(key) + ": expected a table");
    return Section(*n->as_table(), name(key));
  }
  /// Array of tables; each element is handed over as a strict Section.
  std::vector<Section> tables(const char* key) {
    std::vector<Section> out;
    if (const auto* a = array(key))
      for (std::size_t i = 0; i < a->size(); ++i) {
        const auto* t = (*a)[i].as_table();
        if (!t) fail(ErrorCode::TypeError, item(key, i) + ": expected a table");
        out.emplace_back(*t, item(key, i));
      }
    return out;
  }
  /// Fails on the first key that no field consumed.
  void finish() const {
    for (const auto& [k, v] : table_)
      if (!seen_.count(std::string(k.str())))
        fail(ErrorCode::UnknownKey, "unknown key '" + name(std::string(k.str()).c_str()) + "'");
  }
  std::string name(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const toml::node* find_raw(const char* key) const { return table_.get(key); }
  const toml::node* find(const char* key) {
    seen_.insert(key);
    return table_.get(key);
  }
  const toml::array* array(const char* key) {
    const auto* n = find(key);
    if (!n) return nullptr;
    if (!n->is_array()) fail(ErrorCode::TypeError, name(key) + ": expected an array");
    return n->as_array();
  }
  std::string item(const char* key, std::size_t i) const { return name(key) + "[" + std::to_string(i) + "]"; }
  static double as_number(const toml::node& n, const std::string& where) {
    if (n.is_floating_point()) return *n.value<double>();
    if (n.is_integer()) return static_cast<double>(*n.value<std::int64_t>());
    fail(ErrorCode::TypeError, where + ": expected a number");
  }
  static std::int64_t as_integer(const toml::node& n, const std::string& where) {
    if (!n.is_integer()) fail(ErrorCode::TypeError, where + ": expected an integer");
    return *n.value<std::int64_t>();
  }

  const toml::table& table_;
  std::string path_;
  std::set<std::string> seen_;
};

Method method_from(const std::string& text) {
  try {
    return parse_method(text);
  } catch (const Error&) {
    fail(ErrorCode::InvalidSpec, "unknown method '" + text + "' (full-gp, rgp, rgp-g, linear)");
  }
}

NoiseMode mode_from(const std::string& text) {
  if (text == "standard") return NoiseMode::standard;
  if (text == "paper-literal") return NoiseMode::paper_literal;
  fail(ErrorCode::InvalidSpec, "unknown mode '" + text + "' (standard, paper-literal)");
}

Schedule schedule_from(const std::string& text) {
  if (text == "interpolate") return Schedule::interpolation;
  if (text == "predict") return Schedule::prediction;
  fail(ErrorCode::InvalidSpec, "unknown schedule '" + text + "' (interpolate, predict)");
}

std::vector<Method> methods_from(const std::vector<std::string>& names) {
  std::vector<Method> out;
  for (const auto& n : names) out.push_back(method_from(n));
  return out;
}

void read_gp(Section s, GpSettings& gp) {
  s.number("lengthscale", gp.hp.lengthscale);
  s.number("signal_variance", gp.hp.signal_variance);
  s.number("noise_variance", gp.hp.noise_variance);
  s.number("task_correlation", gp.task_corr);
  s.matrix("task_matrix", gp.task_matrix);
  s.number("alpha", gp.alpha);
  s.integer("basis_n", gp.basis_n);
  s.boolean("standardize", gp.standardize);
  s.finish();
}

std::vector<TaskSampling> read_tasks(std::vector<Section> sections) {
  std::vector<TaskSampling> tasks;
  for (auto& s : sections) {
    TaskSampling t;
    std::string q;
    if (!s.text("quantity", q)) fail(ErrorCode::MissingRequired, s.name("quantity") + " is required");
    t.quantity = parse_quantity(q);
    s.integer("period", t.period);
    s.integer("offset", t.offset);
    s.boolean("metered", t.metered);
    double rel = -1.0;
    s.number("relative_std", rel);
    if (rel >= 0.0) t.relative_std = rel;
    s.finish();
    tasks.push_back(t);
  }
  return tasks;
}

void read_solver(Section s, SolverOptions& o) {
  s.integer("max_iterations", o.max_iterations);
  s.number("tolerance", o.tolerance);
  s.number("mu_initial", o.mu_initial);
  s.number("mu_max", o.mu_max);
  s.integer("mu_bisections", o.mu_bisections);
  s.boolean("refine_rank", o.refine_rank);
  s.integer("max_rank", o.max_rank);
  s.integer("restarts", o.restarts);
  s.integer("refine_iterations", o.refine_iterations);
  s.unsigned_integer("seed", o.seed);
  s.finish();
}

void read_file(const std::filesystem::path& file, RunConfig& rc) {
  toml::table root;
  try {
    root = toml::parse(read_text(file), file.string());
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << file.string() << ":" << e.source().begin.line << ": " << e.description();
    fail(ErrorCode::ParseError, msg.str());
  }
  Section top(root, "");
  auto& ex = rc.experiment;
  std::string written_for;
  top.text("subcommand", written_for);  // informational; the command line picks the subcommand
  top.unsigned_integer("seed", rc.seed);
  std::optional<std::filesystem::path> out;
  top.path("out", out);
  if (out) rc.out = *out;
  std::string text;
  if (top.text("mode", text)) ex.gp.noise_mode = mode_from(text);
  top.boolean("verify_theorems", ex.gp.verify_theorems);
  top.boolean("trace_log", rc.trace_log);

  if (auto s = top.table("input")) {
    s->path("measurements", rc.measurements);
    s->path("edges", rc.edges);
    s->path("pf_model", rc.pf_model);
    s->finish();
  }
  if (auto s = top.table("impute")) {
    if (s->text("method", text)) rc.method = method_from(text);
    if (s->text("schedule", text)) ex.gp.schedule = schedule_from(text);
    double v = std::nan("");
    s->number("grid_start", v);
    if (!std::isnan(v)) rc.fine_grid.start = v;
    v = std::nan("");
    s->number("grid_end", v);
    if (!std::isnan(v)) rc.fine_grid.end = v;
    s->number("grid_step", rc.fine_grid.step);
    s->finish();
  }
  if (auto s = top.table("gp")) read_gp(*s, ex.gp);
  if (auto s = top.table("tune")) {
    if (s->text("method", text)) rc.tune_method = method_from(text);
    s->numbers("lengthscale", ex.grid.lengthscale_grid);
    s->numbers("signal_variance", ex.grid.signal_var_grid);
    s->numbers("noise_variance", ex.grid.noise_var_grid);
    s->numbers("task_correlation", ex.grid.task_corr_grid);
    s->integer("folds", ex.grid.folds);
    s->finish();
  }
  if (auto s = top.table("feeder")) {
    s->integer("buses", ex.feeder.buses);
    s->number("r_min", ex.feeder.r_min);
    s->number("r_max", ex.feeder.r_max);
    s->number("x_over_r", ex.feeder.x_over_r);
    s->integer("branching", ex.feeder.branching);
    s->finish();
  }
  if (auto s = top.table("profile")) {
    auto& p = ex.profile;
    s->integer("horizon", p.horizon_steps);
    s->number("step_minutes", p.step_minutes);
    s->number("start_minute", p.start_minute);
    s->pair("base_load_range", p.base_load_range);
    s->number("power_factor", p.power_factor);
    s->pair("sinusoid_amplitude_range", p.sinusoid_amplitude_range);
    s->pair("sinusoid_period_minutes", p.sinusoid_period_minutes);
    s->integer("sinusoid_count", p.sinusoid_count);
    s->number("noise_scale", p.noise_scale);
    s->number("spatial_alpha", p.spatial_alpha);
    s->number("base_power_kw", p.base_power_kw);
    s->finish();
  }
  if (auto s = top.table("experiment")) {
    s->integer("seed_count", ex.seed_count);
    s->numbers("missing", ex.missing_levels);
    s->number("fad", ex.fad);
    std::vector<std::string> names;
    if (s->strings("methods", names)) ex.methods = methods_from(names);
    s->integer("areas", ex.areas);
    s->integer("grid_stride", ex.grid_stride);
    s->boolean("tune", ex.tune);
    s->boolean("dsse", ex.dsse.enabled);
    auto tasks = s->tables("tasks");
    if (!tasks.empty()) ex.tasks = read_tasks(std::move(tasks));
    auto noises = s->tables("noise");
    if (!noises.empty()) {
      ex.noises.clear();
      for (auto& n : noises) {
        NoiseSpec spec;
        if (n.text("family", text)) spec.family = parse_noise_family(text);
        n.number("relative_std", spec.relative_std);
        n.finish();
        ex.noises.push_back(spec);
      }
    }
    s->finish();
  }
  if (auto s = top.table("dsse")) {
    auto& d = ex.dsse;
    s->numbers("fad", d.fad_levels);
    std::vector<std::string> names;
    if (s->strings("sources", names)) d.sources = methods_from(names);
    s->integer("snapshots", d.snapshots);
    s->number("epsilon", d.epsilon);
    s->number("lambda_pf", d.lambda_pf);
    std::vector<int> columns;
    s->integers("task_columns", columns);
    if (!columns.empty()) {
      require(columns.size() == kStateColumns, ErrorCode::TypeError, s->name("task_columns") + ": expected 5 entries");
      std::copy(columns.begin(), columns.end(), rc.dsse_input.task_columns.begin());
    }
    s->integers("metered_phases", rc.dsse_input.metered_phases);
    auto tasks = s->tables("tasks");
    if (!tasks.empty()) d.tasks = read_tasks(std::move(tasks));
    if (auto solver = s->table("solver")) read_solver(*solver, d.solver);
    if (auto gp = s->table("gp")) {
      d.gp = ex.gp;
      read_gp(*gp, *d.gp);
    }
    s->finish();
  }
  if (auto s = top.table("verify")) {
    s->strings("checks", rc.checks);
    s->finish();
  }
  top.finish();
}

toml::array toml_numbers(const std::vector<double>& v) {
  toml::array a;
  for (double x : v) a.push_back(x);
  return a;
}

toml::array toml_strings(const auto& v) {
  toml::array a;
  for (const auto& x : v) a.push_back(std::string(to_string(x)));
  return a;
}

toml::table toml_gp(const GpSettings& gp) {
  toml::table t{{"lengthscale", gp.hp.lengthscale},   {"signal_variance", gp.hp.signal_variance},
                {"noise_variance", gp.hp.noise_variance}, {"task_correlation", gp.task_corr},
                {"alpha", gp.alpha},                  {"basis_n", gp.basis_n},
                {"standardize", gp.standardize}};
  if (gp.task_matrix) {
    toml::array rows;
    for (Eigen::Index i = 0; i < gp.task_matrix->rows(); ++i) {
      toml::array row;
      for (Eigen::Index j = 0; j < gp.task_matrix->cols(); ++j) row.push_back((*gp.task_matrix)(i, j));
      rows.push_back(std::move(row));
    }
    t.insert("task_matrix", std::move(rows));
  }
  return t;
}

toml::array toml_tasks(const std::vector<TaskSampling>& tasks) {
  toml::array a;
  for (const auto& t : tasks) {
    toml::table row{{"quantity", std::string(to_string(t.quantity))},
                    {"period", t.period},
                    {"offset", t.offset},
                    {"metered", t.metered}};
    if (t.relative_std) row.insert("relative_std", *t.relative_std);
    a.push_back(std::move(row));
  }
  return a;
}

std::string toml_text(const RunConfig& rc, bool with_out) {
  const auto& ex = rc.experiment;
  toml::table root;
  root.insert("subcommand", std::string(to_string(rc.subcommand)));
  root.insert("seed", static_cast<std::int64_t>(rc.seed));
  if (with_out) root.insert("out", rc.out.generic_string());
  root.insert("mode", ex.gp.noise_mode == NoiseMode::standard ? "standard" : "paper-literal");
  root.insert("verify_theorems", ex.gp.verify_theorems);
  root.insert("trace_log", rc.trace_log);
  toml::table input;
  if (rc.measurements) input.insert("measurements", rc.measurements->generic_string());
  if (rc.edges) input.insert("edges", rc.edges->generic_string());
  if (rc.pf_model) input.insert("pf_model", rc.pf_model->generic_string());
  root.insert("input", std::move(input));
  toml::table impute{{"method", std::string(to_string(rc.method))},
                     {"schedule", ex.gp.schedule == Schedule::interpolation ? "interpolate" : "predict"},
                     {"grid_step", rc.fine_grid.step}};
  if (rc.fine_grid.start) impute.insert("grid_start", *rc.fine_grid.start);
  if (rc.fine_grid.end) impute.insert("grid_end", *rc.fine_grid.end);
  root.insert("impute", std::move(impute));
  root.insert("gp", toml_gp(ex.gp));
  root.insert("tune", toml::table{{"method", std::string(to_string(rc.tune_method))},
                                  {"lengthscale", toml_numbers(ex.grid.lengthscale_grid)},
                                  {"signal_variance", toml_numbers(ex.grid.signal_var_grid)},
                                  {"noise_variance", toml_numbers(ex.grid.noise_var_grid)},
                                  {"task_correlation", toml_numbers(ex.grid.task_corr_grid)},
                                  {"folds", ex.grid.folds}});
  root.insert("feeder", toml::table{{"buses", ex.feeder.buses},
                                    {"r_min", ex.feeder.r_min},
                                    {"r_max", ex.feeder.r_max},
                                    {"x_over_r", ex.feeder.x_over_r},
                                    {"branching", ex.feeder.branching}});
  const auto& p = ex.profile;
  root.insert("profile",
              toml::table{{"horizon", p.horizon_steps},
                          {"step_minutes", p.step_minutes},
                          {"start_minute", p.start_minute},
                          {"base_load_range", toml_numbers({p.base_load_range.first, p.base_load_range.second})},
                          {"power_factor", p.power_factor},
                          {"sinusoid_amplitude_range",
                           toml_numbers({p.sinusoid_amplitude_range.first, p.sinusoid_amplitude_range.second})},
                          {"sinusoid_period_minutes",
                           toml_numbers({p.sinusoid_period_minutes.first, p.sinusoid_period_minutes.second})},
                          {"sinusoid_count", p.sinusoid_count},
                          {"noise_scale", p.noise_scale},
                          {"spatial_alpha", p.spatial_alpha},
                          {"base_power_kw", p.base_power_kw}});
  toml::array noises;
  for (const auto& n : ex.noises)
    noises.push_back(toml::table{{"family", std::string(to_string(n.family))}, {"relative_std", n.relative_std}});
  root.insert("experiment", toml::table{{"seed_count", ex.seed_count},
                                        {"missing", toml_numbers(ex.missing_levels)},
                                        {"fad", ex.fad},
                                        {"methods", toml_strings(ex.methods)},
                                        {"areas", ex.areas},
                                        {"grid_stride", ex.grid_stride},
                                        {"tune", ex.tune},
                                        {"dsse", ex.dsse.enabled},
                                        {"tasks", toml_tasks(ex.tasks)},
                                        {"noise", std::move(noises)}});
  const auto& d = ex.dsse;
  toml::array columns, metered;
  for (int c : rc.dsse_input.task_columns) columns.push_back(c);
  for (int m : rc.dsse_input.metered_phases) metered.push_back(m);
  const auto& so = d.solver;
  toml::table dsse{{"fad", toml_numbers(d.fad_levels)},
                   {"sources", toml_strings(d.sources)},
                   {"snapshots", d.snapshots},
                   {"epsilon", d.epsilon},
                   {"lambda_pf", d.lambda_pf},
                   {"task_columns", std::move(columns)},
                   {"metered_phases", std::move(metered)},
                   {"tasks", toml_tasks(d.tasks)},
                   {"solver", toml::table{{"max_iterations", so.max_iterations},
                                          {"tolerance", so.tolerance},
                                          {"mu_initial", so.mu_initial},
                                          {"mu_max", so.mu_max},
                                          {"mu_bisections", so.mu_bisections},
                                          {"refine_rank", so.refine_rank},
                                          {"max_rank", so.max_rank},
                                          {"restarts", so.restarts},
                                          {"refine_iterations", so.refine_iterations},
                                          {"seed", static_cast<std::int64_t>(so.seed)}}}};
  if (d.gp) dsse.insert("gp", toml_gp(*d.gp));
  root.insert("dsse", std::move(dsse));
  toml::array checks;
  for (const auto& c : rc.checks) checks.push_back(c);
  root.insert("verify", toml::table{{"checks", std::move(checks)}});
  std::ostringstream s;
  s << root << "\n";
  return s.str();
}

}  // namespace

std::string_view to_string(Subcommand s) { return kSubcommands[static_cast<int>(s)]; }

const std::vector<std::string>& known_checks() {
  static const std::vector<std::string> names{"theorem1", "theorem2", "stability", "oracle", "causality", "symmetry"};
  return names;
}

std::string RunConfig::effective_toml() const { return toml_text(*this, true); }

std::string RunConfig::digest() const { return digest_hex(toml_text(*this, false)); }

std::optional<RunConfig> parse_config(int argc, const char* const* argv) {
  CLI::App app{"Multi-rate sensor reconciliation and distribution state estimation", "gridrecon"};
  app.fallthrough();
  app.require_subcommand(0, 1);

  std::optional<std::string> config, out, mode, schedule, measurements, edges, pf_model;
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;
  std::vector<std::string> methods, checks;
  bool verify_theorems = false, trace_log = false, break_symmetry = false;

  app.add_option("--config", config, "TOML configuration file");
  app.add_option("--seed", seed, "Root seed of every random stream");
  app.add_option("--out", out, "Output directory");
  app.add_option("--mode", mode, "Noise handling: standard | paper-literal");
  app.add_option("--method", methods, "full-gp | rgp | rgp-g | linear");
  app.add_option("--alpha", alpha, "Graph smoothing strength");
  app.add_option("--schedule", schedule, "Recursive schedule: interpolate | predict");
  app.add_option("--measurements", measurements, "Measurement CSV (time,task,node,value,observed)");
  app.add_option("--edges", edges, "Edge CSV (from,to) over node indices");
  app.add_option("--pf-model", pf_model, "Linear power-flow model JSON");
  app.add_option("--checks", checks, "Comma separated verify checks")->delimiter(',');
  app.add_flag("--verify-theorems", verify_theorems, "Assert trace and covariance properties on every step");
  app.add_flag("--trace-log", trace_log, "Write the per-step trace of the basis covariance");
  app.add_flag("--break-symmetry", break_symmetry, "Test hook: inject an asymmetric adjacency into verify");
  for (const char* name : kSubcommands) app.add_subcommand(name);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    app.exit(e);
    return std::nullopt;
  } catch (const CLI::ParseError& e) {
    fail(ErrorCode::ParseError, e.what());
  }

  RunConfig rc;
  const auto chosen = app.get_subcommands();
  if (chosen.empty())
    fail(ErrorCode::MissingRequired, "a subcommand is required: impute, tune, dsse, experiment or verify");
  for (int i = 0; i < 5; ++i)
    if (chosen.front()->get_name() == kSubcommands[i]) rc.subcommand = static_cast<Subcommand>(i);
  if (methods.size() > 1) fail(ErrorCode::MutuallyExclusive, "--method given more than once");

  if (config) read_file(*config, rc);

  auto& ex = rc.experiment;
  const auto apply_gp = [&](auto&& fn) {
    fn(ex.gp);
    if (ex.dsse.gp) fn(*ex.dsse.gp);
  };
  if (seed) rc.seed = *seed;
  if (out) rc.out = *out;
  if (mode) {
    const auto m = mode_from(*mode);
    apply_gp([&](GpSettings& g) { g.noise_mode = m; });
  }
  if (schedule) {
    const auto s = schedule_from(*schedule);
    apply_gp([&](GpSettings& g) { g.schedule = s; });
  }
  if (alpha) apply_gp([&](GpSettings& g) { g.alpha = *alpha; });
  if (verify_theorems) apply_gp([](GpSettings& g) { g.verify_theorems = true; });
  if (!methods.empty()) {
    rc.method = method_from(methods.front());
    if (rc.subcommand == Subcommand::tune) rc.tune_method = rc.method;
    if (rc.subcommand == Subcommand::experiment) ex.methods = {rc.method};
  }
  if (measurements) rc.measurements = *measurements;
  if (edges) rc.edges = *edges;
  if (pf_model) rc.pf_model = *pf_model;
  if (!checks.empty()) rc.checks = checks;
  rc.trace_log = rc.trace_log || trace_log;
  rc.break_symmetry = break_symmetry;
  ex.seed = rc.seed;

  for (const auto& c : rc.checks)
    require(std::find(known_checks().begin(), known_checks().end(), c) != known_checks().end(),
            ErrorCode::InvalidSpec, "unknown check '" + c + "'");
  require(rc.fine_grid.step > 0.0, ErrorCode::InvalidSpec, "impute.grid_step must be positive");
  require(ex.gp.alpha >= 0.0, ErrorCode::InvalidSpec, "alpha must be nonnegative");
  switch (rc.subcommand) {
    case Subcommand::impute:
    case Subcommand::tune:
      require(rc.measurements.has_value(), ErrorCode::MissingRequired,
              std::string(to_string(rc.subcommand)) + " needs input.measurements (or --measurements)");
      break;
    case Subcommand::dsse:
      require(rc.measurements.has_value() == rc.pf_model.has_value(), ErrorCode::MissingRequired,
              "dsse on measured data needs both input.measurements and input.pf_model");
      break;
    default:
      break;
  }
  return rc;
}

}  // namespace gridrecon::cli
