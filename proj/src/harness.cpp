#include "spinqfi/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "spinqfi/csv.hpp"
#include "spinqfi/free_fermion.hpp"
#include "spinqfi/otoc.hpp"
#include "spinqfi/perturbation.hpp"

namespace spinqfi {

using Json = nlohmann::ordered_json;

namespace {

constexpr std::pair<Experiment, const char*> kExperimentNames[] = {
    {Experiment::qfi_map, "qfi_map"},
    {Experiment::otoc_map, "otoc_map"},
    {Experiment::decode_map, "decode_map"},
    {Experiment::hierarchy_series, "hierarchy_series"},
    {Experiment::depletion, "depletion"},
    {Experiment::rate_fit, "rate_fit"},
    {Experiment::analytic_check, "analytic_check"},
};

constexpr std::pair<EvolutionMethod, const char*> kMethodNames[] = {
    {EvolutionMethod::automatic, "automatic"},
    {EvolutionMethod::dense, "dense"},
    {EvolutionMethod::krylov, "krylov"},
};

bool uses_decoder(Experiment e) { return e == Experiment::decode_map || e == Experiment::hierarchy_series; }
bool whole_curve(Experiment e) { return e == Experiment::depletion || e == Experiment::rate_fit; }

void check_keys(const Json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

double as_double(const Json& v, const std::string& name) {
  if (!v.is_number()) throw ConfigError(name + " must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(name + " must be finite");
  return d;
}

int as_int(const Json& v, const std::string& name) {
  if (!v.is_number_integer()) throw ConfigError(name + " must be an integer");
  const auto i = v.get<std::int64_t>();
  if (i < std::numeric_limits<int>::min() || i > std::numeric_limits<int>::max())
    throw ConfigError(name + " is out of range");
  return static_cast<int>(i);
}

template <typename T, typename F>
std::vector<T> as_list(const Json& v, const std::string& name, F convert) {
  std::vector<T> out;
  if (v.is_array()) {
    for (std::size_t k = 0; k < v.size(); ++k) out.push_back(convert(v[k], name + "[" + std::to_string(k) + "]"));
    if (out.empty()) throw ConfigError(name + " must not be empty");
  } else {
    out.push_back(convert(v, name));
  }
  return out;
}

}  // namespace

std::string experiment_name(Experiment e) {
  for (const auto& [value, name] : kExperimentNames)
    if (value == e) return name;
  return "unknown";
}

std::optional<Experiment> parse_experiment(const std::string& name) {
  for (const auto& [value, text] : kExperimentNames)
    if (name == text) return value;
  return std::nullopt;
}

std::vector<double> TimeGrid::points() const {
  std::vector<double> out(static_cast<std::size_t>(std::max(count, 0)));
  for (int k = 0; k < count; ++k)
    out[static_cast<std::size_t>(k)] = count == 1 ? start : start + (stop - start) * k / (count - 1);
  return out;
}

std::vector<double> default_fields(Experiment e) {
  switch (e) {
    case Experiment::analytic_check: return {0.0};
    case Experiment::depletion:
    case Experiment::rate_fit: return {0.045, 0.07, 0.095, 0.12, 0.145, 0.17, 0.195, 0.22};
    default: return {0.0, 0.05, 0.1, 0.2, 0.5};
  }
}

void RunConfig::finalize() {
  if (fields.empty()) fields = default_fields(experiment);
  if (outputs.empty()) outputs = {sites};

  try {
    for (double h : fields) ChainSpec{sites, coupling, h, source}.validate();
    optimizer.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  } catch (const std::out_of_range& e) {
    throw ConfigError(e.what());
  }
  if (method == EvolutionMethod::dense && sites > kDenseMaxSites)
    throw ConfigError("dense evolution is limited to N <= " + std::to_string(kDenseMaxSites));
  if (std::set<double>(fields.begin(), fields.end()).size() != fields.size())
    throw ConfigError("h list contains duplicates");

  if (time.count < 1) throw ConfigError("time.count must be at least 1");
  if (!std::isfinite(time.start) || !std::isfinite(time.stop)) throw ConfigError("time bounds must be finite");
  if (time.count > 1 && !(time.stop > time.start)) throw ConfigError("time grid must be strictly increasing");
  if (time.start < 0) throw ConfigError("time.start must be non-negative");

  if (uses_decoder(experiment)) {
    for (int w : widths)
      if (w < 1 || w > 6) throw ConfigError("block width must lie in 1..6");
    for (int k : outputs)
      if (k < 1 || k > sites) throw ConfigError("output site outside the chain");
    for (int w : widths)
      for (int k : outputs)
        if (k - w + 1 < 1) throw ConfigError("block of width " + std::to_string(w) + " ending at " + std::to_string(k) +
                                             " leaves the chain");
    if (experiment == Experiment::hierarchy_series && (widths.size() != 1 || outputs.size() != 1))
      throw ConfigError("hierarchy_series takes exactly one w and one k");
  }
  if (experiment == Experiment::analytic_check)
    for (double h : fields)
      if (h != 0.0) throw ConfigError("analytic_check is defined at h = 0 only");

  if (!(fit_hi > fit_lo)) throw ConfigError("fit window is empty");
  if (!(collapse_hi > collapse_lo)) throw ConfigError("collapse window is empty");
  if (experiment == Experiment::rate_fit) {
    const auto grid = time.points();
    const auto inside = std::count_if(grid.begin(), grid.end(), [&](double t) { return t >= fit_lo && t <= fit_hi; });
    if (inside < 5) throw ConfigError("rate fit window holds fewer than five grid points");
    if (std::none_of(fields.begin(), fields.end(), [](double h) { return h != 0.0; }))
      throw ConfigError("rate_fit needs a nonzero field");
  }
  if (workers < 1 || workers > 256) throw ConfigError("workers must lie in 1..256");
  if (output.empty()) throw ConfigError("output path is empty");
}

RunConfig parse_config(const std::string& text, std::optional<Experiment> experiment) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(doc, {"experiment", "chain", "time", "block", "optimizer", "fit", "seed", "output", "workers", "method"},
             "config");
  RunConfig cfg;
  if (doc.contains("experiment")) {
    if (!doc["experiment"].is_string()) throw ConfigError("experiment must be a string");
    const auto named = parse_experiment(doc["experiment"].get<std::string>());
    if (!named) throw ConfigError("unknown experiment '" + doc["experiment"].get<std::string>() + "'");
    if (experiment && *experiment != *named)
      throw ConfigError("config names experiment " + experiment_name(*named) + " but " +
                        experiment_name(*experiment) + " was requested");
    cfg.experiment = *named;
  } else if (experiment) {
    cfg.experiment = *experiment;
  } else {
    throw ConfigError("no experiment given");
  }

  if (doc.contains("chain")) {
    const Json& c = doc["chain"];
    check_keys(c, {"N", "J", "h", "s"}, "chain");
    if (c.contains("N")) cfg.sites = as_int(c["N"], "chain.N");
    if (c.contains("J")) cfg.coupling = as_double(c["J"], "chain.J");
    if (c.contains("h")) cfg.fields = as_list<double>(c["h"], "chain.h", as_double);
    if (c.contains("s")) cfg.source = as_int(c["s"], "chain.s");
  }
  if (doc.contains("time")) {
    const Json& t = doc["time"];
    check_keys(t, {"start", "stop", "count"}, "time");
    if (t.contains("start")) cfg.time.start = as_double(t["start"], "time.start");
    if (t.contains("stop")) cfg.time.stop = as_double(t["stop"], "time.stop");
    if (t.contains("count")) cfg.time.count = as_int(t["count"], "time.count");
  }
  if (doc.contains("block")) {
    const Json& b = doc["block"];
    check_keys(b, {"w", "k"}, "block");
    if (b.contains("w")) cfg.widths = as_list<int>(b["w"], "block.w", as_int);
    if (b.contains("k")) cfg.outputs = as_list<int>(b["k"], "block.k", as_int);
  }
  if (doc.contains("optimizer")) {
    const Json& o = doc["optimizer"];
    check_keys(o, {"steps", "learning_rate", "beta1", "beta2", "epsilon", "fd_step", "restarts", "init_range", "keep_trace"},
               "optimizer");
    auto& opt = cfg.optimizer;
    if (o.contains("steps")) opt.steps = as_int(o["steps"], "optimizer.steps");
    if (o.contains("learning_rate")) opt.learning_rate = as_double(o["learning_rate"], "optimizer.learning_rate");
    if (o.contains("beta1")) opt.beta1 = as_double(o["beta1"], "optimizer.beta1");
    if (o.contains("beta2")) opt.beta2 = as_double(o["beta2"], "optimizer.beta2");
    if (o.contains("epsilon")) opt.epsilon = as_double(o["epsilon"], "optimizer.epsilon");
    if (o.contains("fd_step")) opt.fd_step = as_double(o["fd_step"], "optimizer.fd_step");
    if (o.contains("restarts")) opt.restarts = as_int(o["restarts"], "optimizer.restarts");
    if (o.contains("init_range")) opt.init_range = as_double(o["init_range"], "optimizer.init_range");
    if (o.contains("keep_trace")) {
      if (!o["keep_trace"].is_boolean()) throw ConfigError("optimizer.keep_trace must be a boolean");
      opt.keep_trace = o["keep_trace"].get<bool>();
    }
  }
  if (doc.contains("fit")) {
    const Json& f = doc["fit"];
    check_keys(f, {"window_lo", "window_hi", "collapse_lo", "collapse_hi"}, "fit");
    if (f.contains("window_lo")) cfg.fit_lo = as_double(f["window_lo"], "fit.window_lo");
    if (f.contains("window_hi")) cfg.fit_hi = as_double(f["window_hi"], "fit.window_hi");
    if (f.contains("collapse_lo")) cfg.collapse_lo = as_double(f["collapse_lo"], "fit.collapse_lo");
    if (f.contains("collapse_hi")) cfg.collapse_hi = as_double(f["collapse_hi"], "fit.collapse_hi");
  }
  if (doc.contains("seed")) {
    const Json& s = doc["seed"];
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0))
      throw ConfigError("seed must be a non-negative 64-bit integer");
    cfg.seed = s.get<std::uint64_t>();
  }
  if (doc.contains("output")) {
    if (!doc["output"].is_string()) throw ConfigError("output must be a string");
    cfg.output = doc["output"].get<std::string>();
  }
  if (doc.contains("workers")) cfg.workers = as_int(doc["workers"], "workers");
  if (doc.contains("method")) {
    const Json& m = doc["method"];
    if (!m.is_string()) throw ConfigError("method must be a string");
    bool found = false;
    for (const auto& [value, name] : kMethodNames)
      if (m.get<std::string>() == name) {
        cfg.method = value;
        found = true;
      }
    if (!found) throw ConfigError("unknown method '" + m.get<std::string>() + "'");
  }
  cfg.finalize();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path, std::optional<Experiment> experiment) {
  std::ifstream file(path);
  if (!file) throw ConfigError("cannot read config " + path.string());
  std::stringstream text;
  text << file.rdbuf();
  return parse_config(text.str(), experiment);
}

namespace {

Json config_object(const RunConfig& c) {
  Json j;
  j["experiment"] = experiment_name(c.experiment);
  j["chain"] = {{"N", c.sites}, {"J", c.coupling}, {"h", c.fields}, {"s", c.source}};
  j["time"] = {{"start", c.time.start}, {"stop", c.time.stop}, {"count", c.time.count}};
  j["block"] = {{"w", c.widths}, {"k", c.outputs}};
  const auto& o = c.optimizer;
  j["optimizer"] = {{"steps", o.steps},     {"learning_rate", o.learning_rate}, {"beta1", o.beta1},
                    {"beta2", o.beta2},     {"epsilon", o.epsilon},             {"fd_step", o.fd_step},
                    {"restarts", o.restarts}, {"init_range", o.init_range},     {"keep_trace", o.keep_trace}};
  j["fit"] = {{"window_lo", c.fit_lo},
              {"window_hi", c.fit_hi},
              {"collapse_lo", c.collapse_lo},
              {"collapse_hi", c.collapse_hi}};
  j["seed"] = c.seed;
  j["output"] = c.output.string();
  j["workers"] = c.workers;
  for (const auto& [value, name] : kMethodNames)
    if (value == c.method) j["method"] = name;
  return j;
}

std::uint64_t unit_seed(std::uint64_t seed, std::size_t field_index, std::size_t time_index, int width, int output) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(field_index), static_cast<std::uint32_t>(time_index),
                    static_cast<std::uint32_t>(width), static_cast<std::uint32_t>(output)};
  std::array<std::uint32_t, 2> words{};
  seq.generate(words.begin(), words.end());
  return (std::uint64_t{words[0]} << 32) | words[1];
}

}  // namespace

std::string config_json(const RunConfig& config) { return config_object(config).dump(2); }

std::vector<WorkUnit> grid_product(const RunConfig& config) {
  if (config.fields.empty()) throw ConfigError("h list is empty");
  if (config.time.count < 1) throw ConfigError("time grid is empty");
  const auto grid = config.time.points();
  const std::size_t nh = config.fields.size(), nt = grid.size();
  const bool decode = config.experiment == Experiment::decode_map;
  const std::size_t per_time = decode ? config.widths.size() * config.outputs.size() : 1;
  const double estimate = whole_curve(config.experiment) ? double(nh) + 1 : double(nh) * double(nt) * double(per_time);
  if (estimate > double(kMaxWorkUnits)) throw ConfigError("grid exceeds 1e6 work units");
  const auto total = static_cast<std::size_t>(estimate);

  std::vector<WorkUnit> units;
  units.reserve(total);
  if (whole_curve(config.experiment)) {
    WorkUnit base;
    base.baseline = true;
    units.push_back(base);
    for (std::size_t i = 0; i < nh; ++i) {
      WorkUnit u;
      u.field_index = i;
      u.field = config.fields[i];
      units.push_back(u);
    }
  } else {
    for (std::size_t i = 0; i < nh; ++i)
      for (std::size_t t = 0; t < nt; ++t) {
        WorkUnit u;
        u.field_index = i;
        u.field = config.fields[i];
        u.time_index = t;
        u.tJ = grid[t];
        if (decode) {
          for (int w : config.widths)
            for (int k : config.outputs) {
              u.width = w;
              u.output_site = k;
              u.seed = unit_seed(config.seed, i, t, w, k);
              units.push_back(u);
            }
        } else {
          if (config.experiment == Experiment::hierarchy_series) {
            u.width = config.widths.front();
            u.output_site = config.outputs.front();
            u.seed = unit_seed(config.seed, i, t, *u.width, *u.output_site);
          }
          units.push_back(u);
        }
      }
  }
  for (std::size_t k = 0; k < units.size(); ++k) units[k].index = k;
  return units;
}

namespace {

struct Row {
  std::string file;
  std::vector<double> key;
  std::vector<CsvCell> cells;
};

struct Record {
  double field = 0.0;
  std::optional<double> tJ;
  std::optional<int> site;
  std::string block;
  std::string quantity;
  double value = 0.0;
};

struct UnitOutput {
  std::vector<Row> rows;
  std::vector<Record> records;
  Eigen::VectorXd series;  // whole-curve experiments: site-summed QFI
  double seconds = 0.0;
  std::optional<std::string> error;
};

std::string field_tag(double h) { return "h" + format_number(h); }

std::string block_label(int first, int last) { return std::to_string(first) + "-" + std::to_string(last); }

class EvolverCache {
 public:
  EvolverCache(const RunConfig& config) : config_(config), flags_(new std::once_flag[config.fields.size() + 1]) {
    slots_.resize(config.fields.size() + 1);
  }

  const Evolver& get(std::size_t slot, double h) {
    std::call_once(flags_[slot], [&] {
      slots_[slot] = std::make_unique<Evolver>(build_hamiltonian(spec(h)), config_.method);
    });
    return *slots_[slot];
  }

  ChainSpec spec(double h) const { return {config_.sites, config_.coupling, h, config_.source}; }

 private:
  const RunConfig& config_;
  std::unique_ptr<std::once_flag[]> flags_;
  std::vector<std::unique_ptr<Evolver>> slots_;
};

OptimizerConfig unit_optimizer(const RunConfig& config, const WorkUnit& unit) {
  OptimizerConfig opt = config.optimizer;
  opt.seed = unit.seed;
  return opt;
}

void run_unit(const RunConfig& config, EvolverCache& cache, const WorkUnit& unit, UnitOutput& out) {
  const ChainSpec spec = cache.spec(unit.baseline ? 0.0 : unit.field);
  const int n = config.sites;
  const std::string tag = field_tag(unit.field);
  switch (config.experiment) {
    case Experiment::qfi_map: {
      const double tJ = *unit.tJ;
      const TangentPair pair = make_tangent_pair(spec, cache.get(unit.field_index, unit.field), tJ);
      for (int j = 1; j <= n; ++j) {
        const double f = site_qfi(pair, j);
        out.rows.push_back({"qfi_map_" + tag + ".csv", {tJ, double(j)}, {tJ, std::int64_t{j}, f}});
        out.records.push_back({unit.field, tJ, j, "", "F_j", f});
      }
      break;
    }
    case Experiment::otoc_map: {
      const double tJ = *unit.tJ;
      const auto snapshot = otoc_snapshot(spec, cache.get(unit.field_index, unit.field), tJ);
      for (const auto& rec : snapshot) {
        const auto& c = rec.commutator;
        out.rows.push_back({"otoc_map_" + tag + ".csv",
                            {tJ, double(rec.site)},
                            {tJ, std::int64_t{rec.site}, c[0], c[1], c[2], rec.commutator_sum()}});
        const char* names[] = {"C_x", "C_y", "C_z"};
        for (int a = 0; a < 3; ++a) out.records.push_back({unit.field, tJ, rec.site, "", names[a], c[a]});
        out.records.push_back({unit.field, tJ, rec.site, "", "C_sum", rec.commutator_sum()});
      }
      break;
    }
    case Experiment::decode_map:
    case Experiment::hierarchy_series: {
      const double tJ = *unit.tJ;
      const int w = *unit.width, k = *unit.output_site;
      const Evolver& evolver = cache.get(unit.field_index, unit.field);
      const TangentPair pair = make_tangent_pair(spec, evolver, tJ);
      const auto block = site_interval(k - w + 1, k);
      const DensityBlock reduced = reduce(pair, block);
      const double f_block = spectral_qfi(reduced);
      const DecoderResult decoded = optimize_decoder(reduced, unit_optimizer(config, unit));
      const std::string label = block_label(k - w + 1, k);
      if (config.experiment == Experiment::decode_map) {
        out.rows.push_back({"decode_map_" + tag + "_k" + std::to_string(k) + ".csv",
                            {tJ, double(w)},
                            {tJ, std::int64_t{w}, decoded.decoded_qfi, f_block, std::int64_t{decoded.best_restart}}});
      } else {
        const double f_k = site_qfi(pair, k);
        const double c_y = otoc_snapshot(spec, evolver, tJ)[static_cast<std::size_t>(k - 1)].commutator[1];
        out.rows.push_back({"hierarchy_series_" + tag + ".csv", {tJ}, {tJ, f_k, decoded.decoded_qfi, f_block, c_y}});
        out.records.push_back({unit.field, tJ, k, "", "F_k", f_k});
        out.records.push_back({unit.field, tJ, k, "", "C_y", c_y});
      }
      out.records.push_back({unit.field, tJ, k, label, "F_dec", decoded.decoded_qfi});
      out.records.push_back({unit.field, tJ, k, label, "F_block", f_block});
      break;
    }
    case Experiment::depletion:
    case Experiment::rate_fit: {
      const auto grid = config.time.points();
      out.series = site_qfi_sum_series(spec, cache.get(unit.baseline ? config.fields.size() : unit.field_index,
                                                       spec.field),
                                       grid);
      break;
    }
    case Experiment::analytic_check: {
      const double tJ = *unit.tJ;
      const TangentPair pair = make_tangent_pair(spec, cache.get(unit.field_index, unit.field), tJ);
      double worst = 0.0;
      for (int j = 1; j <= n; ++j)
        worst = std::max(worst, std::abs(site_qfi(pair, j) - std::norm(green_open(n, j, config.source, tJ))));
      out.rows.push_back({"analytic_check.csv", {tJ}, {tJ, worst}});
      out.records.push_back({unit.field, tJ, std::nullopt, "", "max_abs_error", worst});
      break;
    }
  }
  for (const auto& r : out.records)
    if (!std::isfinite(r.value)) throw NumericalError("non-finite " + r.quantity);
}

const std::map<std::string, std::vector<std::string>>& headers() {
  static const std::map<std::string, std::vector<std::string>> h = {
      {"qfi_map", {"tJ", "j", "F_j"}},
      {"otoc_map", {"tJ", "j", "C_x", "C_y", "C_z", "C_sum"}},
      {"decode_map", {"tJ", "w", "F_dec", "F_block", "restart_best_id"}},
      {"hierarchy_series", {"tJ", "F_k", "F_dec", "F_block", "C_y"}},
      {"depletion", {"tJ", "h", "eta"}},
      {"rate_fit", {"h", "gamma_star", "window_lo", "window_hi", "slope_global"}},
      {"analytic_check", {"tJ", "max_abs_error"}},
  };
  return h;
}

// Combines the per-h site sums into eta curves and rate fits.
void finish_curves(const RunConfig& config, std::vector<WorkUnit>& units, std::vector<UnitOutput>& outputs,
                   std::vector<Row>& rows, std::vector<Record>& records, Json& diagnostics,
                   std::vector<UnitFailure>& failures) {
  const auto grid = config.time.points();
  const UnitOutput& base = outputs.front();
  std::vector<DepletionCurve> curves;
  for (std::size_t u = 1; u < units.size(); ++u) {
    if (base.error || outputs[u].error) continue;
    try {
      const ChainSpec spec{config.sites, config.coupling, units[u].field, config.source};
      curves.push_back(depletion_from_sums(spec, grid, outputs[u].series, base.series));
    } catch (const std::exception& e) {
      failures.push_back({units[u], e.what()});
    }
  }
  if (base.error)
    for (std::size_t u = 1; u < units.size(); ++u)
      if (!outputs[u].error) failures.push_back({units[u], "baseline curve failed"});

  if (config.experiment == Experiment::depletion) {
    for (const auto& c : curves)
      for (std::size_t k = 0; k < grid.size(); ++k) {
        rows.push_back({"depletion.csv", {c.field, grid[k]}, {grid[k], c.field, c.eta[k]}});
        records.push_back({c.field, grid[k], std::nullopt, "", "eta", c.eta[k]});
      }
    std::vector<DepletionCurve> nonzero;
    for (const auto& c : curves)
      if (c.field != 0.0) nonzero.push_back(c);
    if (nonzero.size() >= 3) {
      try {
        const CollapseReport r = collapse_check(nonzero, config.collapse_lo, config.collapse_hi);
        diagnostics["collapse"] = {{"deviation", r.deviation}, {"worst_tJ", r.worst_tJ}, {"collapsed", r.collapsed},
                                   {"window_lo", r.window_lo}, {"window_hi", r.window_hi}};
      } catch (const std::exception& e) {
        diagnostics["collapse"] = {{"error", e.what()}};
      }
    }
    return;
  }

  std::vector<RateFit> fits;
  for (const auto& c : curves) {
    if (c.field == 0.0) continue;
    try {
      fits.push_back(fit_gamma_star(c, config.fit_lo, config.fit_hi));
    } catch (const std::exception& e) {
      diagnostics["fit_errors"].push_back({{"h", c.field}, {"error", e.what()}});
    }
  }
  if (fits.empty()) {
    failures.push_back({units.front(), "no rate fit succeeded"});
    return;
  }
  const RatePrefactor prefactor = fit_rate_prefactor(fits, config.coupling);
  for (const auto& f : fits) {
    rows.push_back({"rate_fit.csv", {f.field}, {f.field, f.gamma_star, f.window_lo, f.window_hi, prefactor.slope}});
    records.push_back({f.field, std::nullopt, std::nullopt, "", "gamma_star", f.gamma_star});
  }
  diagnostics["slope_global"] = prefactor.slope;
}

}  // namespace

RunResult run(const RunConfig& input, const UnitObserver& on_unit) {
  RunConfig config = input;
  config.finalize();
  std::vector<WorkUnit> units = grid_product(config);

  RunResult result;
  result.unit_count = units.size();
  std::vector<UnitOutput> outputs(units.size());
  EvolverCache cache(config);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t u = next++; u < units.size(); u = next++) {
      const auto begin = std::chrono::steady_clock::now();
      try {
        if (on_unit) on_unit(units[u]);
        run_unit(config, cache, units[u], outputs[u]);
      } catch (const std::exception& e) {
        outputs[u].rows.clear();
        outputs[u].records.clear();
        outputs[u].error = e.what();
      }
      outputs[u].seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - begin).count();
    }
  };
  {
    std::vector<std::jthread> pool;
    const int threads = std::min<int>(config.workers, static_cast<int>(std::max<std::size_t>(units.size(), 1)));
    for (int k = 1; k < threads; ++k) pool.emplace_back(worker);
    worker();
  }

  std::vector<Row> rows;
  std::vector<Record> records;
  for (std::size_t u = 0; u < units.size(); ++u) {
    if (outputs[u].error) {
      result.failures.push_back({units[u], *outputs[u].error});
      continue;
    }
    std::move(outputs[u].rows.begin(), outputs[u].rows.end(), std::back_inserter(rows));
    std::move(outputs[u].records.begin(), outputs[u].records.end(), std::back_inserter(records));
  }
  Json diagnostics = Json::object();
  if (whole_curve(config.experiment))
    finish_curves(config, units, outputs, rows, records, diagnostics, result.failures);

  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return std::tie(a.file, a.key) < std::tie(b.file, b.key); });

  std::filesystem::create_directories(config.output);
  std::map<std::string, CsvTable> tables;
  const auto& header = headers().at(experiment_name(config.experiment));
  for (auto& row : rows) {
    auto [it, fresh] = tables.try_emplace(row.file);
    if (fresh) it->second.header = header;
    it->second.add(std::move(row.cells));
  }
  for (const auto& [name, table] : tables) {
    table.write(config.output / name);
    result.files.push_back(config.output / name);
  }

  CsvTable long_form;
  long_form.header = {"experiment", "N", "J", "h", "s", "tJ", "site", "block", "quantity", "value", "seed", "engine_version"};
  const std::string exp = experiment_name(config.experiment);
  for (const auto& r : records)
    long_form.add({exp, std::int64_t{config.sites}, config.coupling, r.field, std::int64_t{config.source},
                   r.tJ ? CsvCell(*r.tJ) : CsvCell(std::string()), r.site ? CsvCell(std::int64_t{*r.site}) : CsvCell(std::string()),
                   r.block, r.quantity, r.value, std::to_string(config.seed), std::string(kEngineVersion)});
  long_form.write(config.output / "records.csv");
  result.files.push_back(config.output / "records.csv");

  Json manifest;
  manifest["engine_version"] = kEngineVersion;
  manifest["experiment"] = exp;
  manifest["config"] = config_object(config);
  manifest["seed"] = config.seed;
  manifest["unit_count"] = units.size();
  Json timings = Json::array(), seeds = Json::array(), failures = Json::array();
  auto describe = [](const WorkUnit& u) {
    Json j = {{"unit", u.index}, {"h", u.field}};
    if (u.baseline) j["baseline"] = true;
    if (u.tJ) j["tJ"] = *u.tJ;
    if (u.width) j["w"] = *u.width;
    if (u.output_site) j["k"] = *u.output_site;
    return j;
  };
  for (std::size_t u = 0; u < units.size(); ++u) {
    Json t = describe(units[u]);
    t["wall_seconds"] = outputs[u].seconds;
    timings.push_back(t);
    if (uses_decoder(config.experiment)) {
      Json s = describe(units[u]);
      s["seed"] = units[u].seed;
      seeds.push_back(s);
    }
  }
  for (const auto& f : result.failures) {
    Json j = describe(f.unit);
    j["error"] = f.message;
    failures.push_back(j);
  }
  manifest["unit_seeds"] = seeds;
  manifest["timings"] = timings;
  manifest["failures"] = failures;
  manifest["diagnostics"] = diagnostics;
  Json files = Json::array();
  for (const auto& f : result.files) files.push_back(f.filename().string());
  manifest["files"] = files;
  {
    std::ofstream file(config.output / "manifest.json");
    if (!file) throw std::runtime_error("cannot write manifest");
    file << manifest.dump(2) << '\n';
  }
  result.files.push_back(config.output / "manifest.json");
  result.exit_code = result.failures.empty() ? 0 : 2;
  return result;
}

}  // namespace spinqfi
