#include "capcert/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <variant>

#include <nlohmann/json.hpp>

#include "capcert/channels.hpp"
#include "capcert/protocol1.hpp"
#include "capcert/protocol2.hpp"
#include "capcert/qubitproto.hpp"

namespace capcert::cli {

namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// presets (embedded at configure time from presets/*.json)

const std::pair<const char*, const char*> kPresets[] = {
#include "capcert/presets_data.inc"
};

// ---------------------------------------------------------------------------
// small utilities

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void require_keys(const json& j, const std::set<std::string>& allowed,
                  const std::string& where) {
  if (!j.is_object()) {
    throw ConfigError(where + ": expected an object");
  }
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) {
      throw ConfigError(where + ": unknown key '" + item.key() + "'");
    }
  }
}

double get_number(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw ConfigError(where + ": missing numeric key '" + key + "'");
  }
  return j.at(key).get<double>();
}

std::uint64_t get_count(const json& j, const std::string& key,
                        const std::string& where) {
  if (!j.contains(key) || !j.at(key).is_number_unsigned()) {
    throw ConfigError(where + ": missing nonnegative integer key '" + key + "'");
  }
  return j.at(key).get<std::uint64_t>();
}

std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_value(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%" PRIu64, v);
  return buf;
}

void parallel_for(std::size_t count, int threads,
                  const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const int workers = static_cast<int>(
      std::min(static_cast<std::size_t>(threads), count));
  pool.reserve(static_cast<std::size_t>(workers));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
          fn(i);
        }
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ---------------------------------------------------------------------------
// experiment configs

struct SweepAxis {
  std::string parameter;
  std::vector<json> values;
};

struct Experiment {
  std::string protocol;             // p1 | p2 | qubit
  std::string evaluation = "bound"; // bound | asymptotic (p2 only)
  std::string label;
  json config;
  std::optional<channels::ChannelModel> channel;
  std::vector<SweepAxis> sweep;
};

struct OutputSpec {
  std::string path;
  std::string format = "csv";
};

struct RunConfig {
  std::vector<Experiment> experiments;
  OutputSpec output;
  std::optional<std::uint64_t> seed;
};

struct MonteCarloSpec {
  std::uint64_t trials = 0;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

const std::set<std::string>& sweepable_parameters(const Experiment& e) {
  static const std::set<std::string> p1{"n", "k", "d", "t", "alpha",
                                        "n_bar", "epsilon", "p_err"};
  static const std::set<std::string> p2{"n", "k", "n_bar", "delta",
                                        "epsilon", "a", "c"};
  static const std::set<std::string> p2asym{"tau", "n_bar", "n_th", "d"};
  static const std::set<std::string> qubit{"alpha", "beta"};
  if (e.protocol == "p1") return p1;
  if (e.protocol == "p2") return e.evaluation == "asymptotic" ? p2asym : p2;
  return qubit;
}

Experiment parse_experiment(const json& j, const std::string& where,
                            bool top_level = false) {
  // top-level single-experiment configs carry output/seed/monte_carlo
  // blocks alongside the experiment keys
  if (top_level) {
    require_keys(j, {"protocol", "evaluation", "label", "config", "channel",
                     "sweep", "monte_carlo", "output", "seed"},
                 where);
  } else {
    require_keys(j, {"protocol", "evaluation", "label", "config", "channel",
                     "sweep"},
                 where);
  }
  Experiment e;
  if (!j.contains("protocol") || !j.at("protocol").is_string()) {
    throw ConfigError(where + ": missing protocol selector");
  }
  e.protocol = j.at("protocol").get<std::string>();
  if (e.protocol != "p1" && e.protocol != "p2" && e.protocol != "qubit") {
    throw ConfigError(where + ": protocol must be one of p1, p2, qubit");
  }
  if (j.contains("evaluation")) {
    e.evaluation = j.at("evaluation").get<std::string>();
    if (e.evaluation != "bound" && e.evaluation != "asymptotic") {
      throw ConfigError(where + ": evaluation must be 'bound' or 'asymptotic'");
    }
    if (e.evaluation == "asymptotic" && e.protocol != "p2") {
      throw ConfigError(where + ": asymptotic evaluation is a p2 mode");
    }
  }
  if (j.contains("label")) e.label = j.at("label").get<std::string>();
  if (!j.contains("config")) {
    throw ConfigError(where + ": missing config block");
  }
  e.config = j.at("config");

  // validate config keys per protocol
  if (e.protocol == "p1") {
    require_keys(e.config,
                 {"n", "k", "k_equals_n", "d", "t", "alpha", "n_bar",
                  "epsilon", "p_err"},
                 where + ".config");
  } else if (e.protocol == "p2" && e.evaluation == "bound") {
    require_keys(e.config,
                 {"n", "k", "k_equals_n", "n_bar", "delta", "epsilon", "a",
                  "c", "thresholds_from_loss"},
                 where + ".config");
    if (e.config.contains("thresholds_from_loss")) {
      require_keys(e.config.at("thresholds_from_loss"), {"tau", "n_th"},
                   where + ".config.thresholds_from_loss");
    }
  } else if (e.protocol == "p2") {
    require_keys(e.config, {"tau", "n_bar", "n_th", "d"}, where + ".config");
  } else if (e.config.contains("counts_csv")) {
    // measured-record ingestion: evaluates the bound report instead of a
    // parameter sweep
    require_keys(e.config,
                 {"counts_csv", "delta", "n", "epsilon", "restarts", "steps"},
                 where + ".config");
  } else {
    require_keys(e.config, {"alpha", "beta", "n", "epsilon"},
                 where + ".config");
  }

  if (j.contains("channel")) {
    channels::ChannelModel ch = channels::ChannelModel::identity();
    try {
      from_json(j.at("channel"), ch);
    } catch (const std::exception& ex) {
      throw ConfigError(where + ".channel: " + ex.what());
    }
    e.channel = ch;
  }

  if (j.contains("sweep")) {
    if (!j.at("sweep").is_array()) {
      throw ConfigError(where + ".sweep: expected an array");
    }
    for (const auto& axis_json : j.at("sweep")) {
      require_keys(axis_json, {"parameter", "values"}, where + ".sweep[]");
      SweepAxis axis;
      axis.parameter = axis_json.at("parameter").get<std::string>();
      if (!sweepable_parameters(e).count(axis.parameter)) {
        throw ConfigError(where + ".sweep: parameter '" + axis.parameter +
                          "' does not exist in the " + e.protocol + " config");
      }
      if (!axis_json.at("values").is_array() || axis_json.at("values").empty()) {
        throw ConfigError(where + ".sweep: values must be a nonempty array");
      }
      for (const auto& v : axis_json.at("values")) {
        if (!v.is_number()) {
          throw ConfigError(where + ".sweep: values must be numbers");
        }
        axis.values.push_back(v);
      }
      e.sweep.push_back(std::move(axis));
    }
  }
  return e;
}

OutputSpec parse_output(const json& j, const std::string& where) {
  require_keys(j, {"path", "format"}, where);
  OutputSpec out;
  if (!j.contains("path") || !j.at("path").is_string()) {
    throw ConfigError(where + ": missing output path");
  }
  out.path = j.at("path").get<std::string>();
  if (j.contains("format")) {
    out.format = j.at("format").get<std::string>();
    if (out.format != "csv" && out.format != "json") {
      throw ConfigError(where + ": format must be 'csv' or 'json'");
    }
  }
  return out;
}

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file: " + path);
  }
  try {
    return json::parse(in);
  } catch (const std::exception& ex) {
    throw ConfigError(std::string("config is not valid JSON: ") + ex.what());
  }
}

RunConfig parse_run_config(const json& j) {
  RunConfig rc;
  if (j.contains("experiments")) {
    require_keys(j, {"experiments", "output", "seed"}, "config");
    if (!j.at("experiments").is_array() || j.at("experiments").empty()) {
      throw ConfigError("config.experiments: expected a nonempty array");
    }
    int idx = 0;
    for (const auto& e : j.at("experiments")) {
      rc.experiments.push_back(
          parse_experiment(e, "experiments[" + std::to_string(idx++) + "]"));
    }
  } else {
    rc.experiments.push_back(parse_experiment(j, "config", /*top_level=*/true));
  }
  if (!j.contains("output")) {
    throw ConfigError("config: missing output block");
  }
  rc.output = parse_output(j.at("output"), "config.output");
  if (j.contains("seed")) rc.seed = get_count(j, "seed", "config");
  return rc;
}

// ---------------------------------------------------------------------------
// rows

using Row = std::vector<std::pair<std::string, std::string>>;

struct Table {
  std::vector<std::string> columns;
  std::vector<Row> rows;

  void add_row(Row row) {
    for (const auto& [col, value] : row) {
      if (std::find(columns.begin(), columns.end(), col) == columns.end()) {
        columns.push_back(col);
      }
    }
    rows.push_back(std::move(row));
  }

  void write_csv(std::ostream& os) const {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      os << columns[c] << (c + 1 < columns.size() ? ',' : '\n');
    }
    for (const auto& row : rows) {
      std::map<std::string, const std::string*> lookup;
      for (const auto& [col, value] : row) lookup[col] = &value;
      for (std::size_t c = 0; c < columns.size(); ++c) {
        auto it = lookup.find(columns[c]);
        if (it != lookup.end()) os << *it->second;
        os << (c + 1 < columns.size() ? ',' : '\n');
      }
    }
  }

  void write_json(std::ostream& os) const {
    json arr = json::array();
    for (const auto& row : rows) {
      json obj = json::object();
      for (const auto& [col, value] : row) {
        // values were formatted with %.17g, so parsing them back is lossless
        if (value == "true" || value == "false") {
          obj[col] = (value == "true");
        } else if (value.empty()) {
          obj[col] = nullptr;
        } else {
          try {
            obj[col] = std::stod(value);
          } catch (...) {
            obj[col] = value;
          }
        }
      }
      arr.push_back(std::move(obj));
    }
    os << arr.dump(2) << '\n';
  }
};

// ---------------------------------------------------------------------------
// sweep expansion

std::vector<json> expand_sweep(const Experiment& e) {
  std::vector<json> points;
  points.push_back(e.config);
  for (const auto& axis : e.sweep) {
    std::vector<json> expanded;
    expanded.reserve(points.size() * axis.values.size());
    for (const auto& base : points) {
      for (const auto& v : axis.values) {
        json p = base;
        p[axis.parameter] = v;
        expanded.push_back(std::move(p));
      }
    }
    points = std::move(expanded);
  }
  return points;
}

// ---------------------------------------------------------------------------
// per-protocol evaluation

protocol1::ProtocolOneConfig p1_config_from_json(const json& p,
                                                 const std::string& where) {
  protocol1::ProtocolOneConfig cfg;
  cfg.n = get_count(p, "n", where);
  const bool k_equals_n = p.value("k_equals_n", false);
  if (k_equals_n) {
    if (p.contains("k")) {
      throw ConfigError(where + ": give either k or k_equals_n, not both");
    }
    cfg.k = cfg.n;
  } else {
    cfg.k = get_count(p, "k", where);
  }
  cfg.d = get_number(p, "d", where);
  cfg.t = get_number(p, "t", where);
  cfg.alpha = get_number(p, "alpha", where);
  cfg.n_bar = get_number(p, "n_bar", where);
  cfg.epsilon = get_number(p, "epsilon", where);
  cfg.p_err = get_number(p, "p_err", where);
  return cfg;
}

protocol2::ProtocolTwoConfig p2_config_from_json(const json& p,
                                                 const std::string& where) {
  protocol2::ProtocolTwoConfig cfg;
  cfg.n = get_count(p, "n", where);
  const bool k_equals_n = p.value("k_equals_n", false);
  if (k_equals_n) {
    if (p.contains("k")) {
      throw ConfigError(where + ": give either k or k_equals_n, not both");
    }
    cfg.k = cfg.n;
  } else {
    cfg.k = get_count(p, "k", where);
  }
  cfg.n_bar = get_number(p, "n_bar", where);
  cfg.delta = get_number(p, "delta", where);
  cfg.epsilon = get_number(p, "epsilon", where);
  if (p.contains("thresholds_from_loss")) {
    if (p.contains("a") || p.contains("c")) {
      throw ConfigError(where +
                        ": give either (a, c) or thresholds_from_loss, not both");
    }
    const json& th = p.at("thresholds_from_loss");
    const auto t = protocol2::optimal_thresholds_loss(
        get_number(th, "tau", where), cfg.n_bar, th.value("n_th", 0.0));
    cfg.a = t.a;
    cfg.c = t.c;
  } else {
    cfg.a = get_number(p, "a", where);
    cfg.c = get_number(p, "c", where);
  }
  return cfg;
}

Row evaluate_p1_row(const Experiment& e, const json& point, bool* nontrivial) {
  const auto cfg = p1_config_from_json(point, "p1 config");
  cfg.validate();
  const auto bound = protocol1::capacity_bound(cfg);
  const auto ent = protocol1::entanglement_bound(cfg);
  Row row;
  if (!e.label.empty()) row.emplace_back("label", e.label);
  row.emplace_back("protocol", "p1");
  row.emplace_back("n", format_value(cfg.n));
  row.emplace_back("k", format_value(cfg.k));
  row.emplace_back("d", format_value(cfg.d));
  row.emplace_back("t", format_value(cfg.t));
  row.emplace_back("alpha", format_value(cfg.alpha));
  row.emplace_back("n_bar", format_value(cfg.n_bar));
  row.emplace_back("epsilon", format_value(cfg.epsilon));
  row.emplace_back("p_err", format_value(cfg.p_err));
  row.emplace_back("lambda", format_value(bound.diagnostics.lambda));
  row.emplace_back("feasible", bound.note.empty() ? "true" : "false");
  row.emplace_back("q_lower", format_value(bound.value));
  row.emplace_back("q_lower_per_mode",
                   format_value(bound.value / static_cast<double>(cfg.n)));
  row.emplace_back("ent_lower",
                   ent.eta_star ? format_value(ent.value) : std::string());
  row.emplace_back("eta_star",
                   bound.eta_star ? format_value(*bound.eta_star) : std::string());
  if (bound.note.empty()) *nontrivial = true;
  return row;
}

Row evaluate_p2_row(const Experiment& e, const json& point) {
  const auto cfg = p2_config_from_json(point, "p2 config");
  try {
    cfg.validate();
  } catch (const std::invalid_argument& ex) {
    throw InfeasibleError(ex.what());
  }
  const auto spectrum =
      gaussmath::symplectic_eigenvalues(protocol2::xi_matrix(cfg.a, cfg.c, cfg.n_bar));
  const double q = protocol2::capacity_bound(cfg);
  Row row;
  if (!e.label.empty()) row.emplace_back("label", e.label);
  row.emplace_back("protocol", "p2");
  row.emplace_back("n", format_value(cfg.n));
  row.emplace_back("k", format_value(cfg.k));
  row.emplace_back("n_bar", format_value(cfg.n_bar));
  row.emplace_back("delta", format_value(cfg.delta));
  row.emplace_back("epsilon", format_value(cfg.epsilon));
  row.emplace_back("a", format_value(cfg.a));
  row.emplace_back("c", format_value(cfg.c));
  row.emplace_back("nu1", format_value(spectrum.values[0]));
  row.emplace_back("nu2", format_value(spectrum.values[1]));
  row.emplace_back("b_iid",
                   format_value(protocol2::asymptotic_Biid(cfg.a, cfg.c, cfg.n_bar)));
  row.emplace_back("q_lower", format_value(q));
  row.emplace_back("q_lower_per_mode",
                   format_value(q / static_cast<double>(cfg.n)));
  return row;
}

Row evaluate_p2_asymptotic_row(const Experiment& e, const json& point) {
  const std::string where = "p2 asymptotic config";
  const double tau = get_number(point, "tau", where);
  const double n_bar = get_number(point, "n_bar", where);
  const double n_th = get_number(point, "n_th", where);
  const double d = get_number(point, "d", where);
  const auto th = protocol2::optimal_thresholds_loss(tau, n_bar, n_th);
  double b_iid;
  try {
    b_iid = protocol2::asymptotic_Biid(th.a, th.c, n_bar);
  } catch (const std::invalid_argument& ex) {
    throw InfeasibleError(ex.what());
  }
  const double t = protocol1::asymptotic_threshold_t(tau, n_bar, n_th, d);
  Row row;
  if (!e.label.empty()) row.emplace_back("label", e.label);
  row.emplace_back("tau", format_value(tau));
  row.emplace_back("n_bar", format_value(n_bar));
  row.emplace_back("n_th", format_value(n_th));
  row.emplace_back("d", format_value(d));
  row.emplace_back("B_iid", format_value(b_iid));
  row.emplace_back("B", format_value(protocol1::asymptotic_B(d, t)));
  return row;
}

Row evaluate_qubit_row(const Experiment& e, const json& point) {
  const std::string where = "qubit config";
  const double alpha = get_number(point, "alpha", where);
  const double beta = get_number(point, "beta", where);
  const qubitproto::QubitChannelSpec spec(alpha, beta);
  const double ci = qubitproto::coherent_information(qubitproto::choi_state(spec));
  const bool region = std::cos(2.0 * alpha) / std::cos(2.0 * beta) > 0.0;
  Row row;
  if (!e.label.empty()) row.emplace_back("label", e.label);
  row.emplace_back("protocol", "qubit");
  row.emplace_back("alpha", format_value(alpha));
  row.emplace_back("beta", format_value(beta));
  row.emplace_back("positive_capacity_region", region ? "true" : "false");
  row.emplace_back("coherent_info", format_value(ci));
  if (point.contains("n") && point.contains("epsilon")) {
    const std::uint64_t n = get_count(point, "n", where);
    const double epsilon = get_number(point, "epsilon", where);
    // bound the ideal i.i.d. use of this channel: worst-case conditional
    // entropy replaced by the channel's own -CI
    const double bound = qubitproto::qubit_iid_bound(-ci, n, epsilon);
    row.emplace_back("n", format_value(n));
    row.emplace_back("epsilon", format_value(epsilon));
    row.emplace_back("q_lower_per_use_ideal",
                     format_value(std::max(0.0, bound)));
  }
  return row;
}

std::filesystem::path resolve_output_path(const CommonOptions& opts,
                                          const std::string& rel,
                                          const std::string& extension) {
  std::filesystem::path p = rel + extension;
  if (opts.out_dir) {
    std::filesystem::create_directories(*opts.out_dir);
    p = std::filesystem::path(*opts.out_dir) / p;
  } else if (p.has_parent_path()) {
    std::filesystem::create_directories(p.parent_path());
  }
  return p;
}

}  // namespace

int resolve_threads(const std::optional<int>& cli_threads) {
  if (cli_threads && *cli_threads > 0) return *cli_threads;
  if (const char* env = std::getenv("CAPCERT_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 1;
}

namespace {

// qubit counts ingestion: one report, no sweep
int run_qubit_report(const RunConfig& rc, const CommonOptions& opts,
                     std::ostream& err) {
  const Experiment& e = rc.experiments.front();
  if (!e.sweep.empty()) {
    err << "config error: counts_csv evaluation does not take sweep axes\n";
    return kExitBadConfig;
  }
  std::uint64_t seed = 0;
  if (opts.seed) {
    seed = *opts.seed;
  } else if (rc.seed) {
    seed = *rc.seed;
  } else {
    err << "config error: the heuristic entropy search is stochastic; give a "
           "seed\n";
    return kExitBadConfig;
  }
  const std::string where = "qubit config";
  const std::string csv_path = e.config.at("counts_csv").get<std::string>();
  const double delta = get_number(e.config, "delta", where);
  const std::uint64_t n = get_count(e.config, "n", where);
  const double epsilon = get_number(e.config, "epsilon", where);
  const int restarts =
      static_cast<int>(e.config.contains("restarts")
                           ? get_count(e.config, "restarts", where)
                           : 4);
  const int steps = static_cast<int>(
      e.config.contains("steps") ? get_count(e.config, "steps", where) : 200);

  std::ifstream in(csv_path);
  if (!in) {
    err << "config error: cannot open counts file: " << csv_path << '\n';
    return kExitBadConfig;
  }
  qubitproto::QubitBoundReport report;
  try {
    const auto counts = qubitproto::TomographyCounts::from_csv(in, delta);
    RngStream rng(seed, 0);
    report = qubitproto::evaluate_bound_report(counts, n, epsilon, restarts,
                                               steps, rng);
  } catch (const std::invalid_argument& ex) {
    err << "config error: " << ex.what() << '\n';
    return kExitBadConfig;
  }
  const auto path = resolve_output_path(opts, rc.output.path, ".json");
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    err << "cannot write output file: " << path.string() << '\n';
    return kExitBadConfig;
  }
  json j;
  to_json(j, report);
  j["seed"] = seed;
  out << j.dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int run_experiment(const CommonOptions& opts, std::ostream& err) {
  RunConfig rc;
  try {
    rc = parse_run_config(load_config_file(opts.config_path));
  } catch (const ConfigError& ex) {
    err << "config error: " << ex.what() << '\n';
    return kExitBadConfig;
  }
  if (rc.experiments.size() == 1 && rc.experiments.front().protocol == "qubit" &&
      rc.experiments.front().config.contains("counts_csv")) {
    return run_qubit_report(rc, opts, err);
  }
  const int threads = resolve_threads(opts.threads);

  Table table;
  bool any_nontrivial = false;
  std::string infeasible_reason;
  try {
    for (const auto& e : rc.experiments) {
      const std::vector<json> points = expand_sweep(e);
      std::vector<Row> rows(points.size());
      std::atomic<bool> nontrivial{false};
      parallel_for(points.size(), threads, [&](std::size_t i) {
        if (e.protocol == "p1") {
          bool row_ok = false;
          rows[i] = evaluate_p1_row(e, points[i], &row_ok);
          if (row_ok) nontrivial = true;
        } else if (e.protocol == "p2" && e.evaluation == "asymptotic") {
          rows[i] = evaluate_p2_asymptotic_row(e, points[i]);
          nontrivial = true;
        } else if (e.protocol == "p2") {
          rows[i] = evaluate_p2_row(e, points[i]);
          nontrivial = true;
        } else {
          rows[i] = evaluate_qubit_row(e, points[i]);
          nontrivial = true;
        }
      });
      for (auto& row : rows) table.add_row(std::move(row));
      if (nontrivial) any_nontrivial = true;
    }
  } catch (const InfeasibleError& ex) {
    err << "infeasible parameters: " << ex.what() << '\n';
    return kExitInfeasible;
  } catch (const ConfigError& ex) {
    err << "config error: " << ex.what() << '\n';
    return kExitBadConfig;
  } catch (const std::invalid_argument& ex) {
    err << "config error: " << ex.what() << '\n';
    return kExitBadConfig;
  }

  const std::string ext = rc.output.format == "csv" ? ".csv" : ".json";
  const auto path = resolve_output_path(opts, rc.output.path, ext);
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    err << "cannot write output file: " << path.string() << '\n';
    return kExitBadConfig;
  }
  if (rc.output.format == "csv") {
    table.write_csv(out);
  } else {
    table.write_json(out);
  }

  if (!any_nontrivial) {
    err << "infeasible parameters: every sweep point is trivially zero "
           "(cutoff term lambda >= sqrt(epsilon/2) everywhere)\n";
    return kExitInfeasible;
  }
  return kExitOk;
}

namespace {

// ---------------------------------------------------------------------------
// Monte Carlo campaigns

struct MonteCarloConfig {
  Experiment experiment;
  MonteCarloSpec mc;
  OutputSpec output;
};

MonteCarloConfig parse_montecarlo_config(const json& j) {
  MonteCarloConfig out;
  require_keys(j, {"protocol", "evaluation", "label", "config", "channel",
                   "sweep", "monte_carlo", "output"},
               "config");
  if (j.contains("sweep")) {
    throw ConfigError("montecarlo: sweep axes are not supported; give a "
                      "single parameter point");
  }
  out.experiment = parse_experiment(j, "config", /*top_level=*/true);
  if (!j.contains("monte_carlo")) {
    throw ConfigError("montecarlo: missing monte_carlo block");
  }
  const json& mc = j.at("monte_carlo");
  require_keys(mc, {"trials", "seed"}, "config.monte_carlo");
  out.mc.trials = get_count(mc, "trials", "config.monte_carlo");
  if (out.mc.trials == 0) {
    throw ConfigError("config.monte_carlo: trials must be >= 1");
  }
  if (mc.contains("seed")) {
    out.mc.seed = get_count(mc, "seed", "config.monte_carlo");
    out.mc.seed_given = true;
  }
  if (!j.contains("output")) {
    throw ConfigError("montecarlo: missing output block");
  }
  out.output = parse_output(j.at("output"), "config.output");
  return out;
}

struct QubitMonteCarloParams {
  double alpha = 0.0;
  double beta = 0.0;
  std::uint64_t shots_per_setting = 0;
  double delta = 0.0;
};

QubitMonteCarloParams parse_qubit_mc(const json& cfg) {
  require_keys(cfg, {"alpha", "beta", "shots_per_setting", "delta"},
               "qubit montecarlo config");
  QubitMonteCarloParams p;
  p.alpha = get_number(cfg, "alpha", "qubit montecarlo config");
  p.beta = get_number(cfg, "beta", "qubit montecarlo config");
  p.shots_per_setting = get_count(cfg, "shots_per_setting", "qubit montecarlo config");
  p.delta = get_number(cfg, "delta", "qubit montecarlo config");
  if (!(p.delta > 0.0 && p.delta < 1.0)) {
    throw ConfigError("qubit montecarlo config: delta must be in (0, 1)");
  }
  return p;
}

double binomial_se(double rate, std::uint64_t trials) {
  return std::sqrt(std::max(0.0, rate * (1.0 - rate)) /
                   static_cast<double>(trials));
}

}  // namespace

int run_montecarlo(const CommonOptions& opts, std::ostream& err) {
  MonteCarloConfig mc;
  try {
    json j = load_config_file(opts.config_path);
    // qubit campaign has its own config keys
    if (j.contains("protocol") && j.at("protocol") == "qubit") {
      require_keys(j, {"protocol", "config", "monte_carlo", "output", "label"},
                   "config");
      mc.experiment.protocol = "qubit";
      mc.experiment.config = j.at("config");
      parse_qubit_mc(mc.experiment.config);
      const json& mcj = j.at("monte_carlo");
      require_keys(mcj, {"trials", "seed"}, "config.monte_carlo");
      mc.mc.trials = get_count(mcj, "trials", "config.monte_carlo");
      if (mcj.contains("seed")) {
        mc.mc.seed = get_count(mcj, "seed", "config.monte_carlo");
        mc.mc.seed_given = true;
      }
      mc.output = parse_output(j.at("output"), "config.output");
    } else {
      mc = parse_montecarlo_config(j);
      if (!mc.experiment.channel) {
        throw ConfigError("montecarlo: missing channel block");
      }
    }
  } catch (const ConfigError& ex) {
    err << "config error: " << ex.what() << '\n';
    return kExitBadConfig;
  }

  std::uint64_t seed = 0;
  if (opts.seed) {
    seed = *opts.seed;
  } else if (mc.mc.seed_given) {
    seed = mc.mc.seed;
  } else {
    err << "config error: stochastic runs require a seed (monte_carlo.seed or "
           "--seed)\n";
    return kExitBadConfig;
  }

  const int threads = resolve_threads(opts.threads);
  const std::uint64_t trials = mc.mc.trials;
  Table table;
  json summary;
  summary["seed"] = seed;
  summary["trials"] = trials;

  try {
    if (mc.experiment.protocol == "p1") {
      const auto cfg = p1_config_from_json(mc.experiment.config, "p1 config");
      cfg.validate();
      const auto& ch = *mc.experiment.channel;
      std::vector<protocol1::CorrelationResult> results(trials);
      std::vector<std::uint64_t> retry_totals(trials);
      parallel_for(trials, threads, [&](std::size_t i) {
        RngStream rng(seed, static_cast<std::uint64_t>(i));
        const auto rec = protocol1::simulate_test_record(cfg, ch, rng);
        results[i] = protocol1::correlation_test(rec.x_alice, rec.x_bob, cfg.t);
        std::uint64_t r = 0;
        for (auto v : rec.retries) r += v;
        retry_totals[i] = r;
      });
      std::uint64_t passes = 0;
      double distance_sum = 0.0;
      for (std::uint64_t i = 0; i < trials; ++i) {
        Row row;
        row.emplace_back("trial", format_value(static_cast<std::uint64_t>(i)));
        row.emplace_back("stream", format_value(static_cast<std::uint64_t>(i)));
        row.emplace_back("passed", results[i].passed ? "true" : "false");
        row.emplace_back("avg_distance", format_value(results[i].avg_distance));
        row.emplace_back("retries", format_value(retry_totals[i]));
        table.add_row(std::move(row));
        passes += results[i].passed ? 1 : 0;
        distance_sum += results[i].avg_distance;
      }
      const double rate = static_cast<double>(passes) / static_cast<double>(trials);
      summary["campaign"] = "p1-pass-rate";
      summary["channel"] = ch.describe();
      summary["pass_rate"] = rate;
      summary["pass_rate_se"] = binomial_se(rate, trials);
      summary["mean_avg_distance"] = distance_sum / static_cast<double>(trials);
      if (ch.kind() == channels::ChannelKind::identity ||
          (ch.kind() == channels::ChannelKind::loss && ch.n_th() == 0.0)) {
        const double tau = ch.kind() == channels::ChannelKind::identity ? 1.0
                                                                        : ch.tau();
        summary["closed_form_pass_probability"] =
            protocol1::pass_probability_pure_loss(cfg.k, cfg.t, cfg.d, tau,
                                                  cfg.n_bar);
      }
    } else if (mc.experiment.protocol == "p2") {
      const auto cfg = p2_config_from_json(mc.experiment.config, "p2 config");
      try {
        cfg.validate();
      } catch (const std::invalid_argument& ex) {
        err << "infeasible parameters: " << ex.what() << '\n';
        return kExitInfeasible;
      }
      const auto& ch = *mc.experiment.channel;
      const auto moments = protocol2::heterodyne_moments(ch, cfg.n_bar);
      std::vector<protocol2::ProtocolTwoVerdict> verdicts(trials);
      parallel_for(trials, threads, [&](std::size_t i) {
        RngStream rng(seed, static_cast<std::uint64_t>(i));
        const auto rec =
            protocol2::simulate_heterodyne_pairs(ch, cfg.n_bar, cfg.k, rng);
        protocol2::ProtocolTwoVerdict v;
        v.sigma_max = protocol2::sigma_max(rec.y, cfg.k, cfg.delta);
        v.gamma_min = protocol2::gamma_min(rec.x, rec.y, cfg.k, cfg.delta,
                                           cfg.n_bar);
        v.passed = protocol2::threshold_test(v.sigma_max, v.gamma_min, cfg.a,
                                             cfg.c);
        verdicts[i] = v;
      });
      std::uint64_t passes = 0, miss_sigma = 0, miss_gamma = 0;
      for (std::uint64_t i = 0; i < trials; ++i) {
        const auto& v = verdicts[i];
        const bool ms = moments.sigma_b > v.sigma_max;
        const bool mg = moments.sigma_c < v.gamma_min;
        Row row;
        row.emplace_back("trial", format_value(static_cast<std::uint64_t>(i)));
        row.emplace_back("stream", format_value(static_cast<std::uint64_t>(i)));
        row.emplace_back("sigma_max", format_value(v.sigma_max));
        row.emplace_back("gamma_min", format_value(v.gamma_min));
        row.emplace_back("passed", v.passed ? "true" : "false");
        row.emplace_back("miss_sigma", ms ? "true" : "false");
        row.emplace_back("miss_gamma", mg ? "true" : "false");
        table.add_row(std::move(row));
        passes += v.passed ? 1 : 0;
        miss_sigma += ms ? 1 : 0;
        miss_gamma += mg ? 1 : 0;
      }
      const double pass_rate =
          static_cast<double>(passes) / static_cast<double>(trials);
      summary["campaign"] = "p2-estimator-coverage";
      summary["channel"] = ch.describe();
      summary["sigma_b_true"] = moments.sigma_b;
      summary["sigma_c_true"] = moments.sigma_c;
      summary["pass_rate"] = pass_rate;
      summary["pass_rate_se"] = binomial_se(pass_rate, trials);
      summary["miss_sigma_rate"] =
          static_cast<double>(miss_sigma) / static_cast<double>(trials);
      summary["miss_gamma_rate"] =
          static_cast<double>(miss_gamma) / static_cast<double>(trials);
      summary["delta"] = cfg.delta;
    } else {
      const auto params = parse_qubit_mc(mc.experiment.config);
      const qubitproto::QubitChannelSpec spec(params.alpha, params.beta);
      const auto rho = qubitproto::choi_state(spec);
      std::vector<char> inside(trials);
      parallel_for(trials, threads, [&](std::size_t i) {
        RngStream rng(seed, static_cast<std::uint64_t>(i));
        const auto counts = qubitproto::simulate_tomography(
            rho, params.shots_per_setting, params.delta, rng);
        inside[i] = qubitproto::polytope_halfspace_check(rho, counts) ? 1 : 0;
      });
      std::uint64_t hits = 0;
      for (std::uint64_t i = 0; i < trials; ++i) {
        Row row;
        row.emplace_back("trial", format_value(static_cast<std::uint64_t>(i)));
        row.emplace_back("stream", format_value(static_cast<std::uint64_t>(i)));
        row.emplace_back("inside_polytope", inside[i] ? "true" : "false");
        table.add_row(std::move(row));
        hits += inside[i] ? 1 : 0;
      }
      const double coverage =
          static_cast<double>(hits) / static_cast<double>(trials);
      summary["campaign"] = "qubit-polytope-coverage";
      summary["coverage"] = coverage;
      summary["coverage_se"] = binomial_se(coverage, trials);
      summary["delta"] = params.delta;
    }
  } catch (const ConfigError& ex) {
    err << "config error: " << ex.what() << '\n';
    return kExitBadConfig;
  } catch (const std::invalid_argument& ex) {
    err << "infeasible parameters: " << ex.what() << '\n';
    return kExitInfeasible;
  }

  const auto trials_path = resolve_output_path(opts, mc.output.path, ".csv");
  const auto summary_path =
      resolve_output_path(opts, mc.output.path, ".summary.json");
  std::ofstream out(trials_path, std::ios::binary);
  if (!out) {
    err << "cannot write output file: " << trials_path.string() << '\n';
    return kExitBadConfig;
  }
  table.write_csv(out);
  std::ofstream sum(summary_path, std::ios::binary);
  sum << summary.dump(2) << '\n';
  return kExitOk;
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& [name, text] : kPresets) names.emplace_back(name);
  return names;
}

int write_preset(const std::string& name,
                 const std::optional<std::string>& out_path, std::ostream& out,
                 std::ostream& err) {
  for (const auto& [preset_name, text] : kPresets) {
    if (name == preset_name) {
      if (out_path) {
        std::ofstream f(*out_path, std::ios::binary);
        if (!f) {
          err << "cannot write " << *out_path << '\n';
          return kExitBadConfig;
        }
        f << text;
      } else {
        out << text;
      }
      return kExitOk;
    }
  }
  err << "unknown preset '" << name << "'; available:";
  for (const auto& n : preset_names()) err << ' ' << n;
  err << '\n';
  return kExitBadConfig;
}

}  // namespace capcert::cli
