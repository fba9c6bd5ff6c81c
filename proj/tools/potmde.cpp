// potmde: peaks-over-threshold tail fitting by L2 minimum distance.
//
// Every output file starts with '#' lines carrying the tool version, the fully
// resolved configuration and the seed; nothing time- or host-dependent is
// written, so identical inputs give identical bytes.

#include <omp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "potmde/asymptotics.hpp"
#include "potmde/error.hpp"
#include "potmde/events.hpp"
#include "potmde/format.hpp"
#include "potmde/mde.hpp"
#include "potmde/panel_io.hpp"
#include "potmde/residual.hpp"
#include "potmde/rng.hpp"
#include "potmde/sim.hpp"
#include "potmde/threshold.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace potmde;

namespace {

constexpr const char* kVersion = "potmde 0.1.0";

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Resolution order: defaults < config file < flags given on the command line.
class Resolver {
 public:
  void load(const std::string& path) {
    if (path.empty()) return;
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file " + path);
    try {
      in >> file_;
    } catch (const json::exception& e) {
      throw DataError(path + ": " + e.what());
    }
    if (!file_.is_object()) throw DataError(path + ": config must be a JSON object");
  }

  template <class T>
  T get(const std::string& key, const CLI::Option* opt, const T& flag_value, const T& fallback) {
    T v = fallback;
    if (file_.contains(key)) {
      try {
        v = file_.at(key).get<T>();
      } catch (const json::exception& e) {
        throw DataError("config key '" + key + "': " + e.what());
      }
    }
    if (opt != nullptr && opt->count() > 0) v = flag_value;
    resolved_[key] = v;
    return v;
  }

  // Keys without a flag counterpart (structured values).
  json raw(const std::string& key) const { return file_.contains(key) ? file_.at(key) : json(); }
  void note(const std::string& key, const json& v) { resolved_[key] = v; }

  const json& resolved() const { return resolved_; }

 private:
  json file_ = json::object();
  json resolved_ = json::object();
};

struct Common {
  std::string config;
  std::string out;
  std::uint64_t seed = 1;
  int threads = 1;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* threads_opt = nullptr;
  CLI::Option* out_opt = nullptr;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "JSON config file; flags override its values")->check(CLI::ExistingFile);
  c.out_opt = sub->add_option("--out", c.out, "output directory");
  c.seed_opt = sub->add_option("--seed", c.seed, "master seed");
  c.threads_opt = sub->add_option("--threads", c.threads, "OpenMP threads (1 = serial reference path)")
                      ->check(CLI::PositiveNumber);
}

struct Job {
  Resolver cfg;
  std::string command;
  fs::path out_dir;
  std::uint64_t seed = 1;
  Execution execution = Execution::Serial;

  void begin(const std::string& cmd, Common& c) {
    command = cmd;
    cfg.load(c.config);
    const std::string out = cfg.get<std::string>("out", c.out_opt, c.out, "potmde-out");
    seed = cfg.get<std::uint64_t>("seed", c.seed_opt, c.seed, 1);
    const int threads = cfg.get<int>("threads", c.threads_opt, c.threads, 1);
    if (threads < 1) throw UsageError("--threads must be >= 1");
    omp_set_num_threads(threads);
    execution = threads > 1 ? Execution::Parallel : Execution::Serial;
    out_dir = out;
    staging_ = out_dir;
    staging_ += ".partial";
    fs::remove_all(staging_);
    fs::create_directories(staging_);
  }

  std::string header() const {
    json c = cfg.resolved();
    c.erase("out");
    c.erase("threads");  // results do not depend on it
    std::string h = std::string("# ") + kVersion + "\n# command " + command + "\n# config " + c.dump() +
                    "\n# seed " + std::to_string(seed) + "\n";
    return h;
  }

  std::ofstream open(const std::string& name) {
    std::ofstream f(staging_ / name, std::ios::binary);
    if (!f) throw DataError("cannot write " + (staging_ / name).string());
    f << header();
    return f;
  }

  void write_json(const std::string& name, json body) {
    json c = cfg.resolved();
    c.erase("out");
    c.erase("threads");
    body["version"] = kVersion;
    body["command"] = command;
    body["config"] = c;
    body["seed"] = seed;
    std::ofstream f(staging_ / name, std::ios::binary);
    if (!f) throw DataError("cannot write " + (staging_ / name).string());
    f << body.dump(2) << '\n';
  }

  // Output directory appears in one step once everything was written.
  void commit() {
    fs::remove_all(out_dir);
    if (out_dir.has_parent_path()) fs::create_directories(out_dir.parent_path());
    fs::rename(staging_, out_dir);
  }

  void abandon() noexcept {
    std::error_code ec;
    if (!staging_.empty()) fs::remove_all(staging_, ec);
  }

 private:
  fs::path staging_;
};

std::vector<double> parse_list(const std::string& text) {
  // "a,b,c" or "lo:hi:step"
  std::vector<double> v;
  if (text.empty()) return v;
  try {
    if (text.find(':') != std::string::npos) {
      std::stringstream ss(text);
      std::string a, b, c;
      std::getline(ss, a, ':');
      std::getline(ss, b, ':');
      std::getline(ss, c, ':');
      const double lo = std::stod(a), hi = std::stod(b), step = std::stod(c);
      if (!(step > 0.0) || hi < lo) throw UsageError("bad range '" + text + "'");
      const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
      for (std::size_t i = 0; i <= n; ++i) v.push_back(lo + static_cast<double>(i) * step);
    } else {
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) v.push_back(std::stod(item));
    }
  } catch (const std::invalid_argument&) {
    throw UsageError("cannot parse number list '" + text + "'");
  }
  return v;
}

std::string read_text_arg(const std::string& v) {
  if (!v.empty() && v[0] == '@') {
    std::ifstream in(v.substr(1));
    if (!in) throw UsageError("cannot open " + v.substr(1));
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }
  return v;
}

struct PanelArgs {
  std::string panel;
  std::string event;
  CLI::Option* panel_opt = nullptr;
  CLI::Option* event_opt = nullptr;
};

void add_panel(CLI::App* sub, PanelArgs& p) {
  p.panel_opt = sub->add_option("--panel", p.panel, "panel file (long or wide layout)");
  p.event_opt = sub->add_option("--event", p.event, "event spec as JSON text or @file");
}

struct Loaded {
  PanelSeries panel;
  EventSpec spec;
  std::vector<EventCurve> curves;
};

Loaded load_panel(Job& run, PanelArgs& p) {
  const std::string path = run.cfg.get<std::string>("panel", p.panel_opt, p.panel, "");
  if (path.empty()) throw UsageError("--panel is required");
  if (!fs::exists(path)) throw UsageError("panel file not found: " + path);
  std::string ev;
  if (p.event_opt->count() > 0) {
    ev = read_text_arg(p.event);
  } else if (!run.cfg.raw("event").is_null()) {
    const json e = run.cfg.raw("event");
    ev = e.is_string() ? read_text_arg(e.get<std::string>()) : e.dump();
  } else {
    throw UsageError("--event is required");
  }
  PanelSeries panel = read_panel_file(path);
  EventSpec spec = parse_event_spec(ev, panel.locations());
  json sj;
  sj["kind"] = to_string(spec.kind);
  sj["subset"] = spec.subset;
  sj["order_index"] = spec.order_index;
  run.cfg.note("event", sj);
  auto curves = event_curve(panel, spec);
  return {std::move(panel), spec, std::move(curves)};
}

struct FitArgs {
  std::string method = "mde2";
  int multistart = 3;
  std::size_t min_k = 5;
  CLI::Option* method_opt = nullptr;
  CLI::Option* multistart_opt = nullptr;
  CLI::Option* min_k_opt = nullptr;
};

void add_fit(CLI::App* sub, FitArgs& f) {
  f.method_opt = sub->add_option("--method", f.method, "mde2, mde3 or mle");
  f.multistart_opt = sub->add_option("--multistart", f.multistart, "number of optimizer starts");
  f.min_k_opt = sub->add_option("--min-k", f.min_k, "minimum number of exceedances");
}

std::pair<FitMethod, FitOptions> resolve_fit(Job& run, FitArgs& f) {
  const std::string m = run.cfg.get<std::string>("method", f.method_opt, f.method, "mde2");
  FitOptions o;
  o.multistart = run.cfg.get<int>("multistart", f.multistart_opt, f.multistart, 3);
  o.min_k = run.cfg.get<std::size_t>("min_k", f.min_k_opt, f.min_k, 5);
  try {
    return {fit_method_from_string(m), o};
  } catch (const std::exception&) {
    throw UsageError("unknown method '" + m + "'");
  }
}

json fit_json(const FitResult& f) {
  json j;
  j["method"] = to_string(f.method);
  j["gamma"] = f.gamma;
  j["mu"] = f.mu;
  j["sigma"] = f.sigma;
  j["objective"] = f.objective;
  j["score_norm"] = f.score_norm ? json(*f.score_norm) : json();
  j["k"] = f.k;
  j["converged"] = f.converged;
  j["at_boundary"] = f.at_boundary;
  j["evaluations"] = f.evaluations;
  return j;
}

json ci_json(const CiResult& c) {
  return {{"center", c.center}, {"half_width", c.half_width}, {"lo", c.lo},       {"hi", c.hi},
          {"level", c.level},   {"x", c.x},                   {"k", c.k},         {"note", c.scale_note}};
}

CiConvention convention_from(const std::string& s) {
  if (s == "corrected") return CiConvention::Corrected;
  if (s == "strict") return CiConvention::StrictPaper;
  throw UsageError("unknown CI convention '" + s + "' (corrected or strict)");
}

// ---------------------------------------------------------------- project

int cmd_project(Job& run, PanelArgs& p) {
  const Loaded L = load_panel(run, p);
  const auto series = project(L.panel, L.spec);
  {
    auto f = run.open("aggregator.csv");
    f << "run,t,g\n";
    for (std::size_t r = 0; r < series.size(); ++r)
      for (std::size_t t = 0; t < series[r].size(); ++t)
        f << L.panel.runs()[r].id << ',' << t << ',' << fmt_num(series[r][t]) << '\n';
  }
  json runs = json::array();
  for (std::size_t r = 0; r < L.curves.size(); ++r) {
    const std::string name = "counts_" + std::to_string(r + 1) + ".csv";
    auto f = run.open(name);
    f << "# run " << L.panel.runs()[r].id << "\nq_from,count\n";
    const CountsFunction cf = counts_function(L.curves[r]);
    for (std::size_t i = 0; i < cf.breaks.size(); ++i) f << fmt_num(cf.breaks[i]) << ',' << cf.counts[i] << '\n';
    runs.push_back({{"run", L.panel.runs()[r].id}, {"file", name}, {"n_effective", L.curves[r].n_effective}});
  }
  run.write_json("summary.json", {{"runs", runs}, {"monotone", L.spec.kind != EventKind::RunPattern}});
  return kOk;
}

// ---------------------------------------------------------------- fit

struct FitCmd {
  PanelArgs p;
  FitArgs f;
  double u = 0.0, q = 0.0, level = 0.95;
  std::string convention = "corrected";
  CLI::Option *u_opt = nullptr, *q_opt = nullptr, *level_opt = nullptr, *conv_opt = nullptr;
};

int cmd_fit(Job& run, FitCmd& c) {
  const Loaded L = load_panel(run, c.p);
  auto [method, opts] = resolve_fit(run, c.f);
  const double u = run.cfg.get<double>("u", c.u_opt, c.u, NAN);
  if (!std::isfinite(u)) throw UsageError("--u is required");
  const double q = run.cfg.get<double>("target_q", c.q_opt, c.q, NAN);
  CiOptions ci;
  ci.level = run.cfg.get<double>("level", c.level_opt, c.level, 0.95);
  ci.convention = convention_from(run.cfg.get<std::string>("convention", c.conv_opt, c.convention, "corrected"));

  const ExceedanceSample s = exceedances(L.curves, u);
  if (s.total_k < static_cast<long long>(opts.min_k))
    throw DataError("too few exceedances above u: k = " + std::to_string(s.total_k) +
                    ", min_k = " + std::to_string(opts.min_k));
  const FitResult fr = fit(s, method, opts);

  const bool can_ci = method == FitMethod::Mde2 && s.total_k >= static_cast<long long>(ci.min_k);
  {
    auto f = run.open("fit_curve.csv");
    f << "x,empirical,fitted,ci_lo,ci_hi\n";
    const double top = s.pooled_step.size() ? 1.1 * s.pooled_step.breaks().back() : 1.0;
    constexpr int kGrid = 200;
    for (int i = 0; i <= kGrid; ++i) {
      const double x = top * i / kGrid;
      f << fmt_num(x) << ',' << fmt_num(s.pooled_step(x)) << ',' << fmt_num(fitted_survival(fr, x)) << ',';
      if (can_ci && x > 0.0) {
        const CiResult r = confidence_interval(fr, x, ci);
        f << fmt_num(r.lo) << ',' << fmt_num(r.hi) << '\n';
      } else {
        f << "NA,NA\n";
      }
    }
  }
  json body;
  body["fit"] = fit_json(fr);
  body["threshold_u"] = u;
  body["rate"] = s.rate;
  body["n_total"] = s.n_total;
  body["runs"] = L.curves.size();
  body["monotone"] = s.monotone;
  if (std::isfinite(q)) {
    double n_per_run = 0.0;
    for (const auto& cv : L.curves) n_per_run += static_cast<double>(cv.n_effective);
    n_per_run /= static_cast<double>(L.curves.size());
    const TargetEstimate t = estimate_target(s, fr, q, n_per_run);
    json tj = {{"q", q}, {"probability", t.probability}, {"expected_count", t.expected_count},
               {"n_per_run", n_per_run}};
    if (can_ci) tj["ci"] = ci_json(target_ci(fr, q - u, n_per_run, s.rate, ci));
    body["target"] = tj;
  }
  run.write_json("fit.json", body);
  return kOk;
}

// ---------------------------------------------------------------- scan

struct ScanCmd {
  PanelArgs p;
  FitArgs f;
  double q = 0.0, u1 = 0.0, u2 = 0.0, u = 0.0;
  std::string grid;
  std::size_t scan_min_k = 20;
  bool advisory = false;
  CLI::Option *q_opt = nullptr, *u1_opt = nullptr, *u2_opt = nullptr, *u_opt = nullptr, *grid_opt = nullptr,
              *scan_min_k_opt = nullptr, *advisory_opt = nullptr;
};

int cmd_scan(Job& run, ScanCmd& c) {
  const Loaded L = load_panel(run, c.p);
  auto [method, fopts] = resolve_fit(run, c.f);
  const double q = run.cfg.get<double>("target_q", c.q_opt, c.q, NAN);
  if (!std::isfinite(q)) throw UsageError("--target-q is required");
  const auto grid = parse_list(run.cfg.get<std::string>("u_grid", c.grid_opt, c.grid, ""));
  if (grid.empty()) throw UsageError("--u-grid is required");
  ScanOptions so;
  so.method = method;
  so.fit = fopts;
  so.min_k = run.cfg.get<std::size_t>("scan_min_k", c.scan_min_k_opt, c.scan_min_k, 20);
  so.execution = run.execution;
  const ThresholdScan sc = scan(L.curves, q, grid, so);

  std::optional<std::pair<double, double>> region;
  const double u1 = run.cfg.get<double>("u1", c.u1_opt, c.u1, NAN);
  const double u2 = run.cfg.get<double>("u2", c.u2_opt, c.u2, NAN);
  const double us = run.cfg.get<double>("u", c.u_opt, c.u, NAN);
  if (std::isfinite(u1) != std::isfinite(u2)) throw UsageError("--u1 and --u2 go together");
  if (std::isfinite(u1)) region = {u1, u2};
  if (std::isfinite(us)) region = {us, us};

  json body;
  body["target_q"] = q;
  body["n_per_run"] = sc.n_per_run;
  {
    auto f = run.open("scan.csv");
    write_scan_table(f, sc);
    if (region) {
      const RegionAverage a = average_over_region(sc, region->first, region->second);
      f << "# average u1=" << fmt_num(region->first) << " u2=" << fmt_num(region->second)
        << " probability=" << fmt_num(a.probability) << " expected_count=" << fmt_num(a.expected_count)
        << " points=" << a.contributing_us.size() << '\n';
      body["region"] = {{"u1", region->first},
                        {"u2", region->second},
                        {"probability", a.probability},
                        {"expected_count", a.expected_count},
                        {"contributing_us", a.contributing_us}};
    }
  }
  if (run.cfg.get<bool>("advisory_region", c.advisory_opt, c.advisory, false)) {
    const auto s = suggest_stable_region(sc);
    body["advisory_region"] = s ? json{{"u1", s->first}, {"u2", s->second}, {"note", "heuristic, not a selection"}}
                                : json();
  }
  std::size_t skipped = 0;
  for (const auto& r : sc.records) skipped += r.skipped;
  body["points"] = sc.records.size();
  body["skipped"] = skipped;
  run.write_json("scan_summary.json", body);
  return kOk;
}

// ---------------------------------------------------------------- simulate

struct SimCmd {
  std::string preset = "appendix-d";
  std::size_t reps = 1000, k = 500, n = 100000;
  double gamma = 0.2, sigma = 1.0, level = 0.95, alpha = 2.0, prob = 0.99;
  std::string x_levels = "0.5,1,2,5";
  CLI::Option *preset_opt = nullptr, *reps_opt = nullptr, *k_opt = nullptr, *n_opt = nullptr, *gamma_opt = nullptr,
              *sigma_opt = nullptr, *level_opt = nullptr, *alpha_opt = nullptr, *prob_opt = nullptr,
              *x_opt = nullptr;
};

void write_mc_table(std::ofstream& f, const SimReport& rep, std::size_t n) {
  f << "gamma,estimator,parameter,mse,variance,bias2,used,boundary,excluded\n";
  for (const auto& c : rep.cells) {
    if (c.n != n) continue;
    for (int e = 0; e < 2; ++e) {
      const EstimatorCell& ec = e == 0 ? c.mde : c.mle;
      for (int p = 0; p < 2; ++p) {
        const MomentStats& m = p == 0 ? ec.gamma : ec.sigma;
        f << fmt_num(c.gamma) << ',' << (e == 0 ? "mde" : "mle") << ',' << (p == 0 ? "gamma" : "sigma") << ','
          << fmt_num(m.mse) << ',' << fmt_num(m.variance) << ',' << fmt_num(m.bias2) << ',' << m.used << ','
          << ec.boundary << ',' << ec.excluded.size() << '\n';
      }
    }
  }
}

int cmd_simulate(Job& run, SimCmd& c) {
  const std::string preset = run.cfg.get<std::string>("preset", c.preset_opt, c.preset, "appendix-d");
  const std::size_t reps = run.cfg.get<std::size_t>("reps", c.reps_opt, c.reps, 1000);
  SimOptions so;
  so.execution = run.execution;
  json body;
  body["preset"] = preset;
  if (preset == "appendix-d") {
    std::vector<double> gg;
    for (int i = 1; i <= 12; ++i) gg.push_back(0.05 * i);
    const std::vector<std::size_t> ns{10, 50, 100};
    const SimReport rep = mc_compare(gg, ns, reps, run.seed, so);
    for (std::size_t n : ns) {
      auto f = run.open("mc_n" + std::to_string(n) + ".csv");
      write_mc_table(f, rep, n);
    }
    const auto mise = mise_survival(GpdParams(0.2, 1.0), {10, 100}, reps, run.seed, std::nullopt, so);
    auto f = run.open("mise.csv");
    f << "n,estimator,mise,std_error,used,excluded\n";
    json mj = json::array();
    for (const auto& m : mise) {
      f << m.n << ',' << (m.method == FitMethod::Mle ? "mle" : "mde") << ',' << fmt_num(m.mise) << ','
        << fmt_num(m.std_error) << ',' << m.used << ',' << m.excluded << '\n';
      mj.push_back({{"n", m.n}, {"estimator", m.method == FitMethod::Mle ? "mle" : "mde"}, {"mise", m.mise}});
    }
    std::size_t mle_better = 0;
    for (const auto& cell : rep.cells) mle_better += cell.mle.gamma.mse <= cell.mde.gamma.mse;
    body["cells"] = rep.cells.size();
    body["cells_mle_mse_le_mde"] = mle_better;
    body["mise"] = mj;
  } else if (preset == "coverage") {
    const GpdParams theta(run.cfg.get<double>("gamma", c.gamma_opt, c.gamma, 0.2),
                          run.cfg.get<double>("sigma", c.sigma_opt, c.sigma, 1.0));
    const auto xs = parse_list(run.cfg.get<std::string>("x_levels", c.x_opt, c.x_levels, "0.5,1,2,5"));
    const auto rows =
        coverage_study(theta, run.cfg.get<std::size_t>("k", c.k_opt, c.k, 500), xs,
                       run.cfg.get<double>("level", c.level_opt, c.level, 0.95), reps, run.seed, so);
    auto f = run.open("coverage.csv");
    f << "x,variant,coverage,std_error,used\n";
    for (const auto& r : rows)
      f << fmt_num(r.x) << ',' << to_string(r.variant) << ',' << fmt_num(r.coverage) << ','
        << fmt_num(r.std_error) << ',' << r.used << '\n';
  } else if (preset == "clt") {
    const GpdParams theta(run.cfg.get<double>("gamma", c.gamma_opt, c.gamma, 0.2),
                          run.cfg.get<double>("sigma", c.sigma_opt, c.sigma, 1.0));
    const CltReport r = clt_study(theta, run.cfg.get<std::size_t>("k", c.k_opt, c.k, 10000), reps, run.seed, so);
    auto f = run.open("clt.csv");
    f << "estimator,entry,empirical,theory,used\n";
    const auto row = [&](const char* e, const CovMatrix2& emp, const CovMatrix2& th, std::size_t used) {
      f << e << ",s11," << fmt_num(emp.a11) << ',' << fmt_num(th.a11) << ',' << used << '\n';
      f << e << ",s12," << fmt_num(emp.a12) << ',' << fmt_num(th.a12) << ',' << used << '\n';
      f << e << ",s22," << fmt_num(emp.a22) << ',' << fmt_num(th.a22) << ',' << used << '\n';
    };
    row("mde", r.mde, r.mde_theory, r.used_mde);
    row("mle", r.mle, r.mle_theory, r.used_mle);
  } else if (preset == "maxlinear") {
    MaxLinearModel m;
    m.alpha = run.cfg.get<double>("alpha", c.alpha_opt, c.alpha, 2.0);
    const json a = run.cfg.raw("A");
    if (a.is_array()) {
      m.factors = a.size();
      m.dim = m.factors ? a.at(0).size() : 0;
      for (const auto& row : a) {
        if (row.size() != m.dim) throw DataError("config key 'A': rows must have equal length");
        for (const auto& v : row) m.A.push_back(v.get<double>());
      }
    } else {
      // random 3 x 4 coefficients from the master seed
      m.factors = 3;
      m.dim = 4;
      Rng rng(derive_seed(run.seed, {0xA11}));
      for (int i = 0; i < 12; ++i) m.A.push_back(rng.uniform_open());
    }
    json aj = json::array();
    for (std::size_t i = 0; i < m.factors; ++i)
      aj.push_back(std::vector<double>(m.A.begin() + i * m.dim, m.A.begin() + (i + 1) * m.dim));
    run.cfg.note("A", aj);
    const RecoveryReport r =
        maxlinear_recovery(m, run.cfg.get<std::size_t>("n", c.n_opt, c.n, 100000), reps,
                           run.cfg.get<double>("prob", c.prob_opt, c.prob, 0.99), run.seed, so);
    auto f = run.open("recovery.csv");
    f << "rep,gamma_hat\n";
    for (std::size_t i = 0; i < r.gamma_hat.size(); ++i) f << i << ',' << fmt_num(r.gamma_hat[i]) << '\n';
    const ImpliedGpd ig = implied_gpd(m);
    body["implied"] = {{"gamma", ig.gamma}, {"sigma", ig.sigma}, {"in_domain", ig.in_domain}};
    body["median_gamma"] = r.median_gamma;
    body["tail"] = {{"level", r.tail_level},
                    {"empirical", r.empirical_tail},
                    {"analytic", r.analytic},
                    {"std_error", r.tail_std_error}};
  } else {
    throw UsageError("unknown preset '" + preset + "' (appendix-d, coverage, clt, maxlinear)");
  }
  body["reps"] = reps;
  run.write_json("summary.json", body);
  return kOk;
}

// ---------------------------------------------------------------- ci

struct CiCmd {
  std::string fit_json;
  double gamma = 0.0, sigma = 0.0, level = 0.95;
  long long k = 0;
  std::string xs, convention = "corrected";
  CLI::Option *fit_opt = nullptr, *gamma_opt = nullptr, *sigma_opt = nullptr, *k_opt = nullptr, *x_opt = nullptr,
              *level_opt = nullptr, *conv_opt = nullptr;
};

int cmd_ci(Job& run, CiCmd& c) {
  FitResult fr;
  const std::string path = run.cfg.get<std::string>("fit_json", c.fit_opt, c.fit_json, "");
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open " + path);
    json j;
    try {
      in >> j;
      const json& f = j.contains("fit") ? j.at("fit") : j;
      fr.method = fit_method_from_string(f.at("method").get<std::string>());
      fr.gamma = f.at("gamma").get<double>();
      fr.mu = f.value("mu", 0.0);
      fr.sigma = f.at("sigma").get<double>();
      fr.k = f.at("k").get<long long>();
    } catch (const json::exception& e) {
      throw DataError(path + ": " + e.what());
    }
  } else {
    fr.gamma = run.cfg.get<double>("gamma", c.gamma_opt, c.gamma, NAN);
    fr.sigma = run.cfg.get<double>("sigma", c.sigma_opt, c.sigma, NAN);
    fr.k = run.cfg.get<long long>("k", c.k_opt, c.k, 0);
    if (!std::isfinite(fr.gamma) || !std::isfinite(fr.sigma) || fr.k <= 0)
      throw UsageError("give --fit-json or all of --gamma, --sigma, --k");
  }
  const auto xs = parse_list(run.cfg.get<std::string>("x", c.x_opt, c.xs, ""));
  if (xs.empty()) throw UsageError("--x is required");
  CiOptions o;
  o.level = run.cfg.get<double>("level", c.level_opt, c.level, 0.95);
  o.convention = convention_from(run.cfg.get<std::string>("convention", c.conv_opt, c.convention, "corrected"));
  json arr = json::array();
  for (double x : xs) arr.push_back(ci_json(confidence_interval(fr, x, o)));
  run.write_json("ci.json", {{"fit", fit_json(fr)}, {"intervals", arr}});
  return kOk;
}

// ---------------------------------------------------------------- report

struct ReportCmd {
  std::vector<std::string> inputs;
};

int cmd_report(Job& run, ReportCmd& c) {
  std::vector<std::string> inputs = c.inputs;
  if (inputs.empty() && run.cfg.raw("inputs").is_array()) inputs = run.cfg.raw("inputs").get<std::vector<std::string>>();
  if (inputs.empty()) throw UsageError("report needs fit.json or scan_summary.json inputs");
  run.cfg.note("inputs", inputs);
  auto f = run.open("report.csv");
  f << "source,q,u,gamma,mu,sigma,estimate,ci_lo,ci_hi\n";
  for (const auto& path : inputs) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw DataError(path + ": " + e.what());
    }
    const std::string src = fs::path(path).parent_path().filename().string();
    if (j.contains("target")) {
      const json& fit = j.at("fit");
      const json& t = j.at("target");
      f << src << ',' << fmt_num(t.at("q").get<double>()) << ',' << fmt_num(j.at("threshold_u").get<double>()) << ','
        << fmt_num(fit.at("gamma").get<double>()) << ',' << fmt_num(fit.at("mu").get<double>()) << ','
        << fmt_num(fit.at("sigma").get<double>()) << ',' << fmt_num(t.at("expected_count").get<double>()) << ',';
      if (t.contains("ci"))
        f << fmt_num(t["ci"].at("lo").get<double>()) << ',' << fmt_num(t["ci"].at("hi").get<double>()) << '\n';
      else
        f << "NA,NA\n";
    } else if (j.contains("region")) {
      const json& r = j.at("region");
      f << src << ',' << fmt_num(j.at("target_q").get<double>()) << ",[" << fmt_num(r.at("u1").get<double>()) << ";"
        << fmt_num(r.at("u2").get<double>()) << "],NA,NA,NA," << fmt_num(r.at("expected_count").get<double>())
        << ",NA,NA\n";
    } else {
      throw DataError(path + ": neither a fit with a target nor a scan with a region");
    }
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Peaks-over-threshold tail fitting by L2 minimum distance"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  Common c_project, c_fit, c_scan, c_sim, c_ci, c_report;
  PanelArgs proj;
  auto* s_project = app.add_subcommand("project", "event curves and counts tables from a panel");
  add_common(s_project, c_project);
  add_panel(s_project, proj);

  FitCmd fc;
  auto* s_fit = app.add_subcommand("fit", "fit the exceedances above u");
  add_common(s_fit, c_fit);
  add_panel(s_fit, fc.p);
  add_fit(s_fit, fc.f);
  fc.u_opt = s_fit->add_option("--u", fc.u, "threshold");
  fc.q_opt = s_fit->add_option("--target-q", fc.q, "extreme level for the target estimate");
  fc.level_opt = s_fit->add_option("--level", fc.level, "confidence level");
  fc.conv_opt = s_fit->add_option("--convention", fc.convention, "corrected or strict");

  ScanCmd sc;
  auto* s_scan = app.add_subcommand("scan", "target estimates over a threshold grid");
  add_common(s_scan, c_scan);
  add_panel(s_scan, sc.p);
  add_fit(s_scan, sc.f);
  sc.q_opt = s_scan->add_option("--target-q", sc.q, "extreme level");
  sc.grid_opt = s_scan->add_option("--u-grid", sc.grid, "thresholds: a,b,c or lo:hi:step");
  sc.u1_opt = s_scan->add_option("--u1", sc.u1, "region start");
  sc.u2_opt = s_scan->add_option("--u2", sc.u2, "region end");
  sc.u_opt = s_scan->add_option("--u", sc.u, "single-threshold region");
  sc.scan_min_k_opt = s_scan->add_option("--scan-min-k", sc.scan_min_k, "skip thresholds with fewer exceedances");
  sc.advisory_opt = s_scan->add_flag("--advisory-region", sc.advisory, "add a heuristic stable-region suggestion");

  SimCmd sm;
  auto* s_sim = app.add_subcommand("simulate", "Monte Carlo studies");
  add_common(s_sim, c_sim);
  sm.preset_opt = s_sim->add_option("--preset", sm.preset, "appendix-d, coverage, clt or maxlinear");
  sm.reps_opt = s_sim->add_option("--reps", sm.reps, "replications")->check(CLI::PositiveNumber);
  sm.k_opt = s_sim->add_option("--k", sm.k, "sample size (coverage, clt)");
  sm.n_opt = s_sim->add_option("--n", sm.n, "rows per replicate (maxlinear)");
  sm.gamma_opt = s_sim->add_option("--gamma", sm.gamma, "true shape");
  sm.sigma_opt = s_sim->add_option("--sigma", sm.sigma, "true scale");
  sm.level_opt = s_sim->add_option("--level", sm.level, "confidence level (coverage)");
  sm.alpha_opt = s_sim->add_option("--alpha", sm.alpha, "Frechet index (maxlinear)");
  sm.prob_opt = s_sim->add_option("--prob", sm.prob, "threshold quantile (maxlinear)");
  sm.x_opt = s_sim->add_option("--x-levels", sm.x_levels, "excess levels (coverage)");

  CiCmd cc;
  auto* s_ci = app.add_subcommand("ci", "plug-in confidence intervals for S(x)");
  add_common(s_ci, c_ci);
  cc.fit_opt = s_ci->add_option("--fit-json", cc.fit_json, "fit.json written by the fit command");
  cc.gamma_opt = s_ci->add_option("--gamma", cc.gamma, "shape");
  cc.sigma_opt = s_ci->add_option("--sigma", cc.sigma, "scale");
  cc.k_opt = s_ci->add_option("--k", cc.k, "number of exceedances");
  cc.x_opt = s_ci->add_option("--x", cc.xs, "excess levels: a,b,c or lo:hi:step");
  cc.level_opt = s_ci->add_option("--level", cc.level, "confidence level");
  cc.conv_opt = s_ci->add_option("--convention", cc.convention, "corrected or strict");

  ReportCmd rc;
  auto* s_report = app.add_subcommand("report", "summary rows from fit or scan outputs");
  add_common(s_report, c_report);
  s_report->add_option("inputs", rc.inputs, "fit.json / scan_summary.json files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  Job run;
  try {
    int code = kOk;
    if (*s_project) {
      run.begin("project", c_project);
      code = cmd_project(run, proj);
    } else if (*s_fit) {
      run.begin("fit", c_fit);
      code = cmd_fit(run, fc);
    } else if (*s_scan) {
      run.begin("scan", c_scan);
      code = cmd_scan(run, sc);
    } else if (*s_sim) {
      run.begin("simulate", c_sim);
      code = cmd_simulate(run, sm);
    } else if (*s_ci) {
      run.begin("ci", c_ci);
      code = cmd_ci(run, cc);
    } else if (*s_report) {
      run.begin("report", c_report);
      code = cmd_report(run, rc);
    }
    run.commit();
    return code;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    run.abandon();
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    run.abandon();
    return kData;
  } catch (const DivergenceError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    run.abandon();
    return kNumeric;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    run.abandon();
    return kNumeric;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    run.abandon();
    return kUsage;
  } catch (const UnsupportedError& e) {
    std::cerr << "error: " << e.what() << '\n';
    run.abandon();
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    run.abandon();
    return kNumeric;
  }
}
