// liftlab command line front end: run configuration, subcommands, structured
// result emission and reproducibility metadata.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "liftlab/derivative.hpp"
#include "liftlab/error.hpp"
#include "liftlab/gibbs.hpp"
#include "liftlab/ladder.hpp"
#include "liftlab/models.hpp"
#include "liftlab/process.hpp"
#include "liftlab/rng.hpp"
#include "liftlab/schedule.hpp"
#include "liftlab/sets.hpp"

namespace {

using nlohmann::json;

constexpr const char* kVersion = "liftlab 0.1.0";

constexpr int kExitOk = 0;
constexpr int kExitVerifyFail = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct CliOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string out_path;
  bool zero_external_field = false;
  bool corrupt_phi_sign = false;
  bool corrupt_phi02_sign = false;
  std::vector<std::string> overrides;
};

std::uint64_t fnv1a(const std::string& data) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

json parse_scalar(const std::string& text) {
  json v = json::parse(text, nullptr, false);
  if (v.is_discarded()) return json(text);  // bare strings stay strings
  return v;
}

// Applies --a.b.c=value style overrides onto the config document.
void apply_overrides(json& cfg, const std::vector<std::string>& overrides) {
  for (const std::string& raw : overrides) {
    std::string item = raw;
    if (item.rfind("--", 0) == 0) item = item.substr(2);
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw liftlab::Error(liftlab::ErrorCode::kConfigError,
                           "override '" + raw + "' is not of the form --key=value");
    }
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    std::string pointer = "/";
    for (char c : key) pointer += (c == '.') ? '/' : c;
    cfg[json::json_pointer(pointer)] = parse_scalar(value);
  }
}

std::uint64_t resolve_seed(const CliOptions& opts, const json& cfg) {
  if (opts.seed) return *opts.seed;
  if (cfg.contains("estimator") && cfg["estimator"].contains("seed")) {
    return cfg["estimator"]["seed"].get<std::uint64_t>();
  }
  if (const char* env = std::getenv("LIFTLAB_SEED")) {
    return std::strtoull(env, nullptr, 10);
  }
  return 0;
}

liftlab::LiftingSchedule schedule_from(const json& cfg) {
  if (!cfg.contains("schedule")) {
    throw liftlab::Error(liftlab::ErrorCode::kConfigError, "config lacks a 'schedule' object");
  }
  const json& s = cfg["schedule"];
  return liftlab::validate_schedule(s.at("p").get<std::vector<double>>(),
                                    s.at("q").get<std::vector<double>>(),
                                    s.at("m").get<std::vector<double>>(),
                                    s.value("force_m", false));
}

std::vector<std::vector<double>> generated_side(const json& g) {
  const std::string kind = g.at("kind").get<std::string>();
  if (kind == "hypercube") {
    return liftlab::hypercube_set(g.at("n").get<int>());
  }
  if (kind == "sphere") {
    return liftlab::sphere_set(g.at("dim").get<int>(), g.at("count").get<int>(),
                               g.value("positive_orthant", false),
                               g.value("seed", std::uint64_t{1}));
  }
  throw liftlab::Error(liftlab::ErrorCode::kConfigError,
                       "unknown set generator kind '" + kind + "'");
}

liftlab::IndexedSets sets_from(const json& cfg) {
  if (!cfg.contains("sets")) {
    throw liftlab::Error(liftlab::ErrorCode::kConfigError, "config lacks a 'sets' object");
  }
  const json& s = cfg["sets"];
  if (s.contains("file")) {
    return liftlab::IndexedSets::load(s["file"].get<std::string>());
  }
  if (s.contains("generator")) {
    return liftlab::IndexedSets::from_vectors(generated_side(s["generator"].at("x")),
                                              generated_side(s["generator"].at("y")));
  }
  throw liftlab::Error(liftlab::ErrorCode::kConfigError,
                       "'sets' needs either a 'file' path or a 'generator' spec");
}

liftlab::EstimatorConfig estimator_from(const json& cfg, std::uint64_t seed) {
  if (!cfg.contains("estimator")) {
    throw liftlab::Error(liftlab::ErrorCode::kConfigError, "config lacks an 'estimator' object");
  }
  const json& e = cfg["estimator"];
  liftlab::EstimatorConfig out;
  out.samples_per_level = e.at("samples_per_level").get<std::vector<std::uint64_t>>();
  out.fd_step = e.value("fd_step", 0.02);
  out.replica_streams_independent = e.value("replica_streams_independent", true);
  out.seed = seed;
  return out;
}

std::vector<double> grid_from(const json& cfg, const char* scalar_key, const char* grid_key) {
  if (cfg.contains(grid_key)) return cfg[grid_key].get<std::vector<double>>();
  if (cfg.contains(scalar_key)) return {cfg[scalar_key].get<double>()};
  throw liftlab::Error(liftlab::ErrorCode::kConfigError,
                       std::string("config lacks '") + scalar_key + "' / '" + grid_key + "'");
}

class RecordWriter {
 public:
  explicit RecordWriter(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path);
      if (!file_) {
        throw liftlab::Error(liftlab::ErrorCode::kIoError, "cannot open output file: " + path);
      }
    }
  }
  void line(const std::string& text) {
    if (file_.is_open()) {
      file_ << text << '\n';
    } else {
      std::cout << text << '\n';
    }
  }

 private:
  std::ofstream file_;
};

double wall_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
      .count();
}

json load_config(const CliOptions& opts) {
  json cfg;
  if (!opts.config_path.empty()) {
    std::ifstream in(opts.config_path);
    if (!in) {
      throw liftlab::Error(liftlab::ErrorCode::kConfigError,
                           "cannot open config file: " + opts.config_path);
    }
    try {
      in >> cfg;
    } catch (const json::exception& e) {
      throw liftlab::Error(liftlab::ErrorCode::kConfigError,
                           opts.config_path + ": " + e.what());
    }
  } else {
    cfg = json::object();
  }
  apply_overrides(cfg, opts.overrides);
  return cfg;
}

struct RunContext {
  json cfg;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  int threads = 0;
};

RunContext make_context(const CliOptions& opts) {
  RunContext ctx;
  ctx.cfg = load_config(opts);
  ctx.seed = resolve_seed(opts, ctx.cfg);
  ctx.threads = opts.threads;
  if (ctx.threads == 0 && ctx.cfg.contains("threads")) {
    ctx.threads = ctx.cfg["threads"].get<int>();
  }
  json hashed = ctx.cfg;
  hashed["resolved_seed"] = ctx.seed;
  ctx.config_hash = fnv1a(hashed.dump());
  return ctx;
}

void attach_meta(json& record, const RunContext& ctx) {
  record["seed"] = ctx.seed;
  record["config_hash"] = ctx.config_hash;
  record["version"] = kVersion;
}

int cmd_estimate_psi(const CliOptions& opts) {
  RunContext ctx = make_context(opts);
  const auto schedule = schedule_from(ctx.cfg);
  const auto sets = sets_from(ctx.cfg);
  const auto est_cfg = estimator_from(ctx.cfg, ctx.seed);
  const auto t_grid = grid_from(ctx.cfg, "t", "t_grid");
  const auto beta_grid = grid_from(ctx.cfg, "beta", "beta_grid");
  const double s = ctx.cfg.at("s").get<double>();
  RecordWriter out(opts.out_path.empty() ? ctx.cfg.value("out", "") : opts.out_path);

  std::ofstream csv;
  const std::string csv_path = ctx.cfg.value("csv", "");
  if (!csv_path.empty()) {
    csv.open(csv_path);
    if (!csv) {
      throw liftlab::Error(liftlab::ErrorCode::kIoError, "cannot open csv file: " + csv_path);
    }
    csv << "t,beta,psi,std_error,n_outer,seed\n";
    csv.precision(17);
  }

  for (double t : t_grid) {
    for (double beta : beta_grid) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto est = liftlab::psi(schedule, sets, beta, s, t, est_cfg, ctx.threads);
      json rec;
      rec["t"] = t;
      rec["beta"] = beta;
      rec["psi"] = est.value;
      rec["std_error"] = est.std_error;
      rec["n_outer"] = est.n_outer;
      attach_meta(rec, ctx);
      rec["wall_ms"] = wall_since(t0);
      out.line(rec.dump());
      if (csv.is_open()) {
        csv << t << ',' << beta << ',' << est.value << ',' << est.std_error << ','
            << est.n_outer << ',' << ctx.seed << '\n';
      }
    }
  }
  return kExitOk;
}

int cmd_verify_derivative(const CliOptions& opts) {
  RunContext ctx = make_context(opts);
  const auto schedule = schedule_from(ctx.cfg);
  const auto sets = sets_from(ctx.cfg);
  const auto est_cfg = estimator_from(ctx.cfg, ctx.seed);
  const auto t_grid = grid_from(ctx.cfg, "t", "t_grid");
  const auto beta_grid = grid_from(ctx.cfg, "beta", "beta_grid");
  const double s = ctx.cfg.at("s").get<double>();

  // Endpoints are outside the verifier's documented domain.
  for (double t : t_grid) {
    if (!(t >= 2.0 * est_cfg.fd_step && t <= 1.0 - 2.0 * est_cfg.fd_step)) {
      throw liftlab::Error(liftlab::ErrorCode::kConfigError,
                           "t grid point " + std::to_string(t) +
                               " outside the verifiable band [2h, 1-2h]");
    }
  }

  liftlab::DerivativeDebug debug;
  debug.flip_phi_sign = opts.corrupt_phi_sign;
  debug.flip_phi02_sign = opts.corrupt_phi02_sign;
  const bool corrupted = debug.flip_phi_sign || debug.flip_phi02_sign;

  RecordWriter out(opts.out_path.empty() ? ctx.cfg.value("out", "") : opts.out_path);
  bool all_pass = true;
  for (double t : t_grid) {
    for (double beta : beta_grid) {
      const auto rep = liftlab::verify_derivative(schedule, sets, beta, s, t, est_cfg,
                                                  ctx.threads, corrupted ? &debug : nullptr);
      all_pass = all_pass && rep.pass;
      json rec = json::parse(rep.to_json_string());
      attach_meta(rec, ctx);
      out.line(rec.dump());
      std::fprintf(stderr, "verify t=%g beta=%g: %s (|diff|=%.3g vs 3*sigma+ch2=%.3g)\n", t,
                   beta, rep.pass ? "PASS" : "FAIL", std::fabs(rep.difference),
                   3.0 * rep.combined_std_error + rep.curvature_estimate);
    }
  }
  return all_pass ? kExitOk : kExitVerifyFail;
}

int cmd_compare_endpoints(const CliOptions& opts) {
  RunContext ctx = make_context(opts);
  const auto schedule = schedule_from(ctx.cfg);
  const auto sets = sets_from(ctx.cfg);
  const auto beta_grid = grid_from(ctx.cfg, "beta", "beta_grid");
  const double s = ctx.cfg.at("s").get<double>();
  RecordWriter out(opts.out_path.empty() ? ctx.cfg.value("out", "") : opts.out_path);

  for (double beta : beta_grid) {
    const auto t0 = std::chrono::steady_clock::now();
    // Independent seeds for the two endpoint estimates.
    auto cfg0 = estimator_from(ctx.cfg, liftlab::rng::key_combine(ctx.seed, 0xE0));
    auto cfg1 = estimator_from(ctx.cfg, liftlab::rng::key_combine(ctx.seed, 0xE1));
    const auto at0 = liftlab::psi(schedule, sets, beta, s, 0.0, cfg0, ctx.threads);
    const auto at1 = liftlab::psi(schedule, sets, beta, s, 1.0, cfg1, ctx.threads);
    json rec;
    rec["beta"] = beta;
    rec["psi_t0"] = at0.value;
    rec["psi_t0_std_error"] = at0.std_error;
    rec["psi_t1"] = at1.value;
    rec["psi_t1_std_error"] = at1.std_error;
    rec["difference"] = at1.value - at0.value;
    rec["combined_std_error"] =
        std::sqrt(at0.std_error * at0.std_error + at1.std_error * at1.std_error);
    rec["n_outer"] = at0.n_outer;
    attach_meta(rec, ctx);
    rec["wall_ms"] = wall_since(t0);
    out.line(rec.dump());
  }
  return kExitOk;
}

int cmd_ground_state(const CliOptions& opts) {
  RunContext ctx = make_context(opts);
  const auto sets = sets_from(ctx.cfg);
  const json gs = ctx.cfg.value("ground_state", json::object());

  liftlab::SweepConfig sweep;
  sweep.seed = ctx.seed;
  sweep.instances = gs.value("instances", 4);
  sweep.s = ctx.cfg.value("s", 1.0);
  sweep.zero_external_field = opts.zero_external_field || gs.value("zero_external_field", true);
  if (ctx.cfg.contains("schedule")) {
    const auto schedule = schedule_from(ctx.cfg);
    sweep.p0q0 = schedule.p_vec[0] * schedule.q_vec[0];
  }
  const std::string target = gs.value("target", "sphere_pos");
  if (target == "sphere") {
    sweep.target = liftlab::SweepTarget::kSphere;
  } else if (target == "sphere_pos") {
    sweep.target = liftlab::SweepTarget::kSpherePos;
  } else if (target == "hypercube_y") {
    sweep.target = liftlab::SweepTarget::kHypercubeY;
  } else {
    throw liftlab::Error(liftlab::ErrorCode::kConfigError,
                         "unknown ground_state.target '" + target + "'");
  }
  const auto betas = grid_from(ctx.cfg, "beta", "beta_grid");

  const auto rows = liftlab::beta_sweep_ground_state(sets, betas, sweep);
  RecordWriter out(opts.out_path.empty() ? ctx.cfg.value("out", "") : opts.out_path);
  std::istringstream csv(liftlab::ground_state_csv(rows));
  std::string line;
  while (std::getline(csv, line)) out.line(line);
  return kExitOk;
}

int cmd_gibbs_average(const CliOptions& opts) {
  RunContext ctx = make_context(opts);
  const auto schedule = schedule_from(ctx.cfg);
  const auto sets = sets_from(ctx.cfg);
  const auto est_cfg = estimator_from(ctx.cfg, ctx.seed);
  const auto t_grid = grid_from(ctx.cfg, "t", "t_grid");
  const auto beta_grid = grid_from(ctx.cfg, "beta", "beta_grid");
  const double s = ctx.cfg.at("s").get<double>();

  const json g = ctx.cfg.value("gibbs", json::object());
  const std::string kind_name = g.value("kind", "bracket");
  const int k1 = g.value("k1", 1);
  liftlab::ObservableKind kind;
  if (kind_name == "xy2") {
    kind = liftlab::ObservableKind::xy2();
  } else if (kind_name == "xy2_cross") {
    kind = liftlab::ObservableKind::xy2_cross(g.value("q_ref", schedule.q_vec[0]));
  } else if (kind_name == "bracket") {
    kind = liftlab::ObservableKind::bracket(
        k1, g.value("p_ref", schedule.p_vec[static_cast<std::size_t>(k1 - 1)]),
        g.value("q_ref", schedule.q_vec[static_cast<std::size_t>(k1 - 1)]));
  } else if (kind_name == "const_one") {
    kind = liftlab::ObservableKind::const_one(k1);
  } else {
    throw liftlab::Error(liftlab::ErrorCode::kConfigError,
                         "unknown gibbs.kind '" + kind_name + "'");
  }

  RecordWriter out(opts.out_path.empty() ? ctx.cfg.value("out", "") : opts.out_path);
  for (double t : t_grid) {
    for (double beta : beta_grid) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto est =
          liftlab::gibbs_average(kind, k1, schedule, sets, beta, s, t, est_cfg, ctx.threads);
      json rec;
      rec["kind"] = kind_name;
      rec["k1"] = k1;
      rec["t"] = t;
      rec["beta"] = beta;
      rec["value"] = est.value;
      rec["std_error"] = est.std_error;
      rec["n_outer"] = est.n_outer;
      attach_meta(rec, ctx);
      rec["wall_ms"] = wall_since(t0);
      out.line(rec.dump());
    }
  }
  return kExitOk;
}

int exit_code_for(const liftlab::Error& e) {
  switch (e.code()) {
    case liftlab::ErrorCode::kNonfiniteInput:
      return kExitNumeric;
    default:
      return kExitConfig;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"liftlab: fully lifted interpolating free energies of bilinearly indexed "
               "Gaussian processes"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  CliOptions opts;
  app.add_option("--config", opts.config_path, "JSON run configuration file");
  app.add_option("--seed", opts.seed, "master seed (overrides config and LIFTLAB_SEED)");
  app.add_option("--threads", opts.threads, "worker count (default: hardware parallelism)");
  app.add_option("--out", opts.out_path, "output path ('-' or empty: stdout)");
  app.add_flag("--zero-external-field", opts.zero_external_field,
               "ground-state diagnostic: drop the u4 field");
  app.add_flag("--corrupt-phi-sign", opts.corrupt_phi_sign)->group("");
  app.add_flag("--corrupt-phi02-sign", opts.corrupt_phi02_sign)->group("");
  app.allow_extras();

  auto* c_psi = app.add_subcommand("estimate-psi", "estimate psi over a (t, beta) grid");
  auto* c_verify =
      app.add_subcommand("verify-derivative", "closed-form dpsi/dt against the FD oracle");
  auto* c_cmp = app.add_subcommand("compare-endpoints", "psi at t=0 and t=1");
  auto* c_gs = app.add_subcommand("ground-state", "beta sweep against enumeration oracles");
  auto* c_gibbs = app.add_subcommand("gibbs-average", "reweighted Gibbs averages");
  for (auto* sc : {c_psi, c_verify, c_cmp, c_gs, c_gibbs}) {
    sc->allow_extras();
    sc->fallthrough();
  }

  CLI11_PARSE(app, argc, argv);
  opts.overrides = app.remaining();
  for (auto* sc : {c_psi, c_verify, c_cmp, c_gs, c_gibbs}) {
    if (sc->parsed()) {
      for (const auto& extra : sc->remaining()) opts.overrides.push_back(extra);
    }
  }

  try {
    if (c_psi->parsed()) return cmd_estimate_psi(opts);
    if (c_verify->parsed()) return cmd_verify_derivative(opts);
    if (c_cmp->parsed()) return cmd_compare_endpoints(opts);
    if (c_gs->parsed()) return cmd_ground_state(opts);
    if (c_gibbs->parsed()) return cmd_gibbs_average(opts);
  } catch (const liftlab::Error& e) {
    std::fprintf(stderr, "liftlab: %s\n", e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "liftlab: %s\n", e.what());
    return kExitNumeric;
  }
  return kExitConfig;
}
