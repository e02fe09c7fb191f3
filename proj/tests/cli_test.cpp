// End-to-end checks of the liftlab CLI: exit codes, record determinism and
// config overrides. Drives the real binary through std::system.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

namespace {

int g_failures = 0;

#define CHECK_MSG(cond, msg)                                               \
  do {                                                                     \
    if (!(cond)) {                                                         \
      std::cerr << "[FAIL] " << __FILE__ << ":" << __LINE__ << " " << msg  \
                << "\n";                                                   \
      ++g_failures;                                                        \
    }                                                                      \
  } while (0)

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

RunResult run_cli(const std::string& args) {
  const std::string out_path = "cli_test_stdout.tmp";
  const std::string err_path = "cli_test_stderr.tmp";
  const std::string cmd =
      std::string(LIFTLAB_CLI_PATH) + " " + args + " >" + out_path + " 2>" + err_path;
  const int status = std::system(cmd.c_str());
  RunResult res;
  res.exit_code = WEXITSTATUS(status);
  auto slurp = [](const std::string& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  res.out = slurp(out_path);
  res.err = slurp(err_path);
  std::remove(out_path.c_str());
  std::remove(err_path.c_str());
  return res;
}

std::string strip_timing(const std::string& text) {
  static const std::regex wall("\"wall_ms[^\"]*\":[0-9.eE+-]+,?");
  static const std::regex timings("\"timings\":\\{[^}]*\\},?");
  return std::regex_replace(std::regex_replace(text, timings, ""), wall, "");
}

void write_config(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  out << body;
}

const char* kBaseConfig = R"({
  "schedule": {"p": [1, 0.6, 0], "q": [1, 0.7, 0], "m": [1, 0.5, 0]},
  "sets": {"generator": {"x": {"kind": "sphere", "dim": 3, "count": 3, "seed": 5},
                          "y": {"kind": "sphere", "dim": 3, "count": 3, "seed": 6}}},
  "beta": 1.0, "s": -1.0, "t_grid": [0.0, 1.0],
  "estimator": {"samples_per_level": [64, 32], "fd_step": 0.02, "seed": 9}
})";

}  // namespace

int main() {
  write_config("cli_cfg.json", kBaseConfig);

  {
    // Rerun determinism, byte-identical modulo timing fields; grid {0,1}
    // emits exactly two records.
    const auto a = run_cli("estimate-psi --config cli_cfg.json");
    const auto b = run_cli("estimate-psi --config cli_cfg.json");
    CHECK_MSG(a.exit_code == 0, "estimate-psi should succeed, stderr: " << a.err);
    CHECK_MSG(strip_timing(a.out) == strip_timing(b.out), "reruns must match modulo wall_ms");
    int lines = 0;
    std::istringstream ss(a.out);
    std::string line;
    while (std::getline(ss, line))
      if (!line.empty()) ++lines;
    CHECK_MSG(lines == 2, "t grid {0,1} must emit exactly two records, got " << lines);
    CHECK_MSG(a.out.find("\"config_hash\"") != std::string::npos, "records embed config hash");
    CHECK_MSG(a.out.find("\"version\"") != std::string::npos, "records embed version");
  }

  {
    // Missing sets file: exit 2 with the path in the message.
    write_config("cli_bad.json", R"({
      "schedule": {"p": [1, 0.6, 0], "q": [1, 0.7, 0], "m": [1, 0.5, 0]},
      "sets": {"file": "no_such_sets_file.txt"},
      "beta": 1.0, "s": -1.0, "t": 0.5,
      "estimator": {"samples_per_level": [8, 8], "seed": 0}
    })");
    const auto r = run_cli("estimate-psi --config cli_bad.json");
    CHECK_MSG(r.exit_code == 2, "missing sets file must exit 2, got " << r.exit_code);
    CHECK_MSG(r.err.find("no_such_sets_file.txt") != std::string::npos,
              "error message must name the path");
    std::remove("cli_bad.json");
  }

  {
    // Config file errors: malformed JSON and absent file.
    write_config("cli_broken.json", "{ not json");
    const auto r = run_cli("estimate-psi --config cli_broken.json");
    CHECK_MSG(r.exit_code == 2, "malformed config must exit 2");
    std::remove("cli_broken.json");
    const auto r2 = run_cli("estimate-psi --config cli_absent.json");
    CHECK_MSG(r2.exit_code == 2, "absent config must exit 2");
  }

  {
    // verify-derivative: endpoints in the grid are rejected with exit 2.
    const auto r = run_cli("verify-derivative --config cli_cfg.json");
    CHECK_MSG(r.exit_code == 2, "t grid with endpoints must exit 2, got " << r.exit_code);

    // Interior grid passes, report file written, exit 0.
    const auto ok = run_cli(
        "verify-derivative --config cli_cfg.json --t_grid=[0.5] "
        "--estimator.samples_per_level=[2048,64] --out cli_report.jsonl");
    CHECK_MSG(ok.exit_code == 0, "verification should pass, stderr: " << ok.err);
    std::ifstream rep("cli_report.jsonl");
    std::string line;
    CHECK_MSG(static_cast<bool>(std::getline(rep, line)), "report file must be written");
    CHECK_MSG(line.find("\"pass\":true") != std::string::npos, "report carries pass flag");

    // Corrupted coefficients: exit 1, report still written with FAIL rows.
    const auto bad = run_cli(
        "verify-derivative --config cli_cfg.json --t_grid=[0.5] "
        "--estimator.samples_per_level=[2048,64] --corrupt-phi-sign --out cli_report2.jsonl");
    CHECK_MSG(bad.exit_code == 1, "corrupted phi sign must exit 1, got " << bad.exit_code);
    std::ifstream rep2("cli_report2.jsonl");
    CHECK_MSG(static_cast<bool>(std::getline(rep2, line)), "FAIL report must still be written");
    CHECK_MSG(line.find("\"pass\":false") != std::string::npos, "report carries FAIL rows");
    std::remove("cli_report.jsonl");
    std::remove("cli_report2.jsonl");
  }

  {
    // compare-endpoints: independent seeds, complete records, determinism.
    const auto a = run_cli("compare-endpoints --config cli_cfg.json");
    const auto b = run_cli("compare-endpoints --config cli_cfg.json");
    CHECK_MSG(a.exit_code == 0, "compare-endpoints should succeed");
    CHECK_MSG(strip_timing(a.out) == strip_timing(b.out), "compare-endpoints must be rerunnable");
    CHECK_MSG(a.out.find("\"psi_t0\"") != std::string::npos, "record has psi_t0");
    CHECK_MSG(a.out.find("\"psi_t1\"") != std::string::npos, "record has psi_t1");
    CHECK_MSG(a.out.find("\"combined_std_error\"") != std::string::npos,
              "record has combined error");
  }

  {
    // ground-state: CSV with the documented columns; deterministic.
    write_config("cli_gs.json", R"({
      "sets": {"generator": {"x": {"kind": "hypercube", "n": 4},
                              "y": {"kind": "sphere", "dim": 3, "count": 32,
                                    "positive_orthant": true, "seed": 2}}},
      "s": 1.0, "beta_grid": [2.0, 10.0],
      "ground_state": {"instances": 2, "target": "sphere_pos"}
    })");
    const auto a = run_cli("ground-state --config cli_gs.json --seed 4");
    const auto b = run_cli("ground-state --config cli_gs.json --seed 4");
    CHECK_MSG(a.exit_code == 0, "ground-state should succeed, stderr: " << a.err);
    CHECK_MSG(a.out == b.out, "ground-state output must be deterministic");
    CHECK_MSG(a.out.rfind("model,n,m_dim,alpha,beta,estimate,target,gap,seed\n", 0) == 0,
              "CSV header mismatch");
    std::remove("cli_gs.json");
  }

  {
    // gibbs-average subcommand and determinism.
    const auto a = run_cli(
        "gibbs-average --config cli_cfg.json --t_grid=[0.5] --gibbs.kind=bracket --gibbs.k1=1");
    const auto b = run_cli(
        "gibbs-average --config cli_cfg.json --t_grid=[0.5] --gibbs.kind=bracket --gibbs.k1=1");
    CHECK_MSG(a.exit_code == 0, "gibbs-average should succeed, stderr: " << a.err);
    CHECK_MSG(strip_timing(a.out) == strip_timing(b.out), "gibbs-average must be rerunnable");
    CHECK_MSG(a.out.find("\"value\"") != std::string::npos, "record has value");
  }

  {
    // Seed resolution: --seed wins; LIFTLAB_SEED is the fallback.
    const auto flagged = run_cli("estimate-psi --config cli_cfg.json --t_grid=[0.5] --seed 777");
    CHECK_MSG(flagged.out.find("\"seed\":777") != std::string::npos, "--seed overrides config");
    setenv("LIFTLAB_SEED", "31337", 1);
    write_config("cli_noseed.json", R"({
      "schedule": {"p": [1, 0.6, 0], "q": [1, 0.7, 0], "m": [1, 0.5, 0]},
      "sets": {"generator": {"x": {"kind": "sphere", "dim": 2, "count": 2, "seed": 1},
                              "y": {"kind": "sphere", "dim": 2, "count": 2, "seed": 2}}},
      "beta": 1.0, "s": 1.0, "t": 0.5,
      "estimator": {"samples_per_level": [16, 8]}
    })");
    const auto env_seeded = run_cli("estimate-psi --config cli_noseed.json");
    CHECK_MSG(env_seeded.out.find("\"seed\":31337") != std::string::npos,
              "LIFTLAB_SEED must be honored, got: " << env_seeded.out);
    unsetenv("LIFTLAB_SEED");
    std::remove("cli_noseed.json");
  }

  {
    // Generic --key=value override changes the effective config.
    const auto r = run_cli("estimate-psi --config cli_cfg.json --t_grid=[0.5] --beta=2.5");
    CHECK_MSG(r.out.find("\"beta\":2.5") != std::string::npos, "--beta=2.5 must override");
  }

  {
    // Numeric failure (exponent overflow) exits 3.
    const auto r = run_cli("estimate-psi --config cli_cfg.json --t_grid=[0.5] --beta=1e308");
    CHECK_MSG(r.exit_code == 3, "overflowing beta must exit 3, got " << r.exit_code);
  }

  std::remove("cli_cfg.json");
  if (g_failures == 0) {
    std::puts("cli_tests: all checks passed");
    return 0;
  }
  std::fprintf(stderr, "cli_tests: %d failures\n", g_failures);
  return 1;
}
