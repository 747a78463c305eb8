// Command-line front end: run / sweep / certify-aggregator / check-compressor / constants.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "byzsim/harness.hpp"

using namespace byzsim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitDiverged = 2;

// Experiment flags shared by run, sweep and constants. Values are collected as
// text and applied on top of the config file through apply_option.
struct ExperimentFlags {
  std::string config_path;
  std::map<std::string, std::string> overrides;
  std::vector<std::string> sets;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "Config file (key = value lines)");
    add(app, "--seed", "seed", "Run seed");
    add(app, "--algo", "algo", "marina | marina2 | dasha | ef21 | ef21bc");
    add(app, "--attack", "attack", "none | bf | lf | ipm | alie");
    add(app, "--attack-z", "attack_z", "Attack strength z (ipm, alie)");
    add(app, "--agg", "agg", "mean | cm | gm | krum");
    add(app, "--bucket-s", "bucket_s", "Bucket size (1 disables bucketing)");
    add(app, "--compressor", "compressor", "identity | randk | topk | natural");
    add(app, "--k", "k", "Sparsification level K");
    add(app, "--gamma-mult", "gamma_mult", "Multiplier on the theoretical stepsize");
    add(app, "--rounds", "rounds", "Number of rounds T");
    app->add_option("--set", sets, "Any config option as key=value (repeatable)");
  }

  ExperimentConfig build() const {
    ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    for (const auto& [key, value] : overrides) apply_option(cfg, key, value);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ArgumentError("--set expects key=value, got '" + kv + "'");
      apply_option(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
  }

 private:
  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    app->add_option_function<std::string>(
        flag, [this, key](const std::string& v) { overrides[key] = v; }, help);
  }
};

int cmd_run(const ExperimentFlags& flags, const std::string& out) {
  const ExperimentConfig cfg = flags.build();
  const RunResult res = run(cfg);
  if (out.empty() || out == "-") {
    emit_csv(res, std::cout);
  } else {
    emit_csv(res, out);
  }
  std::fprintf(stderr, "gamma = %.6g (theory %.6g), %zu rows, %.2f s%s\n", res.gamma,
               res.gamma_theory, res.rows.size(), res.wall_seconds,
               res.diverged ? ", DIVERGED" : "");
  return res.diverged ? kExitDiverged : kExitOk;
}

std::vector<double> parse_multipliers(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw ArgumentError("bad multiplier '" + tok + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ArgumentError("no multipliers given");
  return out;
}

int cmd_sweep(const ExperimentFlags& flags, const std::string& mults, const std::string& prefix) {
  const ExperimentConfig cfg = flags.build();
  const auto entries = sweep(cfg, parse_multipliers(mults));
  bool any_diverged = false;
  std::printf("multiplier,gamma,final_grad_norm_sq,min_grad_norm_sq,diverged\n");
  for (const auto& e : entries) {
    double min_g = INFINITY;
    for (const auto& row : e.result.rows) min_g = std::min(min_g, row.grad_norm_sq);
    const double last = e.result.rows.empty() ? NAN : e.result.rows.back().grad_norm_sq;
    std::printf("%g,%.10g,%.10g,%.10g,%d\n", e.multiplier, e.result.gamma, last, min_g,
                e.result.diverged ? 1 : 0);
    any_diverged = any_diverged || e.result.diverged;
    if (!prefix.empty()) {
      std::ostringstream path;
      path << prefix << "_x" << e.multiplier << ".csv";
      emit_csv(e.result, path.str());
    }
  }
  return any_diverged ? kExitDiverged : kExitOk;
}

struct CertifyArgs {
  std::string agg = "cm";
  std::size_t bucket_s = 0;  // 0: default for delta
  std::size_t n = 16;
  std::size_t n_byz = 3;
  std::size_t dim = 10;
  std::size_t trials = 200;
  double byz_shift = 10.0;
  std::uint64_t seed = 0;
};

int cmd_certify(const CertifyArgs& a) {
  if (2 * a.n_byz >= a.n) throw ArgumentError("n_byz must be below n/2");
  const double delta = static_cast<double>(a.n_byz) / static_cast<double>(a.n);
  const std::size_t s = a.bucket_s ? a.bucket_s : (a.agg == "mean" ? 1 : default_bucket_size(delta));
  const AggregatorKind kind = make_aggregator(a.agg, s, a.n_byz, a.n);
  const std::size_t d = a.dim;
  // Good vectors are standard normal; all Byzantine vectors sit at byz_shift * (1, ..., 1).
  const GoodSampler sampler = [d](RngStream& rng) {
    Vector v(d);
    for (double& x : v) x = rng.normal();
    return v;
  };
  const std::vector<Vector> byz(a.n_byz, Vector(d, a.byz_shift));
  const auto cert = robustness_certificate(kind, sampler, a.n - a.n_byz, byz, delta, a.trials,
                                           RngStream(a.seed, 0));
  std::printf("aggregator: %s\n", describe(kind).c_str());
  std::printf("delta: %.6g\n", delta);
  std::printf("lhs: %.10g\n", cert.lhs);
  std::printf("sigma_sq: %.10g\n", cert.sigma_sq);
  std::printf("c_hat: %.10g\n", cert.c_hat);
  return kExitOk;
}

struct CompressorArgs {
  std::string name = "randk";
  std::size_t k = 1;
  std::size_t dim = 20;
  std::size_t trials = 100000;
  std::uint64_t seed = 0;
};

int cmd_check_compressor(const CompressorArgs& a) {
  const CompressorKind kind = make_compressor(a.name, a.k);
  const std::size_t d = a.dim;
  RngStream rng(a.seed, 0);
  Vector x(d);
  for (double& v : x) v = rng.normal();
  const double xx = norm_sq(x);
  std::printf("compressor: %s, d = %zu\n", describe(kind).c_str(), d);
  std::printf("bits per message: %llu\n",
              static_cast<unsigned long long>(message_bits(kind, d)));
  if (is_unbiased(kind)) {
    Vector sum(d, 0.0);
    double err = 0.0;
    for (std::size_t t = 0; t < a.trials; ++t) {
      const Vector q = decompress(compress(kind, x, rng));
      axpy(1.0, q, sum);
      err += dist_sq(q, x);
    }
    const double n = static_cast<double>(a.trials);
    double bias = 0.0;
    for (std::size_t j = 0; j < d; ++j) bias = std::max(bias, std::abs(sum[j] / n - x[j]));
    std::printf("unbiased: omega = %.10g\n", omega(kind, d));
    std::printf("max |E[Q(x)] - x|: %.6g\n", bias);
    std::printf("E||Q(x) - x||^2 / ||x||^2: %.6g\n", err / n / xx);
  }
  if (is_contractive(kind)) {
    double worst = 0.0;
    for (std::size_t t = 0; t < std::min<std::size_t>(a.trials, 1000); ++t) {
      const Vector q = decompress(compress(kind, x, rng));
      worst = std::max(worst, dist_sq(q, x) / xx);
      for (double& v : x) v = rng.normal();
    }
    std::printf("contractive: alpha = %.10g\n", alpha(kind, d));
    std::printf("max ||C(x) - x||^2 / ||x||^2: %.6g (bound %.6g)\n", worst, 1.0 - alpha(kind, d));
  }
  return kExitOk;
}

int cmd_constants(const ExperimentFlags& flags) {
  const ExperimentConfig base = flags.build();
  bool printed_constants = false;
  for (Method m : {Method::Marina, Method::Marina2, Method::DashaPage, Method::EF21, Method::EF21BC}) {
    ExperimentConfig cfg = base;
    cfg.method = m;
    cfg.stepsize_mode = StepsizeMode::Theoretical;
    cfg.gamma_mult = 1.0;
    const bool unbiased = uses_unbiased_compression(m);
    const CompressorKind probe = make_compressor(cfg.compressor, cfg.k.value_or(1));
    if (unbiased && !is_unbiased(probe)) cfg.compressor = "randk";
    if (!unbiased && !is_contractive(probe)) cfg.compressor = "topk";
    try {
      const ResolvedExperiment r = resolve(cfg);
      if (!printed_constants) {
        std::printf("d = %zu, m = %zu, b = %zu, G = %zu, delta = %.6g, c = %.6g\n", r.d, r.m, r.hp.b,
                    r.stepsize_inputs.G, r.stepsize_inputs.delta, r.stepsize_inputs.c);
        std::printf("L = %.10g\nL_pm = %.10g\ncalL_pm = %.10g\nmu = %.10g\n", r.consts.L,
                    r.consts.L_pm, r.consts.calL_pm, r.consts.mu);
        printed_constants = true;
      }
      std::printf("gamma_theory[%s] = %.10g (%s, p = %.6g)\n", to_string(m).c_str(), r.gamma_theory,
                  describe(r.hp.uplink).c_str(), r.hp.p);
    } catch (const DomainError& e) {
      std::printf("gamma_theory[%s] = n/a (%s)\n", to_string(m).c_str(), e.what());
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Byzantine-robust compressed distributed optimization simulator"};
  app.require_subcommand(1);

  ExperimentFlags run_flags, sweep_flags, const_flags;
  std::string run_out;
  auto* run_cmd = app.add_subcommand("run", "Run one experiment and write its CSV");
  run_flags.attach(run_cmd);
  run_cmd->add_option("--out", run_out, "CSV path (default: stdout)");

  std::string sweep_prefix;
  std::string mults = "1,2,4,8";
  auto* sweep_cmd = app.add_subcommand("sweep", "Run one experiment per stepsize multiplier");
  sweep_flags.attach(sweep_cmd);
  sweep_cmd->add_option("--multipliers", mults, "Comma-separated multipliers");
  sweep_cmd->add_option("--out", sweep_prefix, "CSV path prefix, one file per multiplier");

  CertifyArgs cert;
  auto* cert_cmd = app.add_subcommand("certify-aggregator", "Empirical robustness constant of an aggregator");
  cert_cmd->add_option("--agg", cert.agg, "mean | cm | gm | krum");
  cert_cmd->add_option("--bucket-s", cert.bucket_s, "Bucket size (0: default for delta)");
  cert_cmd->add_option("--n", cert.n, "Total inputs");
  cert_cmd->add_option("--n-byz", cert.n_byz, "Byzantine inputs");
  cert_cmd->add_option("--dim", cert.dim, "Dimension");
  cert_cmd->add_option("--trials", cert.trials, "Monte-Carlo trials");
  cert_cmd->add_option("--byz-shift", cert.byz_shift, "Byzantine inputs sit at shift * ones");
  cert_cmd->add_option("--seed", cert.seed, "Seed");

  CompressorArgs comp;
  auto* comp_cmd = app.add_subcommand("check-compressor", "Empirical unbiasedness / contraction report");
  comp_cmd->add_option("--compressor", comp.name, "identity | randk | topk | natural");
  comp_cmd->add_option("--k", comp.k, "Sparsification level K");
  comp_cmd->add_option("--dim", comp.dim, "Dimension");
  comp_cmd->add_option("--trials", comp.trials, "Monte-Carlo draws");
  comp_cmd->add_option("--seed", comp.seed, "Seed");

  auto* const_cmd = app.add_subcommand("constants", "Print smoothness constants and theoretical stepsizes");
  const_flags.attach(const_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitError;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(run_flags, run_out);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_flags, mults, sweep_prefix);
    if (cert_cmd->parsed()) return cmd_certify(cert);
    if (comp_cmd->parsed()) return cmd_check_compressor(comp);
    if (const_cmd->parsed()) return cmd_constants(const_flags);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  }
  return kExitError;
}
