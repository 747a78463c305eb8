#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "byzsim/harness.hpp"

namespace byzsim {

CompressorKind make_compressor(const std::string& name, std::size_t k) {
  if (name == "identity") return Identity{};
  if (name == "randk") return RandK{k};
  if (name == "topk") return TopK{k};
  if (name == "natural") return Natural{};
  throw ArgumentError("unknown compressor '" + name + "'");
}

AggregatorKind make_aggregator(const std::string& name, std::size_t bucket_s, std::size_t n_byz,
                               std::size_t n) {
  if (bucket_s < 1) throw ArgumentError("bucket size must be >= 1");
  AggregatorKind inner;
  if (name == "mean") {
    inner = MeanAgg{};
  } else if (name == "cm") {
    inner = CoordinateMedian{};
  } else if (name == "gm") {
    inner = GeometricMedian{};
  } else if (name == "krum") {
    // After bucketing at most n_byz buckets can be contaminated.
    const std::size_t inputs = (n + bucket_s - 1) / bucket_s;
    const std::size_t f = std::min(n_byz, inputs);
    if (inputs < f + 3) {
      throw ArgumentError("krum needs at least num_byz + 3 inputs (" + std::to_string(inputs) +
                          " inputs, " + std::to_string(f) + " Byzantine)");
    }
    inner = Krum{f};
  } else {
    throw ArgumentError("unknown aggregator '" + name + "'");
  }
  if (bucket_s == 1) return inner;
  return bucketed(std::move(inner), bucket_s);
}

namespace {

Vector normal_vector(RngStream rng, std::size_t d) {
  Vector v(d);
  for (double& x : v) x = rng.normal();
  return v;
}

std::size_t round_at_least_one(double v) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(v)));
}

// Average of the honest objectives with duplicates (shared shards) merged, so
// metric evaluation costs one pass per distinct shard.
class GoodAverage {
 public:
  explicit GoodAverage(std::span<const LocalObjective> good) {
    std::map<std::tuple<const void*, int, double>, std::size_t> seen;
    const double w = 1.0 / static_cast<double>(good.size());
    for (const auto& obj : good) {
      if (const auto* lo = std::get_if<LogisticObjective>(&obj)) {
        const auto key = std::make_tuple(static_cast<const void*>(lo->shard.get()),
                                         static_cast<int>(lo->reg.kind), lo->reg.lambda);
        if (auto it = seen.find(key); it != seen.end()) {
          terms_[it->second].second += w;
          continue;
        }
        seen.emplace(key, terms_.size());
      }
      terms_.emplace_back(&obj, w);
    }
  }

  double loss(std::span<const double> x) const {
    double f = 0.0;
    for (const auto& [obj, w] : terms_) f += w * byzsim::loss(*obj, x);
    return f;
  }

  Vector grad(std::span<const double> x) const {
    Vector g(x.size(), 0.0);
    for (const auto& [obj, w] : terms_) axpy(w, byzsim::grad(*obj, x), g);
    return g;
  }

 private:
  std::vector<std::pair<const LocalObjective*, double>> terms_;
};

}  // namespace

ResolvedExperiment resolve(const ExperimentConfig& cfg) {
  if (cfg.n < 1) throw ArgumentError("n must be >= 1");
  if (2 * cfg.n_byz >= cfg.n) throw ArgumentError("n_byz must be below n/2");
  if (cfg.metrics_every < 1) throw ArgumentError("metrics_every must be >= 1");
  const std::size_t n_good = cfg.n - cfg.n_byz;
  const AttackKind attack = effective_attack(cfg);

  ResolvedExperiment r;
  r.fed.num_good = n_good;
  r.fed.attack = attack;

  if (cfg.source == DataSource::Quadratic) {
    r.d = cfg.dim.value_or(100);
    if (r.d < 1) throw ArgumentError("quadratic dimension must be >= 1");
    RngStream rng(cfg.data_seed, 0x9a7d);
    const Vector zeta1 = normal_vector(rng.substream(1), r.d);
    const Vector zeta2 = normal_vector(rng.substream(2), r.d);
    // Two equal good groups (the first takes the odd one out); Byzantine
    // workers run the first group's objective.
    const std::size_t group1 = (n_good + 1) / 2;
    for (std::size_t i = 0; i < n_good; ++i) {
      r.fed.objectives.emplace_back(QuadraticObjective{i < group1 ? zeta1 : zeta2});
    }
    for (std::size_t i = 0; i < cfg.n_byz; ++i) r.fed.objectives.emplace_back(QuadraticObjective{zeta1});
    // f = 0.5||x||^2 + <mean shift, x> is minimised at -mean shift.
    Vector shift_mean(r.d, 0.0);
    for (std::size_t i = 0; i < n_good; ++i) {
      axpy(1.0 / static_cast<double>(n_good), std::get<QuadraticObjective>(r.fed.objectives[i]).shift,
           shift_mean);
    }
    r.f_star = -0.5 * norm_sq(shift_mean);
  } else {
    std::shared_ptr<const LabeledDataset> ds;
    if (cfg.source == DataSource::LibSVM) {
      if (cfg.data_path.empty()) throw ArgumentError("data_path is required for LibSVM data");
      ds = std::make_shared<const LabeledDataset>(load_libsvm(cfg.data_path, cfg.dim));
    } else {
      ds = std::make_shared<const LabeledDataset>(make_phishing_like(cfg.samples, cfg.data_seed));
    }
    r.d = ds->d;
    for (auto& shard : partition(ds, n_good, cfg.partition)) {
      r.fed.objectives.emplace_back(LogisticObjective{std::move(shard), cfg.reg});
    }
    // Byzantine workers hold the full dataset in both settings.
    auto byz_data = flips_labels(attack)
                        ? std::make_shared<const LabeledDataset>(ds->with_flipped_labels())
                        : ds;
    for (std::size_t i = 0; i < cfg.n_byz; ++i) {
      r.fed.objectives.emplace_back(LogisticObjective{byz_data, cfg.reg});
    }
  }

  r.m = num_samples(r.fed.objectives.front());
  for (const auto& obj : r.fed.good()) r.m = std::min(r.m, num_samples(obj));

  auto& hp = r.hp;
  hp.b = std::min(cfg.batch.value_or(round_at_least_one(cfg.batch_fraction * static_cast<double>(r.m))), r.m);
  if (hp.b < 1) throw ArgumentError("batch size must be >= 1");
  const std::size_t K = cfg.k.value_or(round_at_least_one(0.1 * static_cast<double>(r.d)));
  hp.uplink = make_compressor(cfg.compressor, K);
  hp.downlink = make_compressor(cfg.downlink, cfg.downlink_k.value_or(K));
  hp.T = cfg.rounds;
  hp.seed = cfg.seed;

  const double delta = static_cast<double>(cfg.n_byz) / static_cast<double>(cfg.n);
  const bool robust = cfg.aggregator != "mean";
  const std::size_t s = cfg.bucket_s.value_or(robust ? default_bucket_size(delta) : 1);
  hp.aggregator = make_aggregator(cfg.aggregator, s, cfg.n_byz, cfg.n);

  auto& in = r.stepsize_inputs;
  const bool unbiased = uses_unbiased_compression(cfg.method);
  in.omega = unbiased ? omega(hp.uplink, r.d) : 0.0;
  in.alpha_D = unbiased ? 1.0 : alpha(hp.uplink, r.d);
  in.alpha_P = cfg.method == Method::EF21BC ? alpha(hp.downlink, r.d) : 1.0;
  hp.p = cfg.p.value_or(default_p(cfg.method, in.omega, hp.b, r.m));
  hp.a = cfg.a.value_or(default_momentum(in.omega));
  if (cfg.method == Method::EF21 || cfg.method == Method::EF21BC) {
    hp.p = 1.0;
    hp.a = 1.0;
  }

  r.consts = estimate_constants(r.fed.good());
  in.consts = r.consts;
  in.c = cfg.agg_c.value_or(default_aggregation_constant(hp.aggregator));
  in.delta = delta;
  in.G = n_good;
  in.b = hp.b;
  in.m = r.m;
  in.p = hp.p;
  in.a = hp.a;
  in.B = cfg.heterogeneity_B;

  auto theory = [&] {
    if (cfg.pl_stepsize && cfg.method != Method::Marina) return stepsize_pl(cfg.method, in);
    return stepsize_theory(cfg.method, in);
  };
  if (cfg.stepsize_mode == StepsizeMode::Theoretical) {
    r.gamma_theory = theory();
    hp.gamma = cfg.gamma_mult * r.gamma_theory;
  } else {
    try {
      r.gamma_theory = theory();
    } catch (const DomainError&) {
      r.gamma_theory = 0.0;
    }
    hp.gamma = cfg.gamma_mult * cfg.gamma;
  }
  validate(hp, cfg.method);

  if (cfg.f_star) {
    r.f_star = cfg.f_star;
  } else if (!r.f_star && cfg.estimate_f_star) {
    const auto est = estimate_f_star(r.fed.good(), cfg.f_star_tol);
    r.f_star = est.value;
  }
  return r;
}

RunResult run(const ExperimentConfig& cfg) { return run(cfg, resolve(cfg)); }

RunResult run(const ExperimentConfig& cfg, const ResolvedExperiment& r) {
  const auto start = std::chrono::steady_clock::now();
  RunResult res;
  res.gamma = r.hp.gamma;
  res.gamma_theory = r.gamma_theory;
  res.config_echo = to_config_text(cfg);

  const GoodAverage metric(r.fed.good());
  auto record = [&](std::uint64_t t, std::uint64_t bits, const Vector& x) {
    MetricRow row;
    row.t = t;
    row.bits = bits;
    row.f = metric.loss(x);
    row.grad_norm_sq = norm_sq(metric.grad(x));
    if (r.f_star) row.gap = row.f - *r.f_star;
    if (!std::isfinite(row.f) || !std::isfinite(row.grad_norm_sq)) return false;
    res.rows.push_back(row);
    return true;
  };

  const Vector x0(r.d, 0.0);
  AlgorithmState state = initialize(cfg.method, r.fed, x0, r.hp);
  record(0, 0, state.server.x);
  std::uint64_t bits = 0;
  const std::size_t T = cfg.rounds;
  for (std::size_t t = 1; t <= T; ++t) {
    StepResult next = step(cfg.method, state, r.fed, r.hp);
    state = std::move(next.state);
    bits += next.stats.total_bits();
    if (!all_finite(state.server.x)) {
      res.diverged = true;
      break;
    }
    if (t % cfg.metrics_every == 0 || t == T) {
      if (!record(t, bits, state.server.x)) {
        res.diverged = true;
        break;
      }
    }
  }
  res.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

void emit_csv(const RunResult& result, std::ostream& out) {
  out << "t,bits,f,grad_norm_sq,gap\n";
  char buf[64];
  for (const auto& row : result.rows) {
    out << row.t << ',' << row.bits << ',';
    std::snprintf(buf, sizeof buf, "%.17g", row.f);
    out << buf << ',';
    std::snprintf(buf, sizeof buf, "%.17g", row.grad_norm_sq);
    out << buf << ',';
    if (row.gap) {
      std::snprintf(buf, sizeof buf, "%.17g", *row.gap);
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed to write CSV");
}

void emit_csv(const RunResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  emit_csv(result, out);
  out.flush();
  if (!out) throw std::runtime_error("failed to write '" + path + "'");
}

std::vector<MetricRow> parse_csv(std::istream& in) {
  std::vector<MetricRow> rows;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) return rows;
  ++line_no;
  if (line != "t,bits,f,grad_norm_sq,gap") throw ParseError("unexpected CSV header", line_no);
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (fields.size() != 5) throw ParseError("expected 5 fields", line_no);
    try {
      MetricRow row;
      row.t = std::stoull(fields[0]);
      row.bits = std::stoull(fields[1]);
      row.f = std::stod(fields[2]);
      row.grad_norm_sq = std::stod(fields[3]);
      if (!fields[4].empty()) row.gap = std::stod(fields[4]);
      rows.push_back(row);
    } catch (const std::logic_error&) {
      throw ParseError("malformed number", line_no);
    }
  }
  return rows;
}

std::vector<SweepEntry> sweep(const ExperimentConfig& cfg, const std::vector<double>& multipliers) {
  ResolvedExperiment r = resolve(cfg);
  const double base = cfg.stepsize_mode == StepsizeMode::Theoretical ? r.gamma_theory : cfg.gamma;
  std::vector<SweepEntry> out;
  for (double mult : multipliers) {
    if (!(mult > 0.0)) throw ArgumentError("sweep multipliers must be positive");
    ExperimentConfig c = cfg;
    c.gamma_mult = mult;
    r.hp.gamma = mult * base;
    out.push_back({mult, run(c, r)});
  }
  return out;
}

}  // namespace byzsim
