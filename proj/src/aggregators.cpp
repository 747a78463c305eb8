#include "byzsim/aggregators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace byzsim {

AggregatorKind bucketed(AggregatorKind inner, std::size_t s) {
  if (s < 1) throw ArgumentError("bucket size must be >= 1");
  return Bucketed{std::make_shared<const AggregatorKind>(std::move(inner)), s};
}

std::string describe(const AggregatorKind& kind) {
  struct V {
    std::string operator()(const MeanAgg&) const { return "mean"; }
    std::string operator()(const CoordinateMedian&) const { return "cm"; }
    std::string operator()(const GeometricMedian&) const { return "gm"; }
    std::string operator()(const Krum& k) const { return "krum(" + std::to_string(k.num_byz) + ")"; }
    std::string operator()(const Bucketed& b) const {
      return "bucketed(" + (b.inner ? describe(*b.inner) : std::string("?")) +
             ", s=" + std::to_string(b.s) + ")";
    }
  };
  return std::visit(V{}, kind);
}

std::size_t default_bucket_size(double delta, double delta_max) {
  if (delta <= 0.0) return 1;
  const auto s = static_cast<std::size_t>(std::floor(delta_max / delta));
  return std::max<std::size_t>(s, 1);
}

double default_aggregation_constant(const AggregatorKind& kind) {
  if (const auto* b = std::get_if<Bucketed>(&kind)) {
    return b->inner ? default_aggregation_constant(*b->inner) : 1.0;
  }
  if (std::holds_alternative<CoordinateMedian>(kind)) return 0.1;
  if (std::holds_alternative<GeometricMedian>(kind)) return 0.1;
  if (std::holds_alternative<Krum>(kind)) return 0.1;
  // Plain averaging is not robust; the value only matters when delta > 0.
  return 1.0;
}

namespace {

void check_inputs(std::span<const Vector> vectors, const char* what) {
  if (vectors.empty()) throw ArgumentError(std::string(what) + ": empty input");
  const auto d = vectors.front().size();
  for (const auto& v : vectors) require_same_dim(v.size(), d, what);
}

double median_inplace(std::vector<double>& col) {
  const std::size_t n = col.size();
  const auto mid = col.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(col.begin(), mid, col.end());
  if (n % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(col.begin(), mid);
  return lower + (upper - lower) / 2.0;
}

}  // namespace

Vector coordinate_median(std::span<const Vector> vectors) {
  check_inputs(vectors, "cm");
  const std::size_t d = vectors.front().size();
  Vector out(d);
  std::vector<double> col(vectors.size());
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < vectors.size(); ++i) col[i] = vectors[i][j];
    out[j] = median_inplace(col);
  }
  return out;
}

Vector geometric_median(std::span<const Vector> vectors, const GeometricMedian& params) {
  check_inputs(vectors, "gm");
  if (!(params.nu > 0.0)) throw ArgumentError("gm: smoothing nu must be positive");
  Vector z = mean_of(vectors);
  const std::size_t d = z.size();
  Vector next(d);
  const Vector& anchor = vectors.front();
  for (std::size_t it = 0; it < params.max_iters; ++it) {
    // Weighted mean written relative to the first input so unanimous inputs stay exact.
    std::fill(next.begin(), next.end(), 0.0);
    double wsum = 0.0;
    for (const auto& v : vectors) {
      const double w = 1.0 / std::max(params.nu, std::sqrt(dist_sq(z, v)));
      wsum += w;
      for (std::size_t j = 0; j < d; ++j) next[j] += w * (v[j] - anchor[j]);
    }
    for (std::size_t j = 0; j < d; ++j) next[j] = anchor[j] + next[j] / wsum;
    const double step = std::sqrt(dist_sq(next, z));
    z.swap(next);
    if (step < params.tol) break;
  }
  return z;
}

std::size_t krum_select(std::span<const Vector> vectors, std::size_t num_byz) {
  check_inputs(vectors, "krum");
  const std::size_t n = vectors.size();
  if (n < num_byz + 3) {
    throw ArgumentError("krum: need n - num_byz - 2 >= 1 (n=" + std::to_string(n) +
                        ", num_byz=" + std::to_string(num_byz) + ")");
  }
  const std::size_t neighbours = n - num_byz - 2;
  std::vector<double> dist(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      dist[i * n + j] = dist[j * n + i] = dist_sq(vectors[i], vectors[j]);
    }
  }
  std::size_t best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  std::vector<double> row;
  for (std::size_t i = 0; i < n; ++i) {
    row.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) row.push_back(dist[i * n + j]);
    }
    std::partial_sort(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(neighbours), row.end());
    const double score = std::accumulate(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(neighbours), 0.0);
    if (score < best_score) {  // strict: ties keep the lower index
      best_score = score;
      best = i;
    }
  }
  return best;
}

Vector aggregate(const AggregatorKind& kind, std::span<const Vector> vectors, RngStream& rng) {
  check_inputs(vectors, "aggregate");
  if (std::holds_alternative<MeanAgg>(kind)) return mean_of(vectors);
  if (std::holds_alternative<CoordinateMedian>(kind)) return coordinate_median(vectors);
  if (const auto* gm = std::get_if<GeometricMedian>(&kind)) return geometric_median(vectors, *gm);
  if (const auto* kr = std::get_if<Krum>(&kind)) return vectors[krum_select(vectors, kr->num_byz)];

  const auto& b = std::get<Bucketed>(kind);
  if (!b.inner) throw ArgumentError("bucketed aggregator without inner rule");
  if (b.s < 1) throw ArgumentError("bucket size must be >= 1");
  const std::size_t n = vectors.size();
  const auto perm = random_permutation(rng, n);
  const std::size_t num_buckets = (n + b.s - 1) / b.s;
  std::vector<Vector> buckets;
  buckets.reserve(num_buckets);
  std::vector<Vector> members;
  for (std::size_t k = 0; k < num_buckets; ++k) {
    const std::size_t lo = k * b.s;
    const std::size_t hi = std::min(lo + b.s, n);
    // Average over the actual bucket population (the last one may be short).
    members.clear();
    for (std::size_t t = lo; t < hi; ++t) members.push_back(vectors[perm[t]]);
    buckets.push_back(mean_of(members));
  }
  return aggregate(*b.inner, buckets, rng);
}

RobustnessCertificate robustness_certificate(const AggregatorKind& kind,
                                             const GoodSampler& good_sampler,
                                             std::size_t num_good,
                                             std::span<const Vector> byz_vectors, double delta,
                                             std::size_t trials, const RngStream& rng) {
  if (!(delta >= 0.0) || delta >= 0.5) throw ArgumentError("certificate: delta must lie in [0, 0.5)");
  if (trials < 1) throw ArgumentError("certificate: trials must be >= 1");
  if (num_good < 2) throw ArgumentError("certificate: need at least two good vectors");
  const double n = static_cast<double>(num_good + byz_vectors.size());
  if (static_cast<double>(num_good) < (1.0 - delta) * n - 1e-12) {
    throw ArgumentError("certificate: good fraction below 1 - delta");
  }
  double lhs_sum = 0.0;
  double sigma_sum = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    RngStream sample_rng = rng.substream(t, 0);
    RngStream agg_rng = rng.substream(t, 1);
    std::vector<Vector> inputs;
    inputs.reserve(num_good + byz_vectors.size());
    for (std::size_t i = 0; i < num_good; ++i) inputs.push_back(good_sampler(sample_rng));
    const std::span<const Vector> goods(inputs.data(), num_good);
    const Vector good_mean = mean_of(goods);
    double pair = 0.0;
    for (std::size_t i = 0; i < num_good; ++i) {
      for (std::size_t l = i + 1; l < num_good; ++l) pair += 2.0 * dist_sq(inputs[i], inputs[l]);
    }
    sigma_sum += pair / static_cast<double>(num_good * (num_good - 1));
    inputs.insert(inputs.end(), byz_vectors.begin(), byz_vectors.end());
    const Vector out = aggregate(kind, inputs, agg_rng);
    lhs_sum += dist_sq(out, good_mean);
  }
  RobustnessCertificate cert;
  cert.trials = trials;
  cert.lhs = lhs_sum / static_cast<double>(trials);
  cert.sigma_sq = sigma_sum / static_cast<double>(trials);
  const double denom = delta * cert.sigma_sq;
  if (denom > 0.0) {
    cert.c_hat = cert.lhs / denom;
  } else {
    cert.c_hat = cert.lhs == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return cert;
}

}  // namespace byzsim
