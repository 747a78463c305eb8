#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "byzsim/core.hpp"

namespace byzsim {

struct MeanAgg {};
struct CoordinateMedian {};
struct GeometricMedian {
  double nu = 1e-8;
  std::size_t max_iters = 100;
  double tol = 1e-10;
};
struct Krum {
  std::size_t num_byz = 0;
};
struct Bucketed;

using AggregatorKind = std::variant<MeanAgg, CoordinateMedian, GeometricMedian, Krum, Bucketed>;

struct Bucketed {
  std::shared_ptr<const AggregatorKind> inner;
  std::size_t s = 1;
};

AggregatorKind bucketed(AggregatorKind inner, std::size_t s);
std::string describe(const AggregatorKind& kind);

/// s = floor(delta_max / delta), at least 1.
std::size_t default_bucket_size(double delta, double delta_max = 0.5);

/// Aggregation constant c used by the theoretical stepsizes when none is configured.
/// These are configuration defaults, checked empirically by robustness_certificate.
double default_aggregation_constant(const AggregatorKind& kind);

/// Aggregates equal-length vectors. Only Bucketed consumes randomness.
Vector aggregate(const AggregatorKind& kind, std::span<const Vector> vectors, RngStream& rng);

Vector coordinate_median(std::span<const Vector> vectors);
Vector geometric_median(std::span<const Vector> vectors, const GeometricMedian& params);
// Index of the selected input.
std::size_t krum_select(std::span<const Vector> vectors, std::size_t num_byz);

struct RobustnessCertificate {
  double lhs = 0.0;       // Monte-Carlo E||x_hat - x_bar||^2
  double sigma_sq = 0.0;  // Monte-Carlo pairwise variance of the good inputs
  double c_hat = 0.0;     // lhs / (delta sigma^2)
  std::size_t trials = 0;
};

using GoodSampler = std::function<Vector(RngStream&)>;

/// Empirical check of E||x_hat - x_bar||^2 <= c delta sigma^2. Each trial draws
/// num_good vectors from the sampler, appends the Byzantine inputs and
/// aggregates. Trials use independent substreams, so the result does not
/// depend on the order trials are evaluated in.
RobustnessCertificate robustness_certificate(const AggregatorKind& kind,
                                             const GoodSampler& good_sampler,
                                             std::size_t num_good,
                                             std::span<const Vector> byz_vectors, double delta,
                                             std::size_t trials, const RngStream& rng);

}  // namespace byzsim
