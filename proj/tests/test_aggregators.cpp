#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "byzsim/aggregators.hpp"

using namespace byzsim;

namespace {

// Multiples of 1/8 in [-64, 64]: sums, shifts and halvings of these stay exact.
std::vector<Vector> dyadic_inputs(RngStream& rng, std::size_t n, std::size_t d) {
  std::vector<Vector> out(n, Vector(d));
  for (auto& v : out) {
    for (double& x : v) x = (static_cast<double>(rng.uniform_int(1025)) - 512.0) / 8.0;
  }
  return out;
}

std::vector<Vector> gaussian_inputs(RngStream& rng, std::size_t n, std::size_t d) {
  std::vector<Vector> out(n, Vector(d));
  for (auto& v : out) {
    for (double& x : v) x = rng.normal();
  }
  return out;
}

std::vector<AggregatorKind> all_rules(std::size_t num_byz) {
  return {MeanAgg{}, CoordinateMedian{}, GeometricMedian{}, Krum{num_byz},
          bucketed(CoordinateMedian{}, 2), bucketed(GeometricMedian{}, 3), bucketed(MeanAgg{}, 2)};
}

double max_abs_diff(const Vector& a, const Vector& b) {
  double m = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) m = std::max(m, std::abs(a[j] - b[j]));
  return m;
}

}  // namespace

TEST_CASE("unanimity") {
  RngStream rng(1, 0);
  const Vector v{0.1, -1.0 / 3.0, 7e-9, 12345.678};
  for (std::size_t n : {1, 2, 5, 16}) {
    const std::vector<Vector> same(n, v);
    for (const auto& kind : all_rules(0)) {
      if (std::holds_alternative<Krum>(kind) && n < 3) continue;
      CHECK(aggregate(kind, same, rng) == v);
    }
  }
}

TEST_CASE("coordinate median examples") {
  RngStream rng(2, 0);
  CHECK(aggregate(CoordinateMedian{}, std::vector<Vector>{{1, 5}, {2, 4}, {3, 3}}, rng) == Vector{2, 4});
  // Even count: midpoint of the two central values.
  CHECK(coordinate_median(std::vector<Vector>{{1}, {4}, {10}, {2}}) == Vector{3});
  CHECK(coordinate_median(std::vector<Vector>{{-1}, {1}}) == Vector{0});
}

TEST_CASE("geometric median in one dimension is the median") {
  const Vector out = geometric_median(std::vector<Vector>{{0}, {0}, {10}}, GeometricMedian{1e-8, 100, 1e-10});
  CHECK(std::abs(out[0]) < 1e-6);
  const Vector odd = geometric_median(std::vector<Vector>{{-3}, {1}, {2}, {50}, {100}}, GeometricMedian{1e-8, 1000, 1e-12});
  CHECK(std::abs(odd[0] - 2.0) < 1e-6);
}

TEST_CASE("geometric median minimises the sum of distances") {
  RngStream rng(3, 0);
  for (int rep = 0; rep < 20; ++rep) {
    const auto xs = gaussian_inputs(rng, 9, 4);
    const Vector z = geometric_median(xs, GeometricMedian{1e-10, 2000, 1e-13});
    auto cost = [&](const Vector& y) {
      double s = 0.0;
      for (const auto& x : xs) s += std::sqrt(dist_sq(x, y));
      return s;
    };
    const double best = cost(z);
    for (int probe = 0; probe < 50; ++probe) {
      Vector y = z;
      for (double& v : y) v += 1e-3 * rng.normal();
      REQUIRE(cost(y) >= best - 1e-9);
    }
  }
}

TEST_CASE("permutation invariance") {
  RngStream rng(4, 0);
  for (int rep = 0; rep < 50; ++rep) {
    const auto xs = dyadic_inputs(rng, 7 + rep % 4, 5);
    auto ys = xs;
    const auto perm = random_permutation(rng, xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = xs[perm[i]];
    CHECK(aggregate(MeanAgg{}, xs, rng) == aggregate(MeanAgg{}, ys, rng));
    CHECK(coordinate_median(xs) == coordinate_median(ys));
    CHECK(max_abs_diff(geometric_median(xs, {}), geometric_median(ys, {})) < 1e-8);
  }
}

TEST_CASE("bucketing is permutation invariant in distribution") {
  RngStream rng(5, 0);
  const auto xs = gaussian_inputs(rng, 10, 3);
  auto ys = xs;
  std::reverse(ys.begin(), ys.end());
  const auto kind = bucketed(CoordinateMedian{}, 3);
  const int reps = 2000;
  Vector mx(3, 0.0), my(3, 0.0), sq(3, 0.0);
  for (int r = 0; r < reps; ++r) {
    RngStream ra = rng.substream(1, r), rb = rng.substream(2, r);
    const Vector a = aggregate(kind, xs, ra);
    const Vector b = aggregate(kind, ys, rb);
    for (std::size_t j = 0; j < 3; ++j) {
      mx[j] += a[j] / reps;
      my[j] += b[j] / reps;
      sq[j] += a[j] * a[j] / reps;
    }
  }
  for (std::size_t j = 0; j < 3; ++j) {
    const double se = std::sqrt(std::max(1e-12, sq[j] - mx[j] * mx[j]) / reps);
    CHECK(std::abs(mx[j] - my[j]) < 5.0 * std::sqrt(2.0) * se);
  }
}

TEST_CASE("translation equivariance") {
  RngStream rng(6, 0);
  for (int rep = 0; rep < 50; ++rep) {
    // Power-of-two counts keep the division in the mean exact.
    const auto xs = dyadic_inputs(rng, std::size_t{4} << (rep % 3), 4);
    const Vector t = dyadic_inputs(rng, 1, 4)[0];
    auto shifted = xs;
    for (auto& v : shifted) axpy(1.0, t, v);
    CHECK(aggregate(MeanAgg{}, shifted, rng) == add(aggregate(MeanAgg{}, xs, rng), t));
    CHECK(coordinate_median(shifted) == add(coordinate_median(xs), t));
    const GeometricMedian gm{1e-8, 1000, 1e-12};
    CHECK(max_abs_diff(geometric_median(shifted, gm), add(geometric_median(xs, gm), t)) < 1e-8);

    const auto odd = gaussian_inputs(rng, 7, 4);
    auto odd_shifted = odd;
    for (auto& v : odd_shifted) axpy(1.0, t, v);
    CHECK(max_abs_diff(aggregate(MeanAgg{}, odd_shifted, rng), add(aggregate(MeanAgg{}, odd, rng), t)) < 1e-12);
    CHECK(coordinate_median(odd_shifted) == add(coordinate_median(odd), t));
  }
}

TEST_CASE("coordinate median stays inside the per-coordinate range") {
  RngStream rng(7, 0);
  for (int rep = 0; rep < 200; ++rep) {
    const auto xs = gaussian_inputs(rng, 2 + rep % 9, 6);
    const Vector m = coordinate_median(xs);
    for (std::size_t j = 0; j < 6; ++j) {
      double lo = xs[0][j], hi = xs[0][j];
      for (const auto& v : xs) {
        lo = std::min(lo, v[j]);
        hi = std::max(hi, v[j]);
      }
      REQUIRE(m[j] >= lo);
      REQUIRE(m[j] <= hi);
    }
  }
}

TEST_CASE("krum") {
  RngStream rng(8, 0);
  for (int rep = 0; rep < 100; ++rep) {
    const auto xs = gaussian_inputs(rng, 8, 3);
    const Vector out = aggregate(Krum{2}, xs, rng);
    CHECK(std::find(xs.begin(), xs.end(), out) != xs.end());
  }
  // Far outliers are never picked.
  std::vector<Vector> pts{{0, 0}, {0.1, 0}, {0, 0.1}, {0.1, 0.1}, {100, 100}, {-100, 50}};
  const auto pick = krum_select(pts, 2);
  CHECK(pick < 4);
  // Equal scores: lowest index.
  CHECK(krum_select(std::vector<Vector>{{1}, {1}, {1}, {1}}, 0) == 0);
  CHECK_THROWS_AS(krum_select(std::vector<Vector>{{1}, {2}, {3}}, 1), ArgumentError);
}

TEST_CASE("bucketing with s = 1 over the mean is the mean") {
  RngStream rng(9, 0);
  for (int rep = 0; rep < 50; ++rep) {
    const auto xs = gaussian_inputs(rng, 16, 5);
    RngStream r = rng.substream(rep);
    CHECK(aggregate(bucketed(MeanAgg{}, 1), xs, r) == aggregate(MeanAgg{}, xs, r));
  }
}

TEST_CASE("bucketing averages a short last bucket over its own size") {
  // Three inputs, s = 2: one bucket of two and one of one. The mean of two
  // bucket means differs from the plain mean unless the last bucket is divided by 1.
  RngStream rng(10, 0);
  const std::vector<Vector> xs{{0}, {0}, {6}};
  for (int rep = 0; rep < 20; ++rep) {
    const Vector out = aggregate(bucketed(MeanAgg{}, 2), xs, rng);
    // Possible bucketings: {0,0}{6} -> 3, {0,6}{0} -> 1.5.
    CHECK((out[0] == 3.0 || out[0] == 1.5));
  }
}

TEST_CASE("breakdown: median with bucketing ignores huge outliers") {
  RngStream rng(11, 0);
  double prev_mean = 0.0;
  for (double R : {1e3, 1e6, 1e9}) {
    std::vector<Vector> xs(13, Vector(3, 0.0));
    for (int b = 0; b < 3; ++b) xs.push_back(Vector{R, 0, 0});
    for (int rep = 0; rep < 50; ++rep) {
      REQUIRE(norm(aggregate(bucketed(CoordinateMedian{}, 2), xs, rng)) <= 1.0);
    }
    const double mean_norm = norm(aggregate(MeanAgg{}, xs, rng));
    CHECK(mean_norm == doctest::Approx(R * 3.0 / 16.0));
    CHECK(mean_norm > prev_mean);
    prev_mean = mean_norm;
  }
}

TEST_CASE("errors") {
  RngStream rng(12, 0);
  CHECK_THROWS_AS(aggregate(MeanAgg{}, std::vector<Vector>{}, rng), ArgumentError);
  CHECK_THROWS_AS(aggregate(CoordinateMedian{}, std::vector<Vector>{{1, 2}, {1}}, rng), DimensionError);
  CHECK_THROWS_AS(bucketed(MeanAgg{}, 0), ArgumentError);
  CHECK_THROWS_AS(geometric_median(std::vector<Vector>{{1}}, GeometricMedian{0.0, 10, 1e-9}), ArgumentError);
}

TEST_CASE("defaults") {
  CHECK(default_bucket_size(3.0 / 16.0) == 2);
  CHECK(default_bucket_size(0.25) == 2);
  CHECK(default_bucket_size(0.4) == 1);
  CHECK(default_bucket_size(0.0) == 1);
  CHECK(default_aggregation_constant(bucketed(CoordinateMedian{}, 2)) == 0.1);
  CHECK(default_aggregation_constant(MeanAgg{}) == 1.0);
  CHECK(describe(bucketed(CoordinateMedian{}, 2)) == "bucketed(cm, s=2)");
}

TEST_CASE("robustness certificate") {
  const RngStream rng(13, 0);
  SUBCASE("mean with no Byzantine inputs has zero error") {
    const GoodSampler normal3 = [](RngStream& r) { return Vector{r.normal(), r.normal(), r.normal()}; };
    const auto cert = robustness_certificate(MeanAgg{}, normal3, 10, {}, 0.0, 200, rng);
    CHECK(cert.lhs == 0.0);
    CHECK(cert.c_hat == 0.0);
    CHECK(cert.sigma_sq > 0.0);
  }
  SUBCASE("identical goods and copies") {
    const Vector v{1.5, -2.0};
    const GoodSampler fixed = [&](RngStream&) { return v; };
    const std::vector<Vector> byz(3, v);
    const auto cert = robustness_certificate(bucketed(CoordinateMedian{}, 2), fixed, 13, byz, 3.0 / 16.0, 100, rng);
    CHECK(cert.lhs == 0.0);
    CHECK(cert.sigma_sq == 0.0);
  }
  SUBCASE("gaussian goods, the definition holds and c_hat is stable") {
    const GoodSampler normal5 = [](RngStream& r) {
      Vector v(5);
      for (double& x : v) x = r.normal();
      return v;
    };
    Vector outlier(5, 0.0);
    outlier[0] = 100.0;
    const std::vector<Vector> byz(3, outlier);
    const double delta = 3.0 / 16.0;
    std::vector<double> c_hats;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const auto cert = robustness_certificate(bucketed(CoordinateMedian{}, 2), normal5, 13, byz, delta, 2000,
                                               RngStream(seed, 77));
      CHECK(cert.lhs <= cert.c_hat * delta * cert.sigma_sq * (1 + 1e-12));
      CHECK(std::isfinite(cert.c_hat));
      c_hats.push_back(cert.c_hat);
    }
    const auto [lo, hi] = std::minmax_element(c_hats.begin(), c_hats.end());
    CHECK(*hi / *lo < 1.2);
  }
  SUBCASE("trial order does not matter") {
    const GoodSampler normal2 = [](RngStream& r) { return Vector{r.normal(), r.normal()}; };
    const auto a = robustness_certificate(CoordinateMedian{}, normal2, 5, {}, 0.1, 50, rng);
    const auto b = robustness_certificate(CoordinateMedian{}, normal2, 5, {}, 0.1, 50, rng);
    CHECK(a.lhs == b.lhs);
  }
  const GoodSampler one = [](RngStream&) { return Vector{1.0}; };
  CHECK_THROWS_AS(robustness_certificate(MeanAgg{}, one, 10, {}, 0.5, 10, rng), ArgumentError);
  CHECK_THROWS_AS(robustness_certificate(MeanAgg{}, one, 10, {}, 0.1, 0, rng), ArgumentError);
  const std::vector<Vector> many(10, Vector{1.0});
  CHECK_THROWS_AS(robustness_certificate(MeanAgg{}, one, 4, many, 0.2, 10, rng), ArgumentError);
}
