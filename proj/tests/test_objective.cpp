#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "byzsim/harness.hpp"
#include "byzsim/objective.hpp"

using namespace byzsim;

namespace {

std::shared_ptr<const LabeledDataset> dense_dataset(const std::vector<Vector>& rows,
                                                     const std::vector<int>& labels) {
  auto ds = std::make_shared<LabeledDataset>();
  ds->d = rows.front().size();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::vector<std::uint32_t> idx;
    std::vector<double> val;
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      if (rows[i][j] != 0.0) {
        idx.push_back(static_cast<std::uint32_t>(j));
        val.push_back(rows[i][j]);
      }
    }
    ds->add_row(idx, val, labels[i]);
  }
  return ds;
}

Vector random_vector(RngStream& rng, std::size_t d, double scale = 1.0) {
  Vector v(d);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

// Reference loss written out term by term, summed in reverse order.
double oracle_loss(const std::vector<Vector>& rows, const std::vector<int>& labels,
                   const Vector& x, const Regularizer& reg) {
  double s = 0.0;
  for (std::size_t i = rows.size(); i-- > 0;) {
    double margin = 0.0;
    for (std::size_t j = rows[i].size(); j-- > 0;) margin += rows[i][j] * x[j];
    s += std::log(1.0 + std::exp(-labels[i] * margin));
  }
  double r = 0.0;
  for (std::size_t j = x.size(); j-- > 0;) {
    r += reg.kind == RegularizerKind::Ridge ? x[j] * x[j] : x[j] * x[j] / (1.0 + x[j] * x[j]);
  }
  return s / static_cast<double>(rows.size()) + 0.5 * reg.lambda * r;
}

double rel_err(const Vector& a, const Vector& b) {
  return std::sqrt(dist_sq(a, b)) / std::max(1e-12, std::sqrt(norm_sq(b)));
}

}  // namespace

TEST_CASE("loss at the decision boundary") {
  auto ds = dense_dataset({{1, 0}}, {1});
  const LocalObjective obj = LogisticObjective{ds, {RegularizerKind::NonConvex, 0.0}};
  CHECK(loss(obj, Vector{0, 0}) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(num_samples(obj) == 1);
  CHECK(dim(obj) == 2);
}

TEST_CASE("quadratic task") {
  const LocalObjective zero = QuadraticObjective{Vector(3, 0.0)};
  CHECK(loss(zero, Vector(3, 0.0)) == 0.0);
  const LocalObjective ones = QuadraticObjective{Vector(4, 1.0)};
  CHECK(grad(ones, Vector(4, 0.0)) == Vector(4, 1.0));
  CHECK(loss(ones, Vector{1, 0, 0, 0}) == 1.5);
  CHECK(num_samples(ones) == 1);
}

TEST_CASE("loss matches a term-by-term oracle") {
  const std::vector<Vector> rows{{0.5, -1.0, 2.0}, {0.0, 3.0, -0.25}, {1.5, 0.0, 1.0}};
  const std::vector<int> labels{1, -1, 1};
  auto ds = dense_dataset(rows, labels);
  RngStream rng(17, 0);
  for (auto kind : {RegularizerKind::NonConvex, RegularizerKind::Ridge}) {
    const Regularizer reg{kind, 0.1};
    const LocalObjective obj = LogisticObjective{ds, reg};
    for (int rep = 0; rep < 20; ++rep) {
      const Vector x = random_vector(rng, 3);
      CHECK(loss(obj, x) == doctest::Approx(oracle_loss(rows, labels, x, reg)).epsilon(1e-12));
    }
  }
}

TEST_CASE("regularizer gradients") {
  auto ds = dense_dataset({{1, 2}, {-1, 0.5}}, {1, -1});
  const double lam = 0.3;
  const Vector e1{1, 0};
  const Vector base = grad(LocalObjective{LogisticObjective{ds, {RegularizerKind::Ridge, 0.0}}}, e1);
  const Vector ridge = grad(LocalObjective{LogisticObjective{ds, {RegularizerKind::Ridge, lam}}}, e1);
  const Vector ncvx = grad(LocalObjective{LogisticObjective{ds, {RegularizerKind::NonConvex, lam}}}, e1);
  CHECK(ridge[0] - base[0] == doctest::Approx(lam));
  CHECK(ridge[1] - base[1] == doctest::Approx(0.0));
  // lambda x / (1 + x^2)^2 at x = 1
  CHECK(ncvx[0] - base[0] == doctest::Approx(lam / 4.0));
}

TEST_CASE("analytic gradients agree with finite differences") {
  SUBCASE("three samples at the origin") {
    auto ds = dense_dataset({{1, 2}, {0, -1}, {3, 1}}, {1, -1, -1});
    const LocalObjective obj = LogisticObjective{ds, {RegularizerKind::NonConvex, 0.0}};
    const Vector fd = finite_diff_grad([&](std::span<const double> x) { return loss(obj, x); },
                                       Vector{0, 0}, 1e-6);
    const Vector g = grad(obj, Vector{0, 0});
    for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(fd[j] - g[j]) < 1e-6);
  }
  SUBCASE("phishing-shaped shard, both regularizers, 100 points") {
    auto ds = std::make_shared<const LabeledDataset>(make_phishing_like(300, 4));
    RngStream rng(5, 0);
    for (auto kind : {RegularizerKind::NonConvex, RegularizerKind::Ridge}) {
      const LocalObjective obj = LogisticObjective{ds, {kind, 0.1}};
      const ScalarFn f = [&](std::span<const double> x) { return loss(obj, x); };
      for (int rep = 0; rep < 100; ++rep) {
        const Vector x = random_vector(rng, ds->d, 0.5);
        double inf_norm = 0.0;
        for (double v : x) inf_norm = std::max(inf_norm, std::abs(v));
        const Vector fd = finite_diff_grad(f, x, 1e-6 * (1.0 + inf_norm));
        CHECK(rel_err(grad(obj, x), fd) < 1e-5);
      }
    }
  }
  SUBCASE("quadratic") {
    RngStream rng(6, 0);
    const LocalObjective obj = QuadraticObjective{random_vector(rng, 5)};
    const Vector x = random_vector(rng, 5);
    const Vector fd = finite_diff_grad([&](std::span<const double> z) { return loss(obj, z); }, x, 1e-6);
    CHECK(rel_err(grad(obj, x), fd) < 1e-8);
  }
}

TEST_CASE("dimension and batch errors") {
  auto ds = dense_dataset({{1, 2}}, {1});
  const LocalObjective obj = LogisticObjective{ds, {}};
  CHECK_THROWS_AS(loss(obj, Vector{1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(grad(obj, Vector{1}), DimensionError);
  RngStream rng(1, 1);
  CHECK_THROWS_AS(grad_diff_estimator(obj, Vector{0, 0}, Vector{1, 1}, 2, rng), ArgumentError);
  CHECK_THROWS_AS(grad_diff_estimator(obj, Vector{0, 0}, Vector{1, 1}, 0, rng), ArgumentError);
  const LocalObjective empty = LogisticObjective{std::make_shared<LabeledDataset>(), {}};
  CHECK_THROWS_AS(loss(empty, Vector{}), ArgumentError);
}

TEST_CASE("mini-batch gradient difference") {
  const std::vector<Vector> rows{{1, 0, 2}, {0, 1, -1}, {2, 2, 0}, {-1, 0.5, 1}};
  auto ds = dense_dataset(rows, {1, -1, 1, -1});
  const LocalObjective obj = LogisticObjective{ds, {RegularizerKind::NonConvex, 0.1}};
  RngStream rng(8, 0);
  const Vector x = random_vector(rng, 3);
  const Vector y = random_vector(rng, 3);
  const Vector exact = sub(grad(obj, x), grad(obj, y));

  SUBCASE("full batch is exact and consumes no randomness") {
    RngStream r(3, 3);
    const Vector est = grad_diff_estimator(obj, x, y, 4, r);
    for (std::size_t j = 0; j < 3; ++j) CHECK(est[j] == doctest::Approx(exact[j]).epsilon(1e-13));
    CHECK(r.counter() == 0);
  }
  SUBCASE("equal points give zero") {
    RngStream r(3, 4);
    for (std::size_t b = 1; b <= 4; ++b) CHECK(grad_diff_estimator(obj, x, x, b, r) == Vector(3, 0.0));
  }
  SUBCASE("single-sample batches are unbiased") {
    const int draws = 100000;
    Vector sum(3, 0.0), sum_sq(3, 0.0);
    for (int i = 0; i < draws; ++i) {
      const Vector est = grad_diff_estimator(obj, x, y, 1, rng);
      for (std::size_t j = 0; j < 3; ++j) {
        sum[j] += est[j];
        sum_sq[j] += est[j] * est[j];
      }
    }
    for (std::size_t j = 0; j < 3; ++j) {
      const double mean = sum[j] / draws;
      const double var = sum_sq[j] / draws - mean * mean;
      CHECK(std::abs(mean - exact[j]) <= 3.0 * std::sqrt(var / draws));
    }
  }
  SUBCASE("quadratic differences") {
    const LocalObjective q = QuadraticObjective{Vector{5, -5, 1}};
    RngStream r(1, 2);
    CHECK(grad_diff_estimator(q, x, y, 1, r) == sub(x, y));
  }
}

TEST_CASE("smoothness constants") {
  SUBCASE("quadratic tasks") {
    const std::vector<LocalObjective> objs{QuadraticObjective{Vector{1, 2}}, QuadraticObjective{Vector{0, 0}}};
    const auto c = estimate_constants(objs);
    CHECK(c.L == 1.0);
    CHECK(c.L_pm == 0.0);
    CHECK(c.calL_pm == 0.0);
  }
  SUBCASE("two scalar samples") {
    auto ds = dense_dataset({{1}, {2}}, {1, -1});
    const std::vector<LocalObjective> objs{LogisticObjective{ds, {RegularizerKind::NonConvex, 0.0}}};
    const auto c = estimate_constants(objs);
    CHECK(c.L == doctest::Approx(5.0 / 8.0).epsilon(1e-9));
    CHECK(c.calL_pm == doctest::Approx(1.0));  // max ||a||^2 / 4 = 4 / 4
    CHECK(c.mu == 0.0);
  }
  SUBCASE("homogeneous replication") {
    auto ds = std::make_shared<const LabeledDataset>(make_phishing_like(500, 2));
    const LocalObjective one = LogisticObjective{ds, {RegularizerKind::Ridge, 0.1}};
    const std::vector<LocalObjective> objs(13, one);
    const auto c = estimate_constants(objs);
    const auto single = estimate_constants(std::vector<LocalObjective>{one});
    CHECK(c.L_pm == doctest::Approx(single.L_i.front()));
    CHECK(c.L == doctest::Approx(single.L).epsilon(1e-6));
    CHECK(c.mu == 0.1);
  }
  SUBCASE("L_pm never exceeds L_avg") {
    auto ds = std::make_shared<const LabeledDataset>(make_phishing_like(600, 3));
    std::vector<LocalObjective> objs;
    for (auto& s : partition(ds, 5, Partition::HeterogeneousContiguous)) {
      objs.emplace_back(LogisticObjective{s, {RegularizerKind::NonConvex, 0.1}});
    }
    const auto c = estimate_constants(objs);
    double avg = 0.0;
    for (double li : c.L_i) avg += li * li;
    CHECK(c.L_pm <= std::sqrt(avg / c.L_i.size()) * (1 + 1e-12));
  }
  CHECK_THROWS_AS(estimate_constants(std::vector<LocalObjective>{}), ArgumentError);
  auto ds = dense_dataset({{1}}, {1});
  CHECK_THROWS_AS(estimate_constants(std::vector<LocalObjective>{QuadraticObjective{Vector{0}},
                                                                 LogisticObjective{ds, {}}}),
                  ArgumentError);
}

TEST_CASE("max_eigen_ata against a hand-computed matrix") {
  // A = [[1, 1], [0, 1]]: A^T A = [[1, 1], [1, 2]], eigenvalues (3 +- sqrt 5) / 2.
  auto ds = dense_dataset({{1, 1}, {0, 1}}, {1, 1});
  CHECK(max_eigen_ata(*ds, 1e-12) == doctest::Approx((3.0 + std::sqrt(5.0)) / 2.0).epsilon(1e-9));
}

TEST_CASE("gradient Lipschitz and Hessian-variance sanity") {
  auto ds = std::make_shared<const LabeledDataset>(make_phishing_like(400, 9));
  std::vector<LocalObjective> objs;
  for (auto& s : partition(ds, 4, Partition::HeterogeneousContiguous)) {
    objs.emplace_back(LogisticObjective{s, {RegularizerKind::NonConvex, 0.1}});
  }
  const auto c = estimate_constants(objs);
  RngStream rng(10, 0);
  for (int rep = 0; rep < 1000; ++rep) {
    const Vector x = random_vector(rng, ds->d);
    const Vector y = random_vector(rng, ds->d);
    const double dxy = dist_sq(x, y);
    const Vector gx = average_grad(objs, x);
    const Vector gy = average_grad(objs, y);
    const double global = dist_sq(gx, gy);
    REQUIRE(std::sqrt(global) <= c.L * std::sqrt(dxy) * (1 + 1e-9));
    double local = 0.0;
    for (const auto& o : objs) local += dist_sq(grad(o, x), grad(o, y));
    local /= static_cast<double>(objs.size());
    REQUIRE(local - global <= c.L_pm * c.L_pm * dxy * (1 + 1e-9));
  }
}

TEST_CASE("f* estimation") {
  SUBCASE("quadratic closed form") {
    const std::vector<LocalObjective> objs{QuadraticObjective{Vector{1, 2}}, QuadraticObjective{Vector{3, -2}}};
    const auto est = estimate_f_star(objs, 1e-20);
    CHECK(est.converged);
    // mean shift (2, 0): f* = -||(2, 0)||^2 / 2 = -2
    CHECK(est.value == doctest::Approx(-2.0).epsilon(1e-12));
  }
  SUBCASE("ridge logistic from two starts") {
    auto ds = std::make_shared<const LabeledDataset>(make_phishing_like(300, 5));
    const std::vector<LocalObjective> objs{LogisticObjective{ds, {RegularizerKind::Ridge, 0.1}}};
    const double tol = 1e-14;
    const auto a = estimate_f_star(objs, tol);
    const auto b = estimate_f_star(objs, tol, Vector(ds->d, 1.0));
    CHECK(a.converged);
    CHECK(b.converged);
    CHECK(std::abs(a.value - b.value) <= 10 * tol);
  }
  SUBCASE("infinite tolerance returns the starting value") {
    auto ds = dense_dataset({{1, 0}}, {1});
    const std::vector<LocalObjective> objs{LogisticObjective{ds, {}}};
    const auto est = estimate_f_star(objs, INFINITY);
    CHECK(est.value == doctest::Approx(std::log(2.0)));
    CHECK(est.iterations == 0);
  }
  SUBCASE("iteration cap reports non-convergence") {
    auto ds = std::make_shared<const LabeledDataset>(make_phishing_like(200, 5));
    const std::vector<LocalObjective> objs{LogisticObjective{ds, {RegularizerKind::Ridge, 0.1}}};
    const auto est = estimate_f_star(objs, 1e-30, {}, 3);
    CHECK_FALSE(est.converged);
    CHECK(est.iterations == 3);
  }
  CHECK_THROWS_AS(estimate_f_star(std::vector<LocalObjective>{QuadraticObjective{Vector{1}}}, 0.0), ArgumentError);
}

TEST_CASE("dataset helpers") {
  auto ds = dense_dataset({{1, 0}, {0, 2}, {3, 3}}, {1, -1, 1});
  const auto sl = ds->slice(1, 3);
  CHECK(sl.size() == 2);
  CHECK(sl.labels == std::vector<int>{-1, 1});
  CHECK(sl.row_dot(0, Vector{1, 1}) == 2.0);
  const auto fl = ds->with_flipped_labels();
  CHECK(fl.labels == std::vector<int>{-1, 1, -1});
  CHECK_THROWS_AS(ds->slice(2, 4), ArgumentError);
  LabeledDataset bad = *ds;
  bad.labels[0] = 0;
  CHECK_THROWS_AS(bad.validate(), DataError);
  LabeledDataset bad_idx = *ds;
  bad_idx.d = 1;
  CHECK_THROWS_AS(bad_idx.validate(), DataError);
}
