#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <variant>
#include <vector>

#include "byzsim/core.hpp"

namespace byzsim {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sparse design matrix in CSR layout with +-1 labels.
struct LabeledDataset {
  std::size_t d = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::uint32_t> col;
  std::vector<double> val;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }

  void add_row(std::span<const std::uint32_t> idx, std::span<const double> values, int label);
  double row_dot(std::size_t i, std::span<const double> x) const;
  // y += alpha * a_i
  void row_axpy(std::size_t i, double alpha, std::span<double> y) const;
  double row_norm_sq(std::size_t i) const;

  // Throws DataError unless every label is +-1 and every index < d.
  void validate() const;

  LabeledDataset slice(std::size_t begin, std::size_t end) const;
  LabeledDataset with_flipped_labels() const;
};

enum class RegularizerKind { NonConvex, Ridge };

struct Regularizer {
  RegularizerKind kind = RegularizerKind::NonConvex;
  double lambda = 0.0;
};

/// Logistic loss on a shard of samples plus (lambda/2) r(x).
struct LogisticObjective {
  std::shared_ptr<const LabeledDataset> shard;
  Regularizer reg;
};

/// 0.5 ||x||^2 + <shift, x>.
struct QuadraticObjective {
  Vector shift;
};

using LocalObjective = std::variant<LogisticObjective, QuadraticObjective>;

std::size_t dim(const LocalObjective& obj);
// Number of local samples m; a quadratic task counts as a single sample.
std::size_t num_samples(const LocalObjective& obj);

double loss(const LocalObjective& obj, std::span<const double> x);
Vector grad(const LocalObjective& obj, std::span<const double> x);

// Accumulates sum_{j in batch} (grad f_j(x) - grad f_j(y)) into out (not normalised).
void accumulate_sample_grad_diff(const LocalObjective& obj, std::span<const std::size_t> batch,
                                 std::span<const double> x, std::span<const double> y,
                                 std::span<double> out);

/// Mini-batch estimator of grad f_i(x) - grad f_i(y): one uniform batch of size
/// b drawn without replacement evaluates both points.
Vector grad_diff_estimator(const LocalObjective& obj, std::span<const double> x,
                           std::span<const double> y, std::size_t b, RngStream& rng);

// Average objective (1/G) sum f_i and its gradient.
double average_loss(std::span<const LocalObjective> objs, std::span<const double> x);
Vector average_grad(std::span<const LocalObjective> objs, std::span<const double> x);

struct SmoothnessConstants {
  double L = 0.0;          // smoothness of the average objective
  double L_pm = 0.0;       // global Hessian variance bound
  double calL_pm = 0.0;    // local (per-sample) Hessian variance bound
  double mu = 0.0;         // PL constant, 0 when unknown
  std::vector<double> L_i; // per-objective smoothness
};

/// Largest eigenvalue of A^T A by power iteration, relative tolerance rel_tol.
double max_eigen_ata(const LabeledDataset& ds, double rel_tol = 1e-6,
                     std::size_t max_iters = 10000);

/// Conservative upper bounds on L, L_pm and calL_pm. Objectives that share a
/// shard pointer reuse one eigenvalue computation.
SmoothnessConstants estimate_constants(std::span<const LocalObjective> objs);

struct FStarEstimate {
  double value = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
  double grad_norm_sq = 0.0;
};

/// Full-gradient descent with stepsize 1/L on the average objective until
/// ||grad f||^2 <= tol or max_iters is hit (then converged = false).
FStarEstimate estimate_f_star(std::span<const LocalObjective> objs, double tol,
                              std::span<const double> x0 = {},
                              std::size_t max_iters = 200000);

}  // namespace byzsim
