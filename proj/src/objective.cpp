#include "byzsim/objective.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

namespace byzsim {

void LabeledDataset::add_row(std::span<const std::uint32_t> idx, std::span<const double> values,
                             int label) {
  require_same_dim(idx.size(), values.size(), "add_row");
  col.insert(col.end(), idx.begin(), idx.end());
  val.insert(val.end(), values.begin(), values.end());
  row_ptr.push_back(col.size());
  labels.push_back(label);
}

double LabeledDataset::row_dot(std::size_t i, std::span<const double> x) const {
  double s = 0.0;
  for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) s += val[k] * x[col[k]];
  return s;
}

void LabeledDataset::row_axpy(std::size_t i, double alpha, std::span<double> y) const {
  for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) y[col[k]] += alpha * val[k];
}

double LabeledDataset::row_norm_sq(std::size_t i) const {
  double s = 0.0;
  for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) s += val[k] * val[k];
  return s;
}

void LabeledDataset::validate() const {
  if (row_ptr.size() != labels.size() + 1) throw DataError("dataset: row pointer size mismatch");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 1 && labels[i] != -1) {
      throw DataError("dataset: label of sample " + std::to_string(i) + " is not +-1");
    }
  }
  for (auto c : col) {
    if (c >= d) throw DataError("dataset: feature index " + std::to_string(c) + " >= d");
  }
}

LabeledDataset LabeledDataset::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > size()) throw ArgumentError("dataset slice out of range");
  LabeledDataset out;
  out.d = d;
  for (std::size_t i = begin; i < end; ++i) {
    const auto b = row_ptr[i];
    const auto e = row_ptr[i + 1];
    out.add_row(std::span(col).subspan(b, e - b), std::span(val).subspan(b, e - b), labels[i]);
  }
  return out;
}

LabeledDataset LabeledDataset::with_flipped_labels() const {
  LabeledDataset out = *this;
  for (int& y : out.labels) y = -y;
  return out;
}

namespace {

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

// d/dz log(1 + exp(z)) = sigmoid(z).
double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double reg_value(const Regularizer& reg, std::span<const double> x) {
  if (reg.lambda == 0.0) return 0.0;
  double r = 0.0;
  if (reg.kind == RegularizerKind::Ridge) {
    r = norm_sq(x);
  } else {
    for (double v : x) r += v * v / (1.0 + v * v);
  }
  return 0.5 * reg.lambda * r;
}

void add_reg_grad(const Regularizer& reg, std::span<const double> x, double weight,
                  std::span<double> out) {
  if (reg.lambda == 0.0) return;
  if (reg.kind == RegularizerKind::Ridge) {
    for (std::size_t j = 0; j < x.size(); ++j) out[j] += weight * reg.lambda * x[j];
  } else {
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double q = 1.0 + x[j] * x[j];
      out[j] += weight * reg.lambda * x[j] / (q * q);
    }
  }
}

void check_dim(const LocalObjective& obj, std::size_t n, const char* what) {
  require_same_dim(dim(obj), n, what);
}

const LabeledDataset& shard_of(const LogisticObjective& o) {
  if (!o.shard || o.shard->empty()) throw ArgumentError("logistic objective with empty shard");
  return *o.shard;
}

}  // namespace

std::size_t dim(const LocalObjective& obj) {
  return std::visit(
      [](const auto& o) -> std::size_t {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, LogisticObjective>) {
          return shard_of(o).d;
        } else {
          return o.shift.size();
        }
      },
      obj);
}

std::size_t num_samples(const LocalObjective& obj) {
  if (const auto* lo = std::get_if<LogisticObjective>(&obj)) return shard_of(*lo).size();
  return 1;
}

double loss(const LocalObjective& obj, std::span<const double> x) {
  check_dim(obj, x.size(), "loss");
  if (const auto* q = std::get_if<QuadraticObjective>(&obj)) {
    return 0.5 * norm_sq(x) + dot(q->shift, x);
  }
  const auto& lo = std::get<LogisticObjective>(obj);
  const auto& ds = shard_of(lo);
  double s = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) s += softplus(-ds.labels[i] * ds.row_dot(i, x));
  return s / static_cast<double>(ds.size()) + reg_value(lo.reg, x);
}

Vector grad(const LocalObjective& obj, std::span<const double> x) {
  check_dim(obj, x.size(), "grad");
  if (const auto* q = std::get_if<QuadraticObjective>(&obj)) return add(x, q->shift);
  const auto& lo = std::get<LogisticObjective>(obj);
  const auto& ds = shard_of(lo);
  Vector g(x.size(), 0.0);
  const double inv_m = 1.0 / static_cast<double>(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double y = ds.labels[i];
    const double coef = -y * sigmoid(-y * ds.row_dot(i, x));
    ds.row_axpy(i, coef * inv_m, g);
  }
  add_reg_grad(lo.reg, x, 1.0, g);
  return g;
}

void accumulate_sample_grad_diff(const LocalObjective& obj, std::span<const std::size_t> batch,
                                 std::span<const double> x, std::span<const double> y,
                                 std::span<double> out) {
  if (std::holds_alternative<QuadraticObjective>(obj)) {
    // Per-sample gradients x + shift: the shift cancels.
    for (std::size_t k = 0; k < batch.size(); ++k) {
      for (std::size_t j = 0; j < x.size(); ++j) out[j] += x[j] - y[j];
    }
    return;
  }
  const auto& lo = std::get<LogisticObjective>(obj);
  const auto& ds = shard_of(lo);
  for (std::size_t i : batch) {
    const double lab = ds.labels[i];
    const double cx = -lab * sigmoid(-lab * ds.row_dot(i, x));
    const double cy = -lab * sigmoid(-lab * ds.row_dot(i, y));
    ds.row_axpy(i, cx - cy, out);
  }
  const double w = static_cast<double>(batch.size());
  add_reg_grad(lo.reg, x, w, out);
  add_reg_grad(lo.reg, y, -w, out);
}

Vector grad_diff_estimator(const LocalObjective& obj, std::span<const double> x,
                           std::span<const double> y, std::size_t b, RngStream& rng) {
  check_dim(obj, x.size(), "grad_diff_estimator");
  check_dim(obj, y.size(), "grad_diff_estimator");
  const std::size_t m = num_samples(obj);
  if (b < 1 || b > m) {
    throw ArgumentError("grad_diff_estimator: batch size " + std::to_string(b) +
                        " outside [1, " + std::to_string(m) + "]");
  }
  Vector out(x.size(), 0.0);
  if (b == m) {
    // Full batch: exact difference, no randomness consumed.
    std::vector<std::size_t> all(m);
    for (std::size_t i = 0; i < m; ++i) all[i] = i;
    accumulate_sample_grad_diff(obj, all, x, y, out);
  } else {
    const auto batch = sample_without_replacement(rng, m, b);
    accumulate_sample_grad_diff(obj, batch, x, y, out);
  }
  const double inv_b = 1.0 / static_cast<double>(b);
  for (double& v : out) v *= inv_b;
  return out;
}

double average_loss(std::span<const LocalObjective> objs, std::span<const double> x) {
  if (objs.empty()) throw ArgumentError("average_loss: no objectives");
  double s = 0.0;
  for (const auto& o : objs) s += loss(o, x);
  return s / static_cast<double>(objs.size());
}

Vector average_grad(std::span<const LocalObjective> objs, std::span<const double> x) {
  if (objs.empty()) throw ArgumentError("average_grad: no objectives");
  Vector g(x.size(), 0.0);
  for (const auto& o : objs) axpy(1.0, grad(o, x), g);
  const double inv = 1.0 / static_cast<double>(objs.size());
  for (double& v : g) v *= inv;
  return g;
}

namespace {

struct WeightedShard {
  const LabeledDataset* ds;
  double weight;
};

// Largest eigenvalue of sum_k w_k A_k^T A_k.
double max_eigen_weighted(std::span<const WeightedShard> parts, std::size_t d, double rel_tol,
                          std::size_t max_iters) {
  Vector v(d, 1.0 / std::sqrt(static_cast<double>(d)));
  double lambda = 0.0;
  Vector next(d);
  for (std::size_t it = 0; it < max_iters; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (const auto& p : parts) {
      for (std::size_t i = 0; i < p.ds->size(); ++i) {
        const double t = p.ds->row_dot(i, v);
        if (t != 0.0) p.ds->row_axpy(i, p.weight * t, next);
      }
    }
    const double rayleigh = dot(v, next);
    const double nrm = norm(next);
    if (nrm == 0.0) return 0.0;
    for (std::size_t j = 0; j < d; ++j) v[j] = next[j] / nrm;
    if (it > 0 && std::abs(rayleigh - lambda) <= rel_tol * std::abs(rayleigh)) {
      // ||M v|| sits between the Rayleigh quotient and lambda_max.
      return std::max(rayleigh, nrm);
    }
    lambda = rayleigh;
  }
  return std::max(lambda, 0.0);
}

}  // namespace

double max_eigen_ata(const LabeledDataset& ds, double rel_tol, std::size_t max_iters) {
  const WeightedShard part{&ds, 1.0};
  return max_eigen_weighted(std::span(&part, 1), ds.d, rel_tol, max_iters);
}

SmoothnessConstants estimate_constants(std::span<const LocalObjective> objs) {
  if (objs.empty()) throw ArgumentError("estimate_constants: empty objective list");
  SmoothnessConstants out;
  const std::size_t G = objs.size();
  const bool all_quadratic = std::all_of(objs.begin(), objs.end(), [](const auto& o) {
    return std::holds_alternative<QuadraticObjective>(o);
  });
  if (all_quadratic) {
    // Every Hessian is the identity: gradient differences coincide across workers.
    out.L = 1.0;
    out.L_pm = 0.0;
    out.calL_pm = 0.0;
    out.mu = 1.0;
    out.L_i.assign(G, 1.0);
    return out;
  }
  if (!std::all_of(objs.begin(), objs.end(), [](const auto& o) {
        return std::holds_alternative<LogisticObjective>(o);
      })) {
    throw ArgumentError("estimate_constants: mixed quadratic and logistic objectives");
  }

  double lambda = 0.0;
  bool all_ridge = true;
  std::map<const LabeledDataset*, std::size_t> multiplicity;
  for (const auto& o : objs) {
    const auto& lo = std::get<LogisticObjective>(o);
    shard_of(lo);
    lambda = std::max(lambda, lo.reg.lambda);
    all_ridge = all_ridge && lo.reg.kind == RegularizerKind::Ridge;
    ++multiplicity[lo.shard.get()];
  }
  // Both regularizers have curvature bounded by lambda: Ridge exactly, NonConvex via sup|r''|/2 = 1.
  const double reg_curv = lambda;
  const std::size_t d = dim(objs.front());

  std::map<const LabeledDataset*, double> shard_L;
  std::vector<WeightedShard> parts;
  double max_sample = 0.0;
  for (const auto& [ds, count] : multiplicity) {
    const double m = static_cast<double>(ds->size());
    shard_L[ds] = max_eigen_ata(*ds) / (4.0 * m) + reg_curv;
    parts.push_back({ds, static_cast<double>(count) / (static_cast<double>(G) * 4.0 * m)});
    for (std::size_t i = 0; i < ds->size(); ++i) max_sample = std::max(max_sample, ds->row_norm_sq(i));
  }
  out.L = max_eigen_weighted(parts, d, 1e-6, 10000) + reg_curv;
  double sum_sq = 0.0;
  for (const auto& o : objs) {
    const double li = shard_L[std::get<LogisticObjective>(o).shard.get()];
    out.L_i.push_back(li);
    sum_sq += li * li;
  }
  out.L_pm = std::sqrt(sum_sq / static_cast<double>(G));
  out.calL_pm = max_sample / 4.0 + reg_curv;
  out.mu = all_ridge ? lambda : 0.0;
  return out;
}

FStarEstimate estimate_f_star(std::span<const LocalObjective> objs, double tol,
                              std::span<const double> x0, std::size_t max_iters) {
  if (!(tol > 0.0)) throw ArgumentError("estimate_f_star: tol must be positive");
  if (objs.empty()) throw ArgumentError("estimate_f_star: no objectives");
  const std::size_t d = dim(objs.front());
  Vector x = x0.empty() ? Vector(d, 0.0) : Vector(x0.begin(), x0.end());
  FStarEstimate est;
  Vector g = average_grad(objs, x);
  est.grad_norm_sq = norm_sq(g);
  if (est.grad_norm_sq <= tol) {
    est.value = average_loss(objs, x);
    est.converged = true;
    return est;
  }
  // Stepsize 1/L makes f monotonically non-increasing along the path.
  const double step = 1.0 / estimate_constants(objs).L;
  for (std::size_t it = 1; it <= max_iters; ++it) {
    axpy(-step, g, x);
    g = average_grad(objs, x);
    est.grad_norm_sq = norm_sq(g);
    est.iterations = it;
    if (est.grad_norm_sq <= tol) {
      est.converged = true;
      break;
    }
  }
  est.value = average_loss(objs, x);
  return est;
}

}  // namespace byzsim
