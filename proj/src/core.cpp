#include "byzsim/core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_set>

namespace byzsim {

void require_same_dim(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                         " vs " + std::to_string(b) + ")");
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a.size(), b.size(), "dot");
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s;
}

double norm_sq(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(norm_sq(a)); }

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  require_same_dim(x.size(), y.size(), "axpy");
  for (std::size_t j = 0; j < x.size(); ++j) y[j] += alpha * x[j];
}

Vector add(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a.size(), b.size(), "add");
  Vector out(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) out[j] = a[j] + b[j];
  return out;
}

Vector sub(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a.size(), b.size(), "sub");
  Vector out(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) out[j] = a[j] - b[j];
  return out;
}

Vector scaled(double alpha, std::span<const double> a) {
  Vector out(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) out[j] = alpha * a[j];
  return out;
}

double dist_sq(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a.size(), b.size(), "dist_sq");
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double t = a[j] - b[j];
    s += t * t;
  }
  return s;
}

Vector mean_of(std::span<const Vector> vectors) {
  if (vectors.empty()) throw ArgumentError("mean_of: empty input");
  // Per coordinate: anchor at the minimum and sum the offsets in sorted order.
  // The result then depends only on the multiset of inputs, and n identical
  // vectors average to that vector exactly.
  const std::size_t d = vectors.front().size();
  for (const auto& v : vectors) require_same_dim(v.size(), d, "mean_of");
  const double n = static_cast<double>(vectors.size());
  Vector out(d);
  std::vector<double> col(vectors.size());
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < vectors.size(); ++i) col[i] = vectors[i][j];
    std::sort(col.begin(), col.end());
    const double lo = col.front();
    double acc = 0.0;
    for (double c : col) acc += c - lo;
    out[j] = lo + acc / n;
  }
  return out;
}

bool all_finite(std::span<const double> a) {
  return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

// splitmix64 finalizer
std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t RngStream::next_u64() {
  // Two rounds of mixing over the (seed, stream, counter) key.
  const std::uint64_t key = mix64(seed_ ^ mix64(stream_id_ + 0x632be59bd9b4e019ULL));
  return mix64(key ^ mix64(counter_++ * 0xd1342543de82ef95ULL + 1));
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::uniform_int(std::uint64_t bound) {
  if (bound == 0) throw ArgumentError("uniform_int: bound must be positive");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t r;
  do {
    r = next_u64();
  } while (r >= limit);
  return r % bound;
}

bool RngStream::bernoulli(double p) {
  if (p >= 1.0) return true;
  if (p <= 0.0) return false;
  return uniform() < p;
}

double RngStream::normal() {
  // Box-Muller, cosine branch only: every call consumes exactly two draws.
  double u1 = uniform();
  const double u2 = uniform();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

RngStream RngStream::substream(std::uint64_t tag) const {
  return RngStream(seed_, mix64(stream_id_ * 0x9e3779b97f4a7c15ULL ^ mix64(tag ^ 0xa0761d6478bd642fULL)));
}

std::vector<std::size_t> sample_without_replacement(RngStream& rng, std::size_t m,
                                                    std::size_t b) {
  if (b < 1 || b > m) {
    throw ArgumentError("sample_without_replacement: need 1 <= b <= m (b=" + std::to_string(b) +
                        ", m=" + std::to_string(m) + ")");
  }
  std::vector<std::size_t> chosen;
  chosen.reserve(b);
  if (2 * b >= m) {
    // Dense regime: partial Fisher-Yates.
    std::vector<std::size_t> idx(m);
    for (std::size_t i = 0; i < m; ++i) idx[i] = i;
    for (std::size_t i = 0; i < b; ++i) {
      const std::size_t j = i + rng.uniform_int(m - i);
      std::swap(idx[i], idx[j]);
      chosen.push_back(idx[i]);
    }
    return chosen;
  }
  std::unordered_set<std::size_t> seen;
  seen.reserve(2 * b);
  for (std::size_t j = m - b; j < m; ++j) {
    const std::size_t t = rng.uniform_int(j + 1);
    if (seen.insert(t).second) {
      chosen.push_back(t);
    } else {
      seen.insert(j);
      chosen.push_back(j);
    }
  }
  return chosen;
}

std::vector<std::size_t> random_permutation(RngStream& rng, std::size_t n) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.uniform_int(i);
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

Vector finite_diff_grad(const ScalarFn& f, std::span<const double> x, double h) {
  if (!(h > 0.0)) throw ArgumentError("finite_diff_grad: h must be positive");
  Vector probe(x.begin(), x.end());
  Vector g(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double orig = probe[j];
    probe[j] = orig + h;
    const double fp = f(probe);
    probe[j] = orig - h;
    const double fm = f(probe);
    probe[j] = orig;
    g[j] = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace byzsim
