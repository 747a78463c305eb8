#pragma once

// Dense vector primitives, counter-based randomness and the finite-difference
// gradient oracle shared by every other module.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace byzsim {

using Vector = std::vector<double>;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm_sq(std::span<const double> a);
double norm(std::span<const double> a);

// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);
Vector add(std::span<const double> a, std::span<const double> b);
Vector sub(std::span<const double> a, std::span<const double> b);
Vector scaled(double alpha, std::span<const double> a);
double dist_sq(std::span<const double> a, std::span<const double> b);
Vector mean_of(std::span<const Vector> vectors);

bool all_finite(std::span<const double> a);

// Throws DimensionError when the sizes differ.
void require_same_dim(std::size_t a, std::size_t b, const char* what);

/// Counter-based random stream.
///
/// Every draw is a pure function of (seed, stream_id, counter), so two
/// streams built from the same triple produce identical sequences no matter
/// which thread or in which order they are consumed. `substream` derives an
/// independent stream id deterministically, which is how per-worker,
/// per-round and per-purpose randomness is obtained.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed), stream_id_(stream_id) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer in [0, bound), bound >= 1. Rejection sampling, no modulo bias.
  std::uint64_t uniform_int(std::uint64_t bound);
  bool bernoulli(double p);
  double normal();

  RngStream substream(std::uint64_t tag) const;
  RngStream substream(std::uint64_t tag_a, std::uint64_t tag_b) const {
    return substream(tag_a).substream(tag_b);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x);

/// b distinct indices in [0, m), uniform over b-subsets (Floyd's algorithm).
std::vector<std::size_t> sample_without_replacement(RngStream& rng, std::size_t m,
                                                    std::size_t b);

/// Uniformly random permutation of [0, n).
std::vector<std::size_t> random_permutation(RngStream& rng, std::size_t n);

using ScalarFn = std::function<double(std::span<const double>)>;

/// Central differences (f(x + h e_j) - f(x - h e_j)) / 2h for every coordinate.
Vector finite_diff_grad(const ScalarFn& f, std::span<const double> x, double h);

}  // namespace byzsim
