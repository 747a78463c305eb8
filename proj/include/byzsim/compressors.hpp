#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "byzsim/core.hpp"

namespace byzsim {

class ClassificationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Identity {};
struct RandK {
  std::size_t k = 1;
};
struct TopK {
  std::size_t k = 1;
};
struct Natural {};
struct ScaledUnbiased;

using CompressorKind = std::variant<Identity, RandK, TopK, Natural, ScaledUnbiased>;

// (omega + 1)^{-1} Q for an unbiased Q; contractive with alpha = 1/(omega + 1).
struct ScaledUnbiased {
  std::shared_ptr<const CompressorKind> inner;
};

CompressorKind scaled_unbiased(CompressorKind inner);

bool is_unbiased(const CompressorKind& kind);
bool is_contractive(const CompressorKind& kind);
std::string describe(const CompressorKind& kind);

struct SparsePayload {
  std::vector<std::uint32_t> indices;
  std::vector<double> values;
};

/// Per-coordinate sign in {-1, 0, +1} and binary exponent; value = sign * 2^exponent.
struct NaturalPayload {
  std::vector<std::int8_t> signs;
  std::vector<std::int16_t> exponents;
};

struct DensePayload {
  std::vector<double> values;
};

struct CompressedMsg {
  std::variant<SparsePayload, NaturalPayload, DensePayload> payload;
  std::size_t d = 0;
  // Receiver-side multiplier known from configuration (ScaledUnbiased); not transmitted.
  double scale = 1.0;
  std::uint64_t bit_cost = 0;
};

// Wire-cost model. Bits per transmitted real and per sparse index.
inline constexpr std::uint64_t kFloatBits = 64;
inline constexpr std::uint64_t kNaturalBitsPerCoord = 1 + 8;
std::uint64_t index_bits(std::size_t d);          // ceil(log2 d), 0 for d = 1
std::uint64_t sparse_bits(std::size_t k, std::size_t d);  // k (64 + ceil(log2 d))
std::uint64_t dense_bits(std::size_t d);          // 64 d

// Clamp range for natural-compression exponents.
inline constexpr int kNaturalMinExp = -126;
inline constexpr int kNaturalMaxExp = 127;

CompressedMsg compress(const CompressorKind& kind, std::span<const double> x, RngStream& rng);
Vector decompress(const CompressedMsg& msg);

// Bit cost that compress() will report for a d-dimensional input.
std::uint64_t message_bits(const CompressorKind& kind, std::size_t d);

/// Variance parameter of an unbiased compressor; throws ClassificationError otherwise.
double omega(const CompressorKind& kind, std::size_t d);
/// Contraction parameter of a contractive compressor; throws ClassificationError otherwise.
double alpha(const CompressorKind& kind, std::size_t d);

}  // namespace byzsim
