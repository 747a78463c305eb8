#include "byzsim/compressors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace byzsim {

CompressorKind scaled_unbiased(CompressorKind inner) {
  if (!is_unbiased(inner)) {
    throw ClassificationError("ScaledUnbiased requires an unbiased inner compressor, got " +
                              describe(inner));
  }
  return ScaledUnbiased{std::make_shared<const CompressorKind>(std::move(inner))};
}

bool is_unbiased(const CompressorKind& kind) {
  return std::holds_alternative<Identity>(kind) || std::holds_alternative<RandK>(kind) ||
         std::holds_alternative<Natural>(kind);
}

bool is_contractive(const CompressorKind& kind) {
  return std::holds_alternative<Identity>(kind) || std::holds_alternative<TopK>(kind) ||
         std::holds_alternative<ScaledUnbiased>(kind);
}

std::string describe(const CompressorKind& kind) {
  struct V {
    std::string operator()(const Identity&) const { return "identity"; }
    std::string operator()(const RandK& c) const { return "randk(" + std::to_string(c.k) + ")"; }
    std::string operator()(const TopK& c) const { return "topk(" + std::to_string(c.k) + ")"; }
    std::string operator()(const Natural&) const { return "natural"; }
    std::string operator()(const ScaledUnbiased& c) const {
      return "scaled(" + (c.inner ? describe(*c.inner) : std::string("?")) + ")";
    }
  };
  return std::visit(V{}, kind);
}

std::uint64_t index_bits(std::size_t d) {
  if (d <= 1) return 0;
  return static_cast<std::uint64_t>(std::bit_width(d - 1));
}

std::uint64_t sparse_bits(std::size_t k, std::size_t d) { return k * (kFloatBits + index_bits(d)); }

std::uint64_t dense_bits(std::size_t d) { return kFloatBits * d; }

namespace {

void check_k(std::size_t k, std::size_t d, const char* name) {
  if (k < 1 || k > d) {
    throw ArgumentError(std::string(name) + ": K=" + std::to_string(k) + " outside [1, " +
                        std::to_string(d) + "]");
  }
}

const CompressorKind& inner_of(const ScaledUnbiased& s) {
  if (!s.inner) throw ClassificationError("ScaledUnbiased without inner compressor");
  if (!is_unbiased(*s.inner)) throw ClassificationError("ScaledUnbiased inner must be unbiased");
  return *s.inner;
}

// sign(v) 2^e for the two powers of two bracketing |v|, chosen so the mean is v.
std::pair<std::int8_t, std::int16_t> natural_round(double v, RngStream& rng) {
  if (v == 0.0) return {0, 0};
  const std::int8_t sign = v < 0.0 ? -1 : 1;
  const double a = std::abs(v);
  int e = 0;
  const double mant = std::frexp(a, &e);  // a = mant * 2^e, mant in [0.5, 1)
  int lower = e - 1;
  if (lower < kNaturalMinExp) {
    // Deterministic round-to-nearest at the bottom of the range: 0 or 2^min.
    if (a >= std::ldexp(1.0, kNaturalMinExp - 1)) return {sign, kNaturalMinExp};
    return {0, 0};
  }
  if (lower >= kNaturalMaxExp) return {sign, kNaturalMaxExp};
  if (mant == 0.5) return {sign, static_cast<std::int16_t>(lower)};  // exact power of two
  const double lo = std::ldexp(1.0, lower);
  const double hi = std::ldexp(1.0, lower + 1);
  const double p_low = (hi - a) / lo;
  // One uniform per nonzero coordinate.
  if (rng.uniform() < p_low) return {sign, static_cast<std::int16_t>(lower)};
  return {sign, static_cast<std::int16_t>(lower + 1)};
}

}  // namespace

std::uint64_t message_bits(const CompressorKind& kind, std::size_t d) {
  struct V {
    std::size_t d;
    std::uint64_t operator()(const Identity&) const { return dense_bits(d); }
    std::uint64_t operator()(const RandK& c) const { return sparse_bits(c.k, d); }
    std::uint64_t operator()(const TopK& c) const { return sparse_bits(c.k, d); }
    std::uint64_t operator()(const Natural&) const { return kNaturalBitsPerCoord * d; }
    std::uint64_t operator()(const ScaledUnbiased& c) const { return message_bits(inner_of(c), d); }
  };
  return std::visit(V{d}, kind);
}

CompressedMsg compress(const CompressorKind& kind, std::span<const double> x, RngStream& rng) {
  const std::size_t d = x.size();
  if (d == 0) throw DimensionError("compress: empty vector");
  CompressedMsg msg;
  msg.d = d;
  if (std::holds_alternative<Identity>(kind)) {
    msg.payload = DensePayload{Vector(x.begin(), x.end())};
  } else if (const auto* rk = std::get_if<RandK>(&kind)) {
    check_k(rk->k, d, "RandK");
    // Index-blind: zero coordinates are as likely to be picked as any other.
    auto picked = sample_without_replacement(rng, d, rk->k);
    std::sort(picked.begin(), picked.end());
    const double s = static_cast<double>(d) / static_cast<double>(rk->k);
    SparsePayload p;
    for (auto j : picked) {
      p.indices.push_back(static_cast<std::uint32_t>(j));
      p.values.push_back(rk->k == d ? x[j] : s * x[j]);
    }
    msg.payload = std::move(p);
  } else if (const auto* tk = std::get_if<TopK>(&kind)) {
    check_k(tk->k, d, "TopK");
    std::vector<std::uint32_t> order(d);
    for (std::size_t j = 0; j < d; ++j) order[j] = static_cast<std::uint32_t>(j);
    // Larger magnitude first; ties go to the lower index.
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(tk->k),
                      order.end(), [&](std::uint32_t a, std::uint32_t b) {
                        const double ma = std::abs(x[a]);
                        const double mb = std::abs(x[b]);
                        return ma != mb ? ma > mb : a < b;
                      });
    order.resize(tk->k);
    std::sort(order.begin(), order.end());
    SparsePayload p;
    for (auto j : order) {
      p.indices.push_back(j);
      p.values.push_back(x[j]);
    }
    msg.payload = std::move(p);
  } else if (std::holds_alternative<Natural>(kind)) {
    NaturalPayload p;
    p.signs.resize(d);
    p.exponents.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
      const auto [s, e] = natural_round(x[j], rng);
      p.signs[j] = s;
      p.exponents[j] = e;
    }
    msg.payload = std::move(p);
  } else {
    const auto& inner = inner_of(std::get<ScaledUnbiased>(kind));
    msg = compress(inner, x, rng);
    msg.scale = 1.0 / (omega(inner, d) + 1.0);
  }
  msg.bit_cost = message_bits(kind, d);
  return msg;
}

Vector decompress(const CompressedMsg& msg) {
  if (msg.d == 0) throw FormatError("decompress: zero dimension");
  Vector out(msg.d, 0.0);
  if (const auto* sp = std::get_if<SparsePayload>(&msg.payload)) {
    if (sp->indices.size() != sp->values.size()) throw FormatError("sparse payload size mismatch");
    for (std::size_t k = 0; k < sp->indices.size(); ++k) {
      if (sp->indices[k] >= msg.d) throw FormatError("sparse index out of range");
      out[sp->indices[k]] += sp->values[k];
    }
  } else if (const auto* np = std::get_if<NaturalPayload>(&msg.payload)) {
    if (np->signs.size() != msg.d || np->exponents.size() != msg.d) {
      throw FormatError("natural payload size mismatch");
    }
    for (std::size_t j = 0; j < msg.d; ++j) {
      const int s = np->signs[j];
      if (s < -1 || s > 1) throw FormatError("natural payload sign out of range");
      const int e = np->exponents[j];
      if (s != 0 && (e < kNaturalMinExp || e > kNaturalMaxExp)) {
        throw FormatError("natural payload exponent out of range");
      }
      out[j] = s == 0 ? 0.0 : s * std::ldexp(1.0, e);
    }
  } else {
    const auto& dp = std::get<DensePayload>(msg.payload);
    if (dp.values.size() != msg.d) throw FormatError("dense payload size mismatch");
    out = dp.values;
  }
  if (msg.scale != 1.0) {
    for (double& v : out) v *= msg.scale;
  }
  return out;
}

double omega(const CompressorKind& kind, std::size_t d) {
  if (std::holds_alternative<Identity>(kind)) return 0.0;
  if (const auto* rk = std::get_if<RandK>(&kind)) {
    check_k(rk->k, d, "RandK");
    return static_cast<double>(d) / static_cast<double>(rk->k) - 1.0;
  }
  if (std::holds_alternative<Natural>(kind)) return 1.0 / 8.0;
  throw ClassificationError("omega: " + describe(kind) + " is not an unbiased compressor");
}

double alpha(const CompressorKind& kind, std::size_t d) {
  if (std::holds_alternative<Identity>(kind)) return 1.0;
  if (const auto* tk = std::get_if<TopK>(&kind)) {
    check_k(tk->k, d, "TopK");
    return static_cast<double>(tk->k) / static_cast<double>(d);
  }
  if (const auto* su = std::get_if<ScaledUnbiased>(&kind)) {
    return 1.0 / (omega(inner_of(*su), d) + 1.0);
  }
  throw ClassificationError("alpha: " + describe(kind) + " is not a contractive compressor");
}

}  // namespace byzsim
