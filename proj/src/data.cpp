#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include "byzsim/harness.hpp"

namespace byzsim {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(std::string_view tok, std::size_t line, const char* what) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ParseError(std::string("bad ") + what + " '" + std::string(tok) + "'", line);
  }
  return v;
}

int map_label(double raw, std::size_t line) {
  if (raw == 1.0) return 1;
  if (raw == 0.0 || raw == -1.0) return -1;
  std::ostringstream os;
  os << "line " << line << ": unknown label " << raw;
  throw DataError(os.str());
}

}  // namespace

LabeledDataset parse_libsvm(std::istream& in, std::optional<std::size_t> d_override) {
  LabeledDataset ds;
  std::string raw;
  std::size_t line_no = 0;
  std::size_t max_index = 0;
  std::vector<std::uint32_t> idx;
  std::vector<double> vals;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = trim(raw);
    if (line.empty()) continue;
    idx.clear();
    vals.clear();
    std::size_t pos = 0;
    auto next_token = [&]() -> std::string_view {
      while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
      const std::size_t start = pos;
      while (pos < line.size() && line[pos] != ' ' && line[pos] != '\t') ++pos;
      return line.substr(start, pos - start);
    };
    std::string_view label_tok = next_token();
    if (!label_tok.empty() && label_tok.front() == '+') label_tok.remove_prefix(1);
    const int label = map_label(parse_double(label_tok, line_no, "label"), line_no);
    long long prev = 0;
    for (std::string_view tok = next_token(); !tok.empty(); tok = next_token()) {
      const auto colon = tok.find(':');
      if (colon == std::string_view::npos) throw ParseError("expected idx:val, got '" + std::string(tok) + "'", line_no);
      long long one_based = 0;
      const auto ik = tok.substr(0, colon);
      const auto [p, ec] = std::from_chars(ik.data(), ik.data() + ik.size(), one_based);
      if (ec != std::errc() || p != ik.data() + ik.size() || one_based < 1) {
        throw ParseError("bad feature index '" + std::string(ik) + "'", line_no);
      }
      if (one_based <= prev) throw ParseError("feature indices must increase", line_no);
      prev = one_based;
      const double v = parse_double(tok.substr(colon + 1), line_no, "feature value");
      idx.push_back(static_cast<std::uint32_t>(one_based - 1));
      vals.push_back(v);
      max_index = std::max<std::size_t>(max_index, static_cast<std::size_t>(one_based));
    }
    ds.add_row(idx, vals, label);
  }
  if (d_override) {
    if (*d_override < max_index) {
      throw DataError("dimension override " + std::to_string(*d_override) +
                      " is smaller than the largest index " + std::to_string(max_index));
    }
    ds.d = *d_override;
  } else {
    ds.d = max_index;
  }
  ds.validate();
  return ds;
}

LabeledDataset load_libsvm(const std::string& path, std::optional<std::size_t> d_override) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return parse_libsvm(in, d_override);
}

std::vector<std::shared_ptr<const LabeledDataset>> partition(
    const std::shared_ptr<const LabeledDataset>& ds, std::size_t n_good, Partition scheme) {
  if (!ds) throw ArgumentError("partition: null dataset");
  if (n_good < 1) throw ArgumentError("partition: n_good must be >= 1");
  if (n_good > ds->size()) {
    throw ArgumentError("partition: " + std::to_string(n_good) + " workers for " +
                        std::to_string(ds->size()) + " samples");
  }
  std::vector<std::shared_ptr<const LabeledDataset>> shards;
  shards.reserve(n_good);
  if (scheme == Partition::Homogeneous) {
    shards.assign(n_good, ds);
    return shards;
  }
  const std::size_t N = ds->size();
  const std::size_t base = N / n_good;
  const std::size_t extra = N % n_good;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < n_good; ++i) {
    const std::size_t len = base + (i < extra ? 1 : 0);
    shards.push_back(std::make_shared<const LabeledDataset>(ds->slice(begin, begin + len)));
    begin += len;
  }
  return shards;
}

LabeledDataset make_phishing_like(std::size_t num_samples, std::uint64_t seed) {
  constexpr std::size_t kBinary = 22;
  constexpr std::size_t kTernary = 8;
  constexpr std::size_t kAttrs = kBinary + kTernary;
  static_assert(2 * kBinary + 3 * kTernary == kPhishingDim);

  RngStream setup(seed, 0x5eed);
  // Skewed level probabilities: the dominant level carries 50% to 85% of the mass.
  std::vector<std::vector<double>> levels(kAttrs);
  std::vector<std::size_t> offset(kAttrs);
  std::size_t col = 0;
  for (std::size_t f = 0; f < kAttrs; ++f) {
    const std::size_t k = f < kBinary ? 2 : 3;
    offset[f] = col;
    col += k;
    const double top = 0.5 + 0.35 * setup.uniform();
    std::vector<double> probs(k);
    probs[0] = top;
    if (k == 2) {
      probs[1] = 1.0 - top;
    } else {
      const double split = 0.2 + 0.6 * setup.uniform();
      probs[1] = (1.0 - top) * split;
      probs[2] = (1.0 - top) * (1.0 - split);
    }
    // Dominant level at a random position.
    std::swap(probs[0], probs[setup.uniform_int(k)]);
    levels[f] = std::move(probs);
  }
  Vector w(kPhishingDim);
  for (double& v : w) v = setup.normal();

  LabeledDataset ds;
  ds.d = kPhishingDim;
  RngStream rows(seed, 0xda7a);
  std::array<std::uint32_t, kAttrs> idx{};
  std::array<double, kAttrs> ones{};
  ones.fill(1.0);
  std::vector<double> scores(num_samples);
  std::vector<std::array<std::uint32_t, kAttrs>> cols(num_samples);
  for (std::size_t i = 0; i < num_samples; ++i) {
    double score = 0.0;
    for (std::size_t f = 0; f < kAttrs; ++f) {
      const double u = rows.uniform();
      std::size_t level = 0;
      double acc = levels[f][0];
      while (level + 1 < levels[f].size() && u >= acc) acc += levels[f][++level];
      idx[f] = static_cast<std::uint32_t>(offset[f] + level);
      score += w[idx[f]];
    }
    cols[i] = idx;
    scores[i] = score;
  }
  // Centre the scores so the classes are roughly balanced.
  std::vector<double> sorted = scores;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(num_samples / 2), sorted.end());
  const double median = num_samples ? sorted[num_samples / 2] : 0.0;
  for (std::size_t i = 0; i < num_samples; ++i) {
    const double prob = 1.0 / (1.0 + std::exp(-(scores[i] - median)));
    const int label = rows.uniform() < prob ? 1 : -1;
    ds.add_row(cols[i], ones, label);
  }
  ds.validate();
  return ds;
}

}  // namespace byzsim
