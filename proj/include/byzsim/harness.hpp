#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "byzsim/aggregators.hpp"
#include "byzsim/algorithms.hpp"
#include "byzsim/attacks.hpp"
#include "byzsim/compressors.hpp"
#include "byzsim/objective.hpp"
#include "byzsim/stepsizes.hpp"

namespace byzsim {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// ---- data -------------------------------------------------------------------

/// LibSVM text: "label idx:val idx:val ..." with 1-based indices. Labels 0/-1
/// map to -1 and 1/+1 to +1. d is the largest index seen unless d_override
/// is given (which must cover every index).
LabeledDataset parse_libsvm(std::istream& in, std::optional<std::size_t> d_override = {});
LabeledDataset load_libsvm(const std::string& path, std::optional<std::size_t> d_override = {});

enum class Partition { Homogeneous, HeterogeneousContiguous };

std::vector<std::shared_ptr<const LabeledDataset>> partition(
    const std::shared_ptr<const LabeledDataset>& ds, std::size_t n_good, Partition scheme);

/// Stand-in for the phishing table: 30 categorical attributes (22 with two
/// levels, 8 with three) one-hot encoded into 68 binary columns, labels drawn
/// from a logistic model. Every row has exactly 30 non-zeros.
LabeledDataset make_phishing_like(std::size_t num_samples, std::uint64_t seed);

inline constexpr std::size_t kPhishingSamples = 11055;
inline constexpr std::size_t kPhishingDim = 68;

// ---- experiment configuration ------------------------------------------------

enum class DataSource { PhishingSynthetic, LibSVM, Quadratic };
enum class StepsizeMode { Theoretical, Explicit };

struct ExperimentConfig {
  DataSource source = DataSource::PhishingSynthetic;
  std::string data_path;
  std::size_t samples = kPhishingSamples;  // synthetic logistic data
  std::optional<std::size_t> dim;          // quadratic dimension, or LibSVM override
  std::uint64_t data_seed = 1;

  std::size_t n = 16;
  std::size_t n_byz = 3;
  Partition partition = Partition::Homogeneous;
  Regularizer reg{RegularizerKind::NonConvex, 0.1};

  Method method = Method::Marina2;
  std::string compressor = "randk";
  std::optional<std::size_t> k;  // default round(0.1 d), at least 1
  std::string downlink = "identity";
  std::optional<std::size_t> downlink_k;

  std::string aggregator = "cm";
  std::optional<std::size_t> bucket_s;  // default floor(0.5 / delta) for robust rules
  std::optional<double> agg_c;          // constant c of the robust aggregator
  double heterogeneity_B = 0.0;

  std::optional<std::size_t> batch;  // default round(batch_fraction * m), at least 1
  double batch_fraction = 0.01;
  std::optional<double> p;
  std::optional<double> a;

  StepsizeMode stepsize_mode = StepsizeMode::Theoretical;
  double gamma = 0.0;       // Explicit mode
  double gamma_mult = 1.0;  // applied to the theoretical stepsize
  bool pl_stepsize = false;

  AttackKind attack = NoAttack{};
  std::optional<double> attack_z;  // overrides the strength of IPM / ALIE

  std::size_t rounds = 1000;
  std::size_t metrics_every = 1;
  std::optional<double> f_star;
  bool estimate_f_star = false;
  double f_star_tol = 1e-20;

  std::uint64_t seed = 0;
};

/// Sets one option by name; used by both the config file and CLI overrides.
void apply_option(ExperimentConfig& cfg, const std::string& key, const std::string& value);
/// "key = value" lines, '#' starts a comment, blank lines ignored.
void apply_config_text(ExperimentConfig& cfg, std::istream& in);
ExperimentConfig load_config(const std::string& path);
/// Inverse of apply_config_text for every option.
std::string to_config_text(const ExperimentConfig& cfg);

AttackKind parse_attack(const std::string& name, std::optional<double> z = {});
// cfg.attack with cfg.attack_z applied.
AttackKind effective_attack(const ExperimentConfig& cfg);
CompressorKind make_compressor(const std::string& name, std::size_t k);
AggregatorKind make_aggregator(const std::string& name, std::size_t bucket_s, std::size_t n_byz,
                               std::size_t n);

// ---- runs -------------------------------------------------------------------

/// Everything derived from a config before the first round.
struct ResolvedExperiment {
  Federation fed;
  std::size_t d = 0;
  std::size_t m = 0;  // smallest honest shard size
  SmoothnessConstants consts;
  StepsizeInputs stepsize_inputs;
  HyperParams hp;
  double gamma_theory = 0.0;
  std::optional<double> f_star;
};

ResolvedExperiment resolve(const ExperimentConfig& cfg);

struct MetricRow {
  std::uint64_t t = 0;
  std::uint64_t bits = 0;
  double f = 0.0;
  double grad_norm_sq = 0.0;
  std::optional<double> gap;
};

struct RunResult {
  std::vector<MetricRow> rows;
  bool diverged = false;
  double gamma = 0.0;
  double gamma_theory = 0.0;
  std::string config_echo;
  double wall_seconds = 0.0;
};

RunResult run(const ExperimentConfig& cfg);
RunResult run(const ExperimentConfig& cfg, const ResolvedExperiment& resolved);

void emit_csv(const RunResult& result, std::ostream& out);
void emit_csv(const RunResult& result, const std::string& path);
std::vector<MetricRow> parse_csv(std::istream& in);

struct SweepEntry {
  double multiplier = 1.0;
  RunResult result;
};

/// Runs the config once per stepsize multiplier, sharing the setup.
std::vector<SweepEntry> sweep(const ExperimentConfig& cfg, const std::vector<double>& multipliers);

}  // namespace byzsim
