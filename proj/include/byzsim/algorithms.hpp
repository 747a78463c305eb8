#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "byzsim/aggregators.hpp"
#include "byzsim/attacks.hpp"
#include "byzsim/compressors.hpp"
#include "byzsim/core.hpp"
#include "byzsim/objective.hpp"

namespace byzsim {

enum class Method {
  Marina,   // Byz-VR-MARINA baseline: g_i^{t+1} = g^t + m_i^{t+1}
  Marina2,  // Byz-VR-MARINA 2.0
  DashaPage,
  EF21,
  EF21BC,
};

std::string to_string(Method m);
Method parse_method(const std::string& s);
bool uses_unbiased_compression(Method m);

struct HyperParams {
  double gamma = 0.0;
  double p = 1.0;  // sync probability (Marina variants, DASHA-PAGE)
  double a = 1.0;  // momentum (DASHA-PAGE)
  std::size_t b = 1;
  std::size_t T = 1;
  CompressorKind uplink = Identity{};
  CompressorKind downlink = Identity{};  // EF21-BC only
  AggregatorKind aggregator = MeanAgg{};
  std::uint64_t seed = 0;
};

void validate(const HyperParams& hp, Method method);

/// Workers [0, num_good) are honest; the remaining objectives belong to the
/// Byzantine workers, which run the honest protocol on them as a shadow and
/// then hand the result to the attack.
struct Federation {
  std::vector<LocalObjective> objectives;
  std::size_t num_good = 0;
  AttackKind attack = NoAttack{};

  std::size_t n() const { return objectives.size(); }
  std::size_t num_byz() const { return objectives.size() - num_good; }
  std::span<const LocalObjective> good() const { return {objectives.data(), num_good}; }
};

struct ServerState {
  Vector x;
  Vector g;
  std::vector<Vector> per_worker_g;  // mirror of every g_i, Byzantine slots hold forged vectors
  Vector w;                          // downlink anchor (EF21-BC)
  std::uint64_t t = 0;
};

struct WorkerState {
  Vector g;
  Vector h;  // DASHA-PAGE
  Vector w;  // EF21-BC
};

struct RoundStats {
  std::uint64_t t = 0;  // index of the round just completed (state is now at t+1)
  bool coin = false;
  std::uint64_t uplink_bits = 0;
  std::uint64_t downlink_bits = 0;
  std::uint64_t total_bits() const { return uplink_bits + downlink_bits; }
};

struct AlgorithmState {
  ServerState server;
  std::vector<WorkerState> workers;  // one per worker, Byzantine shadows included
};

struct StepResult {
  AlgorithmState state;
  RoundStats stats;
};

/// g_i^0 = grad f_i(x^0), h_i^0 = g_i^0, w^0 = x^0; Byzantine slots are
/// crafted from the initial view and g^0 aggregates all n slots.
AlgorithmState initialize(Method method, const Federation& fed, std::span<const double> x0,
                          const HyperParams& hp);

StepResult step_byz_vr_marina(const AlgorithmState& s, const Federation& fed, const HyperParams& hp);
StepResult step_byz_vr_marina2(const AlgorithmState& s, const Federation& fed, const HyperParams& hp);
StepResult step_byz_dasha_page(const AlgorithmState& s, const Federation& fed, const HyperParams& hp);
StepResult step_byz_ef21(const AlgorithmState& s, const Federation& fed, const HyperParams& hp);
StepResult step_byz_ef21_bc(const AlgorithmState& s, const Federation& fed, const HyperParams& hp);

StepResult step(Method method, const AlgorithmState& s, const Federation& fed, const HyperParams& hp);

/// Shared Bernoulli(p) coin for round t, drawn from the server's dedicated stream.
bool sync_coin(std::uint64_t seed, std::uint64_t t, double p);

// Default sync probability and momentum.
double default_p(Method method, double omega, std::size_t b, std::size_t m);
double default_momentum(double omega);

}  // namespace byzsim
