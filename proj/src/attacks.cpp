#include "byzsim/attacks.hpp"

#include <cmath>

namespace byzsim {

std::string describe(const AttackKind& attack) {
  struct V {
    std::string operator()(const NoAttack&) const { return "none"; }
    std::string operator()(const BitFlip&) const { return "bf"; }
    std::string operator()(const LabelFlip&) const { return "lf"; }
    std::string operator()(const InnerProductManipulation& a) const {
      return "ipm(z=" + std::to_string(a.z) + ")";
    }
    std::string operator()(const ALittleIsEnough& a) const {
      return "alie(z=" + std::to_string(a.z) + ")";
    }
  };
  return std::visit(V{}, attack);
}

bool flips_labels(const AttackKind& attack) { return std::holds_alternative<LabelFlip>(attack); }

namespace {

void require_protocol_aggregands(const AdversaryView& view) {
  if (view.byz_protocol_aggregands.size() != view.num_byz) {
    throw ArgumentError("craft: expected one protocol aggregand per Byzantine worker");
  }
}

}  // namespace

std::vector<Vector> craft(const AttackKind& attack, const AdversaryView& view) {
  if (view.num_byz == 0) return {};
  if (view.honest_aggregands.empty()) throw ArgumentError("craft: no honest aggregands");

  if (std::holds_alternative<NoAttack>(attack) || std::holds_alternative<LabelFlip>(attack)) {
    require_protocol_aggregands(view);
    return {view.byz_protocol_aggregands.begin(), view.byz_protocol_aggregands.end()};
  }
  if (std::holds_alternative<BitFlip>(attack)) {
    require_protocol_aggregands(view);
    std::vector<Vector> out;
    out.reserve(view.num_byz);
    for (const auto& v : view.byz_protocol_aggregands) out.push_back(scaled(-1.0, v));
    return out;
  }

  const auto& honest = view.honest_aggregands;
  const std::size_t d = honest.front().size();
  const double G = static_cast<double>(honest.size());
  Vector forged(d, 0.0);
  if (const auto* ipm = std::get_if<InnerProductManipulation>(&attack)) {
    for (const auto& v : honest) axpy(1.0, v, forged);
    for (double& v : forged) v *= -ipm->z / G;
  } else {
    const double z = std::get<ALittleIsEnough>(attack).z;
    const Vector mu = mean_of(honest);
    Vector var(d, 0.0);
    for (const auto& v : honest) {
      for (std::size_t j = 0; j < d; ++j) {
        const double t = v[j] - mu[j];
        var[j] += t * t;
      }
    }
    for (std::size_t j = 0; j < d; ++j) forged[j] = mu[j] - z * std::sqrt(var[j] / G);
  }
  // Coordinated: every Byzantine worker submits the same vector.
  return std::vector<Vector>(view.num_byz, forged);
}

}  // namespace byzsim
