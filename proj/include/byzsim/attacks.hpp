#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "byzsim/core.hpp"

namespace byzsim {

// Byzantine workers follow the protocol on whatever objective they were given.
struct NoAttack {};
// Submit the negation of the aggregand the worker would honestly have sent.
struct BitFlip {};
// Follow the protocol on a label-negated copy of the worker's data.
struct LabelFlip {};
// Submit -(z/G) times the sum of the honest aggregands.
struct InnerProductManipulation {
  double z = 0.1;
};
// Submit mean - z * std (coordinate-wise, population std) of the honest aggregands.
struct ALittleIsEnough {
  double z = 1.06;
};

using AttackKind =
    std::variant<NoAttack, BitFlip, LabelFlip, InnerProductManipulation, ALittleIsEnough>;

std::string describe(const AttackKind& attack);
bool flips_labels(const AttackKind& attack);

/// What an omniscient adversary sees in one round.
struct AdversaryView {
  // g_i^{t+1} of the honest workers, in worker order.
  std::span<const Vector> honest_aggregands;
  // The aggregand each Byzantine worker computed by running the honest protocol
  // on its own (possibly label-flipped) objective.
  std::span<const Vector> byz_protocol_aggregands;
  std::size_t num_byz = 0;
};

/// One forged aggregand per Byzantine worker.
std::vector<Vector> craft(const AttackKind& attack, const AdversaryView& view);

}  // namespace byzsim
