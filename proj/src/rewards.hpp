#pragma once

#include <vector>

#include "environment.hpp"
#include "trajectory.hpp"

namespace svrl {

// Rewards are exactly +1/-1; any KL shaping lives in the advantage, never
// here. End markers carry no reward.

// The reward sequence of all actions strictly preceding a given action.
// Exact-equality grouping key for process-level baselines; its length equals
// the 0-based index of the action it belongs to.
using RewardContext = std::vector<int>;

// Outcome reward R_o: +1 iff the last solve matches the golden answer. Works
// on truncated trajectories too (last emitted solve decides). Throws when the
// trajectory has no solve action.
int outcome_reward(const Trajectory& traj, const ProblemSpec& problem);

// Action reward R_a at a 0-based index: a solve earns +1 iff golden-correct;
// a verification earns +1 iff its verdict agrees with the actual correctness
// of the immediately preceding solve. Throws on end markers and bad indices.
int action_reward(const Trajectory& traj, std::size_t index, const ProblemSpec& problem);

// Rewards of actions [0, index), in order. Throws if an end marker precedes
// the indexed position.
RewardContext reward_context(const Trajectory& traj, std::size_t index,
                             const ProblemSpec& problem);

}  // namespace svrl
