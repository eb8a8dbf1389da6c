#include "rewards.hpp"

namespace svrl {

int outcome_reward(const Trajectory& traj, const ProblemSpec& problem) {
    int last = traj.last_solve_index();
    if (last < 0) throw Error(ErrorCode::Usage, "trajectory has no solve action");
    return v_golden(traj.actions[last], problem) == Verdict::Correct ? 1 : -1;
}

int action_reward(const Trajectory& traj, std::size_t index, const ProblemSpec& problem) {
    if (index >= traj.actions.size())
        throw Error(ErrorCode::Usage, "action index out of range");
    const Action& action = traj.actions[index];
    switch (action.kind) {
        case ActionType::Solve:
            return v_golden(action, problem) == Verdict::Correct ? 1 : -1;
        case ActionType::Verify: {
            if (index == 0 || traj.actions[index - 1].kind != ActionType::Solve)
                throw Error(ErrorCode::Data, "verification without a preceding solve");
            if (!action.parsed_verdict)
                throw Error(ErrorCode::Data, "unparsed verdict");
            return *action.parsed_verdict == v_golden(traj.actions[index - 1], problem) ? 1
                                                                                        : -1;
        }
        case ActionType::End:
            throw Error(ErrorCode::Usage, "end markers carry no reward");
    }
    throw Error(ErrorCode::Internal, "unreachable");
}

RewardContext reward_context(const Trajectory& traj, std::size_t index,
                             const ProblemSpec& problem) {
    if (index > traj.actions.size())
        throw Error(ErrorCode::Usage, "action index out of range");
    RewardContext context;
    context.reserve(index);
    for (std::size_t i = 0; i < index; ++i) {
        if (traj.actions[i].kind == ActionType::End)
            throw Error(ErrorCode::Usage, "end marker precedes the indexed action");
        context.push_back(action_reward(traj, i, problem));
    }
    return context;
}

}  // namespace svrl
