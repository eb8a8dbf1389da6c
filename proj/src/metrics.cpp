#include "metrics.hpp"

#include "rewards.hpp"

namespace svrl {

MetricsReport compute_metrics(const std::vector<Trajectory>& evalset,
                              const ProblemSet& problems) {
    MetricsReport report;
    std::map<int, std::pair<long long, long long>> trials;  // bin -> (solves, trajectories)

    for (const Trajectory& traj : evalset) {
        const ProblemSpec& problem = problems.by_id(traj.problem_id);
        ++report.trajectory_count;

        // Attempt pairs (s_t, v_t): every verify is judged against its
        // preceding solve.
        for (std::size_t i = 0; i < traj.actions.size(); ++i) {
            if (traj.actions[i].kind != ActionType::Verify) continue;
            if (i == 0 || traj.actions[i - 1].kind != ActionType::Solve)
                throw Error(ErrorCode::Data, "verification without a preceding solve");
            const Verdict truth = v_golden(traj.actions[i - 1], problem);
            if (!traj.actions[i].parsed_verdict)
                throw Error(ErrorCode::Data, "unparsed verdict");
            const Verdict predicted = *traj.actions[i].parsed_verdict;

            ++report.verification_accuracy.denominator;
            if (predicted == truth) ++report.verification_accuracy.numerator;

            if (truth == Verdict::Incorrect) {
                ++report.error_recall.denominator;
                if (predicted == Verdict::Incorrect) ++report.error_recall.numerator;
            }
            if (predicted == Verdict::Correct) {
                ++report.correct_precision.denominator;
                if (truth == Verdict::Correct) ++report.correct_precision.numerator;
            }
        }

        // Self-correction rates over first and last solve.
        int first_solve = -1;
        for (std::size_t i = 0; i < traj.actions.size(); ++i)
            if (traj.actions[i].kind == ActionType::Solve) {
                first_solve = static_cast<int>(i);
                break;
            }
        if (first_solve < 0)
            throw Error(ErrorCode::Data, "trajectory has no solve action");
        const bool first_right =
            v_golden(traj.actions[first_solve], problem) == Verdict::Correct;
        const bool last_right = outcome_reward(traj, problem) > 0;
        if (!first_right) {
            ++report.incorrect_to_correct.denominator;
            if (last_right) ++report.incorrect_to_correct.numerator;
        } else {
            ++report.correct_to_incorrect.denominator;
            if (!last_right) ++report.correct_to_incorrect.numerator;
        }

        auto& [solves, count] = trials[problem.difficulty_bin];
        solves += traj.solve_count();
        ++count;
    }

    for (const auto& [bin, cell] : trials) {
        report.avg_trials_by_difficulty[bin] =
            static_cast<double>(cell.first) / static_cast<double>(cell.second);
        report.trajectories_by_difficulty[bin] = cell.second;
    }
    return report;
}

}  // namespace svrl
