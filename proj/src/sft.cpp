#include "sft.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace svrl {

std::vector<DifficultyBucket> default_buckets() {
    return {{0.75, 1.0, 1}, {0.5, 0.75, 2}, {0.25, 0.5, 3}, {0.0, 0.25, 4}};
}

void check_buckets(const std::vector<DifficultyBucket>& buckets) {
    if (buckets.empty()) throw Error(ErrorCode::Usage, "no difficulty buckets configured");
    std::vector<DifficultyBucket> sorted = buckets;
    std::sort(sorted.begin(), sorted.end(),
              [](const DifficultyBucket& a, const DifficultyBucket& b) { return a.lo < b.lo; });
    double edge = 0.0;
    for (const DifficultyBucket& b : sorted) {
        if (b.lo != edge || b.hi <= b.lo)
            throw Error(ErrorCode::Usage, "difficulty buckets must partition [0,1]");
        if (b.rounds < 1) throw Error(ErrorCode::Usage, "bucket rounds must be >= 1");
        edge = b.hi;
    }
    if (edge != 1.0) throw Error(ErrorCode::Usage, "difficulty buckets must partition [0,1]");
}

int bucket_rounds(double accuracy, const std::vector<DifficultyBucket>& buckets) {
    if (accuracy < 0.0 || accuracy > 1.0)
        throw Error(ErrorCode::Usage, "accuracy outside [0,1]");
    for (const DifficultyBucket& b : buckets) {
        if (accuracy >= b.lo && (accuracy < b.hi || (b.hi == 1.0 && accuracy == 1.0)))
            return b.rounds;
    }
    throw Error(ErrorCode::Usage, "difficulty buckets do not cover the accuracy");
}

std::vector<bool> sft_mask(const Trajectory& traj) {
    const int last_solve = traj.last_solve_index();
    std::vector<bool> mask(traj.actions.size(), false);
    for (std::size_t i = 0; i < traj.actions.size(); ++i) {
        switch (traj.actions[i].kind) {
            case ActionType::Verify:
            case ActionType::End:
                mask[i] = true;
                break;
            case ActionType::Solve:
                mask[i] = (static_cast<int>(i) == last_solve);
                break;
        }
    }
    return mask;
}

SftExample assemble_sft_example(const std::vector<Action>& failed_solves,
                                const Action& final_solve,
                                const std::vector<Action>& verifications,
                                const ProblemSpec& problem) {
    const std::size_t k = verifications.size();
    if (k == 0 || failed_solves.size() != k - 1)
        throw Error(ErrorCode::Usage, "need k verifications and k-1 failed solves");

    std::set<Token> seen;
    auto check_solve = [&](const Action& s, bool expect_correct, const Action& v) {
        if (s.kind != ActionType::Solve || v.kind != ActionType::Verify)
            throw Error(ErrorCode::Usage, "solve/verify action of the wrong kind");
        const Verdict actual = v_golden(s, problem);
        if ((actual == Verdict::Correct) != expect_correct)
            throw Error(ErrorCode::Data, expect_correct
                                             ? "final solve is not golden-correct"
                                             : "failed solve is golden-correct");
        if (v.parsed_verdict != actual)
            throw Error(ErrorCode::Data, "verification label mismatch");
        if (!seen.insert(*s.answer_token).second)
            throw Error(ErrorCode::Data, "answers not distinct");
    };

    SftExample example;
    example.trajectory.problem_id = problem.id;
    for (std::size_t j = 0; j + 1 < k; ++j) {
        check_solve(failed_solves[j], false, verifications[j]);
        example.trajectory.actions.push_back(failed_solves[j]);
        example.trajectory.actions.push_back(verifications[j]);
    }
    check_solve(final_solve, true, verifications[k - 1]);
    example.trajectory.actions.push_back(final_solve);
    example.trajectory.actions.push_back(verifications[k - 1]);
    example.trajectory.actions.push_back(Action::end());
    example.mask = sft_mask(example.trajectory);
    return example;
}

SftBuildResult build_sft_dataset(const SyntheticPolicy& policy, const ProblemSet& problems,
                                 const SftBuildOptions& options, std::uint64_t seed) {
    check_buckets(options.buckets);
    if (options.samples_per_problem < 1)
        throw Error(ErrorCode::Usage, "samples_per_problem must be >= 1");
    if (problems.num_bins() > policy.num_bins())
        throw Error(ErrorCode::Usage, "policy has fewer difficulty bins than the problem set");

    SftBuildResult result;
    for (std::size_t pi = 0; pi < problems.size(); ++pi) {
        const ProblemSpec& problem = problems.at(pi);
        RandomSource rng(derive_seed(seed, pi));
        const int bin = problem.difficulty_bin;
        const double p = policy.p_solve(bin);

        // Accuracy from the problem's own solve samples; wrong draws double
        // as failed-attempt candidates.
        int correct = 0;
        std::vector<Token> wrong_draws;
        auto draw_solve = [&]() -> Token {
            if (rng.next_bernoulli(p)) return problem.golden_answer;
            Token t = static_cast<Token>(rng.next_uint(problem.alphabet_size - 1));
            if (t >= problem.golden_answer) ++t;
            return t;
        };
        for (int s = 0; s < options.samples_per_problem; ++s) {
            Token t = draw_solve();
            if (t == problem.golden_answer)
                ++correct;
            else
                wrong_draws.push_back(t);
        }
        const double accuracy =
            static_cast<double>(correct) / options.samples_per_problem;
        result.estimated_accuracy[problem.id] = accuracy;
        const int k = bucket_rounds(accuracy, options.buckets);

        if (k > problem.alphabet_size) {
            // k distinct answers (k-1 wrong plus the golden one) cannot exist.
            ++result.skipped_small_alphabet;
            continue;
        }

        bool have_correct = correct > 0;
        for (int r = 0; !have_correct && r < options.retry_budget; ++r) {
            Token t = draw_solve();
            if (t == problem.golden_answer)
                have_correct = true;
            else
                wrong_draws.push_back(t);
        }
        if (!have_correct) {
            ++result.skipped_no_correct;
            continue;
        }

        // k-1 distinct failed attempts, preferring the sampled ones and
        // falling back on the policy's uniform wrong-answer distribution.
        std::vector<Token> failures;
        std::set<Token> used;
        for (Token t : wrong_draws) {
            if (static_cast<int>(failures.size()) >= k - 1) break;
            if (used.insert(t).second) failures.push_back(t);
        }
        while (static_cast<int>(failures.size()) < k - 1) {
            Token t = static_cast<Token>(rng.next_uint(problem.alphabet_size - 1));
            if (t >= problem.golden_answer) ++t;
            if (used.insert(t).second) failures.push_back(t);
        }

        std::vector<Action> failed_solves;
        std::vector<Action> verifications;
        for (Token t : failures) {
            failed_solves.push_back(Action::solve(t));
            verifications.push_back(Action::verify(Verdict::Incorrect));
        }
        verifications.push_back(Action::verify(Verdict::Correct));
        result.examples.push_back(assemble_sft_example(
            failed_solves, Action::solve(problem.golden_answer), verifications, problem));
    }
    return result;
}

LossGrad sft_loss(const SyntheticPolicy& policy, const std::vector<SftExample>& dataset,
                  const ProblemSet& problems) {
    if (dataset.empty()) throw Error(ErrorCode::Usage, "empty SFT dataset");
    LossGrad out;
    out.grad.assign(policy.param_count(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(dataset.size());
    for (const SftExample& example : dataset) {
        const ProblemSpec& problem = problems.by_id(example.trajectory.problem_id);
        if (example.mask.size() != example.trajectory.actions.size())
            throw Error(ErrorCode::Data, "mask length does not match action count");
        for (std::size_t t = 0; t < example.mask.size(); ++t) {
            if (!example.mask[t]) continue;
            out.value -= inv_n * action_log_prob(policy, problem, example.trajectory, t);
            accumulate_action_log_prob_grad(policy, problem, example.trajectory, t, out.grad,
                                            -inv_n);
        }
    }
    if (!std::isfinite(out.value))
        throw Error(ErrorCode::Numeric, "non-finite SFT loss");
    return out;
}

}  // namespace svrl
