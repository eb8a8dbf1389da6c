#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "random.hpp"
#include "trajectory.hpp"

namespace svrl {

struct ProblemSpec {
    std::string id;
    int difficulty_bin = 0;
    Token golden_answer = 0;
    int alphabet_size = 2;
};

// Problem collection with id lookup.
class ProblemSet {
public:
    ProblemSet() = default;
    explicit ProblemSet(std::vector<ProblemSpec> problems);

    const std::vector<ProblemSpec>& items() const { return problems_; }
    std::size_t size() const { return problems_.size(); }
    bool empty() const { return problems_.empty(); }
    const ProblemSpec& at(std::size_t index) const { return problems_.at(index); }
    const ProblemSpec& by_id(const std::string& id) const;
    std::size_t index_of(const std::string& id) const;
    int num_bins() const;  // 1 + max difficulty_bin

private:
    std::vector<ProblemSpec> problems_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Deterministic synthetic problem generator. Problems are apportioned over
// difficulty bins by the given weights (uniform when empty) using largest
// remainders, so counts are exact; golden answers are drawn per problem from
// the seed.
ProblemSet generate_problems(std::size_t count, int num_bins, int alphabet_size,
                             const std::vector<double>& bin_weights, std::uint64_t seed);

// Tabular stochastic policy over trajectory outcomes, one logit per
// difficulty bin and decision kind:
//   solve:     P(golden answer)                    = sigmoid(solve_logit[d])
//   verify tp: P(verdict correct | solve correct)  = sigmoid(verify_tp_logit[d])
//   verify tn: P(verdict incorrect | solve wrong)  = sigmoid(verify_tn_logit[d])
// Wrong answers are uniform over the non-golden alphabet. Every probability
// is strictly inside (0,1) for finite logits, so all log-ratios stay finite,
// and every log-probability is differentiable in the logits in closed form.
class SyntheticPolicy {
public:
    SyntheticPolicy() = default;
    SyntheticPolicy(std::vector<double> solve_logits, std::vector<double> verify_tp_logits,
                    std::vector<double> verify_tn_logits);
    static SyntheticPolicy constant(int num_bins, double solve_logit, double tp_logit,
                                    double tn_logit);

    int num_bins() const { return static_cast<int>(solve_.size()); }

    double solve_logit(int bin) const { return solve_.at(bin); }
    double verify_tp_logit(int bin) const { return tp_.at(bin); }
    double verify_tn_logit(int bin) const { return tn_.at(bin); }

    double p_solve(int bin) const;
    double p_verify_tp(int bin) const;
    double p_verify_tn(int bin) const;

    // Flat parameter vector [solve..., verify_tp..., verify_tn...]; the
    // layout is shared by every gradient in the project.
    std::size_t param_count() const { return solve_.size() * 3; }
    std::vector<double> to_params() const;
    static SyntheticPolicy from_params(const std::vector<double>& params);
    std::size_t solve_param(int bin) const { return static_cast<std::size_t>(bin); }
    std::size_t tp_param(int bin) const { return solve_.size() + bin; }
    std::size_t tn_param(int bin) const { return 2 * solve_.size() + bin; }

    bool operator==(const SyntheticPolicy&) const = default;

private:
    std::vector<double> solve_;
    std::vector<double> tp_;
    std::vector<double> tn_;
};

double sigmoid(double x);
double log_sigmoid(double x);

// Ground-truth validation: does a solve action match the golden answer?
Verdict v_golden(const Action& solution, const ProblemSpec& problem);

// A sampled trajectory with the log-probability of each action's sampled
// outcome under the generating policy (0 for the deterministic end marker).
struct SampledTrajectory {
    Trajectory trajectory;
    std::vector<double> action_logps;
};

// Samples one trajectory under the transition rule: solve, verify, then end
// on a correct verdict or another round on an incorrect one. Stops
// unterminated after max_rounds solve/verify pairs. Verification text is
// rendered from the sampled verdict so the text parser is exercised
// end-to-end.
SampledTrajectory sample_trajectory(const SyntheticPolicy& policy, const ProblemSpec& problem,
                                    RandomSource& rng, int max_rounds);

// Log-probability of the action at `index` given its prefix; end markers and
// other forced transitions contribute zero. Throws on actions impossible
// under the transition rule.
double action_log_prob(const SyntheticPolicy& policy, const ProblemSpec& problem,
                       const Trajectory& traj, std::size_t index);

// Adds scale * d(log P(action index))/d(params) into grad.
void accumulate_action_log_prob_grad(const SyntheticPolicy& policy, const ProblemSpec& problem,
                                     const Trajectory& traj, std::size_t index,
                                     std::vector<double>& grad, double scale);

// log pi(y | x): sum of per-action log-probabilities.
double trajectory_log_prob(const SyntheticPolicy& policy, const ProblemSpec& problem,
                           const Trajectory& traj);

void accumulate_trajectory_log_prob_grad(const SyntheticPolicy& policy,
                                         const ProblemSpec& problem, const Trajectory& traj,
                                         std::vector<double>& grad, double scale);

// Fraction of n_samples trajectories whose last solve matches the golden
// answer.
double estimate_problem_accuracy(const SyntheticPolicy& policy, const ProblemSpec& problem,
                                 int n_samples, RandomSource& rng, int max_rounds);

}  // namespace svrl
