#include "environment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace svrl {

ProblemSet::ProblemSet(std::vector<ProblemSpec> problems) : problems_(std::move(problems)) {
    for (std::size_t i = 0; i < problems_.size(); ++i) {
        const ProblemSpec& p = problems_[i];
        if (p.alphabet_size < 2)
            throw Error(ErrorCode::Data, "problem " + p.id + ": alphabet size must be >= 2");
        if (p.golden_answer < 0 || p.golden_answer >= p.alphabet_size)
            throw Error(ErrorCode::Data, "problem " + p.id + ": golden answer outside alphabet");
        if (p.difficulty_bin < 0)
            throw Error(ErrorCode::Data, "problem " + p.id + ": negative difficulty bin");
        if (!index_.emplace(p.id, i).second)
            throw Error(ErrorCode::Data, "duplicate problem id " + p.id);
    }
}

const ProblemSpec& ProblemSet::by_id(const std::string& id) const {
    return problems_[index_of(id)];
}

std::size_t ProblemSet::index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw Error(ErrorCode::Data, "unknown problem id " + id);
    return it->second;
}

int ProblemSet::num_bins() const {
    int max_bin = -1;
    for (const ProblemSpec& p : problems_) max_bin = std::max(max_bin, p.difficulty_bin);
    return max_bin + 1;
}

ProblemSet generate_problems(std::size_t count, int num_bins, int alphabet_size,
                             const std::vector<double>& bin_weights, std::uint64_t seed) {
    if (num_bins < 1) throw Error(ErrorCode::Usage, "num_bins must be >= 1");
    if (alphabet_size < 2) throw Error(ErrorCode::Usage, "alphabet_size must be >= 2");
    std::vector<double> weights = bin_weights;
    if (weights.empty()) weights.assign(num_bins, 1.0);
    if (static_cast<int>(weights.size()) != num_bins)
        throw Error(ErrorCode::Usage, "bin weight count must equal num_bins");
    for (double w : weights)
        if (!(w >= 0.0)) throw Error(ErrorCode::Usage, "bin weights must be non-negative");
    double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(total > 0.0)) throw Error(ErrorCode::Usage, "bin weights must sum to a positive value");

    // Largest-remainder apportionment: bin counts are exact, not sampled.
    std::vector<std::size_t> bin_counts(num_bins, 0);
    std::vector<std::pair<double, int>> remainders;
    std::size_t assigned = 0;
    for (int b = 0; b < num_bins; ++b) {
        double share = static_cast<double>(count) * weights[b] / total;
        bin_counts[b] = static_cast<std::size_t>(share);
        assigned += bin_counts[b];
        remainders.push_back({share - static_cast<double>(bin_counts[b]), b});
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < count; ++i, ++assigned)
        ++bin_counts[remainders[i % remainders.size()].second];

    std::vector<ProblemSpec> problems;
    problems.reserve(count);
    std::size_t index = 0;
    char id_buf[32];
    for (int b = 0; b < num_bins; ++b) {
        for (std::size_t j = 0; j < bin_counts[b]; ++j, ++index) {
            RandomSource rng(derive_seed(seed, index));
            ProblemSpec p;
            std::snprintf(id_buf, sizeof(id_buf), "p%06zu", index);
            p.id = id_buf;
            p.difficulty_bin = b;
            p.alphabet_size = alphabet_size;
            p.golden_answer = static_cast<Token>(rng.next_uint(alphabet_size));
            problems.push_back(std::move(p));
        }
    }
    return ProblemSet(std::move(problems));
}

SyntheticPolicy::SyntheticPolicy(std::vector<double> solve_logits,
                                 std::vector<double> verify_tp_logits,
                                 std::vector<double> verify_tn_logits)
    : solve_(std::move(solve_logits)), tp_(std::move(verify_tp_logits)),
      tn_(std::move(verify_tn_logits)) {
    if (solve_.empty() || solve_.size() != tp_.size() || solve_.size() != tn_.size())
        throw Error(ErrorCode::Usage, "policy logit vectors must be nonempty and equally sized");
    for (double v : to_params())
        if (!std::isfinite(v)) throw Error(ErrorCode::Numeric, "non-finite policy logit");
}

SyntheticPolicy SyntheticPolicy::constant(int num_bins, double solve_logit, double tp_logit,
                                          double tn_logit) {
    return SyntheticPolicy(std::vector<double>(num_bins, solve_logit),
                           std::vector<double>(num_bins, tp_logit),
                           std::vector<double>(num_bins, tn_logit));
}

double sigmoid(double x) { return 0.5 * (1.0 + std::tanh(0.5 * x)); }

double log_sigmoid(double x) {
    return x < 0.0 ? x - std::log1p(std::exp(x)) : -std::log1p(std::exp(-x));
}

double SyntheticPolicy::p_solve(int bin) const { return sigmoid(solve_.at(bin)); }
double SyntheticPolicy::p_verify_tp(int bin) const { return sigmoid(tp_.at(bin)); }
double SyntheticPolicy::p_verify_tn(int bin) const { return sigmoid(tn_.at(bin)); }

std::vector<double> SyntheticPolicy::to_params() const {
    std::vector<double> params;
    params.reserve(param_count());
    params.insert(params.end(), solve_.begin(), solve_.end());
    params.insert(params.end(), tp_.begin(), tp_.end());
    params.insert(params.end(), tn_.begin(), tn_.end());
    return params;
}

SyntheticPolicy SyntheticPolicy::from_params(const std::vector<double>& params) {
    if (params.empty() || params.size() % 3 != 0)
        throw Error(ErrorCode::Usage, "parameter vector size must be a positive multiple of 3");
    std::size_t d = params.size() / 3;
    return SyntheticPolicy(std::vector<double>(params.begin(), params.begin() + d),
                           std::vector<double>(params.begin() + d, params.begin() + 2 * d),
                           std::vector<double>(params.begin() + 2 * d, params.end()));
}

Verdict v_golden(const Action& solution, const ProblemSpec& problem) {
    if (solution.kind != ActionType::Solve)
        throw Error(ErrorCode::Usage, "v_golden requires a solve action");
    return *solution.answer_token == problem.golden_answer ? Verdict::Correct
                                                           : Verdict::Incorrect;
}

namespace {

int policy_bin(const SyntheticPolicy& policy, const ProblemSpec& problem) {
    if (problem.difficulty_bin >= policy.num_bins())
        throw Error(ErrorCode::Usage, "problem difficulty bin outside policy range");
    return problem.difficulty_bin;
}

}  // namespace

SampledTrajectory sample_trajectory(const SyntheticPolicy& policy, const ProblemSpec& problem,
                                    RandomSource& rng, int max_rounds) {
    if (max_rounds < 1) throw Error(ErrorCode::Usage, "max_rounds must be >= 1");
    const int bin = policy_bin(policy, problem);
    const double p_solve = policy.p_solve(bin);
    const double p_tp = policy.p_verify_tp(bin);
    const double p_tn = policy.p_verify_tn(bin);

    // Recorded log-probs reuse the exact expressions of action_log_prob so
    // that recompute-at-the-generating-policy reproduces them bitwise.
    const double theta_solve = policy.solve_logit(bin);
    const double theta_tp = policy.verify_tp_logit(bin);
    const double theta_tn = policy.verify_tn_logit(bin);

    SampledTrajectory out;
    out.trajectory.problem_id = problem.id;
    for (int round = 0; round < max_rounds; ++round) {
        const bool golden = rng.next_bernoulli(p_solve);
        Token token = problem.golden_answer;
        double logp = log_sigmoid(theta_solve);
        if (!golden) {
            // Uniform over the non-golden alphabet.
            std::uint64_t draw = rng.next_uint(problem.alphabet_size - 1);
            token = static_cast<Token>(draw);
            if (token >= problem.golden_answer) ++token;
            logp = log_sigmoid(-theta_solve) - std::log(problem.alphabet_size - 1.0);
        }
        out.trajectory.actions.push_back(Action::solve(token));
        out.action_logps.push_back(logp);

        const double p_correct_verdict = golden ? p_tp : 1.0 - p_tn;
        const bool verdict_correct = rng.next_bernoulli(p_correct_verdict);
        const double theta_verify = golden ? theta_tp : theta_tn;
        const bool sampled_head = golden ? verdict_correct : !verdict_correct;
        out.trajectory.actions.push_back(
            Action::verify(verdict_correct ? Verdict::Correct : Verdict::Incorrect));
        out.action_logps.push_back(sampled_head ? log_sigmoid(theta_verify)
                                                : log_sigmoid(-theta_verify));

        if (verdict_correct) {
            out.trajectory.actions.push_back(Action::end());
            out.action_logps.push_back(0.0);
            break;
        }
    }
    return out;
}

namespace {

// Shared outcome-model walk for log-probs and their gradients. For each
// action: checks the transition rule against the prefix, then reports the
// log-probability of the sampled outcome and its derivative.
struct OutcomeTerm {
    double logp = 0.0;
    std::size_t param = 0;   // parameter index of the nonzero derivative
    double dlogp = 0.0;      // derivative w.r.t. that parameter
};

OutcomeTerm action_outcome_term(const SyntheticPolicy& policy, const ProblemSpec& problem,
                                const Trajectory& traj, std::size_t index) {
    if (index >= traj.actions.size())
        throw Error(ErrorCode::Usage, "action index out of range");
    const int bin = policy_bin(policy, problem);
    const Action& action = traj.actions[index];

    const ActionType expected =
        index == 0 ? ActionType::Solve : next_action_type(traj.actions[index - 1]);
    if (action.kind != expected)
        throw Error(ErrorCode::Data, "action impossible under the transition rule");

    OutcomeTerm term;
    switch (action.kind) {
        case ActionType::Solve: {
            const double theta = policy.solve_logit(bin);
            const double p = sigmoid(theta);
            term.param = policy.solve_param(bin);
            if (*action.answer_token == problem.golden_answer) {
                term.logp = log_sigmoid(theta);
                term.dlogp = 1.0 - p;
            } else {
                if (*action.answer_token < 0 || *action.answer_token >= problem.alphabet_size)
                    throw Error(ErrorCode::Data, "answer token outside the problem alphabet");
                term.logp = log_sigmoid(-theta) - std::log(problem.alphabet_size - 1.0);
                term.dlogp = -p;
            }
            break;
        }
        case ActionType::Verify: {
            const bool preceding_correct =
                v_golden(traj.actions[index - 1], problem) == Verdict::Correct;
            const bool verdict_correct = *action.parsed_verdict == Verdict::Correct;
            const double theta =
                preceding_correct ? policy.verify_tp_logit(bin) : policy.verify_tn_logit(bin);
            term.param = preceding_correct ? policy.tp_param(bin) : policy.tn_param(bin);
            // tp is the probability of a "correct" verdict, tn of an
            // "incorrect" one; the sampled side decides the sign.
            const bool sampled_head = preceding_correct ? verdict_correct : !verdict_correct;
            const double p = sigmoid(theta);
            if (sampled_head) {
                term.logp = log_sigmoid(theta);
                term.dlogp = 1.0 - p;
            } else {
                term.logp = log_sigmoid(-theta);
                term.dlogp = -p;
            }
            break;
        }
        case ActionType::End:
            break;  // deterministic, zero log-prob, no gradient
    }
    return term;
}

}  // namespace

double action_log_prob(const SyntheticPolicy& policy, const ProblemSpec& problem,
                       const Trajectory& traj, std::size_t index) {
    return action_outcome_term(policy, problem, traj, index).logp;
}

void accumulate_action_log_prob_grad(const SyntheticPolicy& policy, const ProblemSpec& problem,
                                     const Trajectory& traj, std::size_t index,
                                     std::vector<double>& grad, double scale) {
    OutcomeTerm term = action_outcome_term(policy, problem, traj, index);
    grad.at(term.param) += scale * term.dlogp;
}

double trajectory_log_prob(const SyntheticPolicy& policy, const ProblemSpec& problem,
                           const Trajectory& traj) {
    double total = 0.0;
    for (std::size_t i = 0; i < traj.actions.size(); ++i)
        total += action_log_prob(policy, problem, traj, i);
    return total;
}

void accumulate_trajectory_log_prob_grad(const SyntheticPolicy& policy,
                                         const ProblemSpec& problem, const Trajectory& traj,
                                         std::vector<double>& grad, double scale) {
    for (std::size_t i = 0; i < traj.actions.size(); ++i)
        accumulate_action_log_prob_grad(policy, problem, traj, i, grad, scale);
}

double estimate_problem_accuracy(const SyntheticPolicy& policy, const ProblemSpec& problem,
                                 int n_samples, RandomSource& rng, int max_rounds) {
    if (n_samples < 1) throw Error(ErrorCode::Usage, "n_samples must be >= 1");
    int correct = 0;
    for (int i = 0; i < n_samples; ++i) {
        SampledTrajectory sample = sample_trajectory(policy, problem, rng, max_rounds);
        int last = sample.trajectory.last_solve_index();
        if (last >= 0 &&
            v_golden(sample.trajectory.actions[last], problem) == Verdict::Correct)
            ++correct;
    }
    return static_cast<double>(correct) / n_samples;
}

}  // namespace svrl
