#include "offline.hpp"

#include <algorithm>
#include <cmath>

namespace svrl {

std::string_view offline_baseline_mode_name(OfflineBaselineMode mode) {
    switch (mode) {
        case OfflineBaselineMode::PositionGroup: return "position_group";
        case OfflineBaselineMode::RewardContextGroup: return "reward_context_group";
        case OfflineBaselineMode::PlainRewardContext: return "plain_reward_context";
    }
    return "unknown";
}

OfflineBaselineMode offline_baseline_mode_from_name(std::string_view name) {
    if (name == "position_group") return OfflineBaselineMode::PositionGroup;
    if (name == "reward_context_group") return OfflineBaselineMode::RewardContextGroup;
    if (name == "plain_reward_context") return OfflineBaselineMode::PlainRewardContext;
    throw Error(ErrorCode::Usage, "unknown baseline mode '" + std::string(name) + "'");
}

std::vector<std::string> filter_prompts(const std::map<std::string, double>& accuracies,
                                        double lo, double hi) {
    if (!(lo >= 0.0 && lo < hi && hi <= 1.0))
        throw Error(ErrorCode::Usage, "filter range must satisfy 0 <= lo < hi <= 1");
    std::vector<std::string> retained;
    for (const auto& [id, accuracy] : accuracies)
        if (accuracy >= lo && accuracy <= hi) retained.push_back(id);
    return retained;
}

int RejectionReport::total() const {
    int n = 0;
    for (const auto& [reason, count] : counts) n += count;
    return n;
}

std::vector<Trajectory> reject_offline(const std::vector<Trajectory>& batch,
                                       const ProblemSet& problems, int max_actions,
                                       RejectionReport& report) {
    std::vector<Trajectory> kept;
    kept.reserve(batch.size());
    for (const Trajectory& traj : batch) {
        const ProblemSpec& problem = problems.by_id(traj.problem_id);
        ValidationResult result =
            validate_trajectory(traj, max_actions, problem.golden_answer);
        if (result.accepted())
            kept.push_back(traj);
        else
            ++report.counts[std::string(reject_reason_name(*result.reason))];
    }
    return kept;
}

std::vector<AccuracyBin> bin_by_accuracy(const ProblemSet& problems,
                                         const std::map<std::string, double>& accuracies,
                                         double bin_width) {
    std::map<int, AccuracyBin> bins;
    for (std::size_t pi = 0; pi < problems.size(); ++pi) {
        const std::string& id = problems.at(pi).id;
        const int index = accuracy_bin_index(accuracies.at(id), bin_width);
        AccuracyBin& bin = bins[index];
        if (bin.problem_ids.empty()) {
            bin.index = index;
            bin.lo = index * bin_width;
            bin.hi = bin.lo + bin_width;
        }
        bin.problem_ids.push_back(id);
    }
    std::vector<AccuracyBin> out;
    out.reserve(bins.size());
    for (auto& [index, bin] : bins) out.push_back(std::move(bin));
    return out;
}

int accuracy_bin_index(double accuracy, double bin_width) {
    if (!(bin_width > 0.0 && bin_width <= 1.0))
        throw Error(ErrorCode::Usage, "bin width must lie in (0,1]");
    const int num_bins = static_cast<int>(std::lround(1.0 / bin_width));
    if (std::abs(num_bins * bin_width - 1.0) > 1e-9)
        throw Error(ErrorCode::Usage, "bin width must divide [0,1] evenly");
    if (accuracy < 0.0 || accuracy > 1.0)
        throw Error(ErrorCode::Usage, "accuracy outside [0,1]");
    return std::min(static_cast<int>(accuracy / bin_width), num_bins - 1);
}

double baseline_position(const OfflineStore& store, const AccuracyBin& bin,
                         std::size_t step_index) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t ei : bin.entry_indices) {
        const OfflineEntry& entry = store.entries[ei];
        const auto& actions = entry.sample.trajectory.actions;
        if (step_index < actions.size() && actions[step_index].kind != ActionType::End) {
            sum += entry.action_rewards[step_index];
            ++count;
        }
    }
    if (count == 0) throw Error(ErrorCode::Data, "empty position group");
    return sum / static_cast<double>(count);
}

double baseline_accuracy_context(const OfflineStore& store, const AccuracyBin& bin,
                                 const RewardContext& context, const ProblemSet& problems) {
    (void)problems;
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t ei : bin.entry_indices) {
        const OfflineEntry& entry = store.entries[ei];
        const auto& actions = entry.sample.trajectory.actions;
        RewardContext running;
        for (std::size_t ai = 0; ai < actions.size(); ++ai) {
            if (actions[ai].kind == ActionType::End) break;
            if (running == context) {
                sum += entry.action_rewards[ai];
                ++count;
            }
            running.push_back(entry.action_rewards[ai]);
        }
    }
    if (count == 0) throw Error(ErrorCode::Data, "empty accuracy-context group");
    return sum / static_cast<double>(count);
}

OfflineStore build_offline_store(const SyntheticPolicy& policy, const ProblemSet& problems,
                                 const OfflineConfig& config, std::uint64_t seed) {
    if (config.samples_per_prompt < 1)
        throw Error(ErrorCode::Usage, "samples_per_prompt must be >= 1");
    OfflineStore store;

    // Sampling pass; prompt accuracy comes from these same samples.
    std::vector<std::vector<SampledTrajectory>> samples(problems.size());
    for (std::size_t pi = 0; pi < problems.size(); ++pi) {
        const ProblemSpec& problem = problems.at(pi);
        int correct = 0;
        for (int m = 0; m < config.samples_per_prompt; ++m) {
            RandomSource rng(derive_seed(seed, pi, m));
            SampledTrajectory sample =
                sample_trajectory(policy, problem, rng, config.max_rounds);
            const int last = sample.trajectory.last_solve_index();
            if (last >= 0 &&
                v_golden(sample.trajectory.actions[last], problem) == Verdict::Correct)
                ++correct;
            samples[pi].push_back(std::move(sample));
        }
        store.problem_accuracy[problem.id] =
            static_cast<double>(correct) / config.samples_per_prompt;
    }

    std::vector<std::string> retained =
        filter_prompts(store.problem_accuracy, config.filter_lo, config.filter_hi);
    store.filtered_prompts =
        static_cast<int>(problems.size()) - static_cast<int>(retained.size());

    // Rejection sampling, then binning of the survivors.
    std::map<int, AccuracyBin> bins;
    for (const std::string& id : retained) {
        const std::size_t pi = problems.index_of(id);
        const ProblemSpec& problem = problems.at(pi);
        const double accuracy = store.problem_accuracy.at(id);
        const int bin_index = accuracy_bin_index(accuracy, config.bin_width);
        AccuracyBin& bin = bins[bin_index];
        if (bin.problem_ids.empty() && bin.entry_indices.empty()) {
            bin.index = bin_index;
            bin.lo = bin_index * config.bin_width;
            bin.hi = bin.lo + config.bin_width;
        }
        bin.problem_ids.push_back(id);
        for (SampledTrajectory& sample : samples[pi]) {
            ValidationResult validation = validate_trajectory(
                sample.trajectory, config.max_actions, problem.golden_answer);
            if (!validation.accepted()) {
                ++store.rejection_counts[std::string(reject_reason_name(*validation.reason))];
                continue;
            }
            OfflineEntry entry;
            entry.problem_id = id;
            entry.problem_index = pi;
            entry.bin = bin_index;
            entry.sample = std::move(sample);
            entry.action_rewards.reserve(entry.sample.trajectory.actions.size());
            for (std::size_t ai = 0; ai < entry.sample.trajectory.actions.size(); ++ai)
                entry.action_rewards.push_back(
                    entry.sample.trajectory.actions[ai].kind == ActionType::End
                        ? 0
                        : action_reward(entry.sample.trajectory, ai, problem));
            bin.entry_indices.push_back(store.entries.size());
            store.entries.push_back(std::move(entry));
        }
    }
    for (auto& [index, bin] : bins) store.bins.push_back(std::move(bin));
    if (store.entries.empty())
        throw Error(ErrorCode::Data, "no training data after filtering");
    return store;
}

namespace {

struct MeanTable {
    std::map<std::vector<int>, std::pair<double, std::size_t>> cells;

    void add(std::vector<int> key, int reward) {
        auto& cell = cells[std::move(key)];
        cell.first += reward;
        cell.second += 1;
    }
    const std::pair<double, std::size_t>* find(const std::vector<int>& key) const {
        auto it = cells.find(key);
        return it == cells.end() ? nullptr : &it->second;
    }
};

// Precomputed store-wide baseline tables; keys embed the bin index where the
// mode calls for it.
struct BaselineTables {
    std::map<int, std::pair<double, std::size_t>> bin_return;  // outcome mode
    MeanTable position;       // key: [bin, step_index]
    MeanTable bin_context;    // key: [bin, context...]
    MeanTable plain_context;  // key: [context...]
};

BaselineTables build_tables(const OfflineStore& store, const ProblemSet& problems) {
    BaselineTables tables;
    for (const OfflineEntry& entry : store.entries) {
        const ProblemSpec& problem = problems.at(entry.problem_index);
        auto& ret = tables.bin_return[entry.bin];
        ret.first += outcome_reward(entry.sample.trajectory, problem);
        ret.second += 1;
        const auto& actions = entry.sample.trajectory.actions;
        std::vector<int> context;
        for (std::size_t ai = 0; ai < actions.size(); ++ai) {
            if (actions[ai].kind == ActionType::End) break;
            const int reward = entry.action_rewards[ai];
            tables.position.add({entry.bin, static_cast<int>(ai)}, reward);
            std::vector<int> bin_key;
            bin_key.push_back(entry.bin);
            bin_key.insert(bin_key.end(), context.begin(), context.end());
            tables.bin_context.add(std::move(bin_key), reward);
            tables.plain_context.add(context, reward);
            context.push_back(reward);
        }
    }
    return tables;
}

double process_baseline(const BaselineTables& tables, const OfflineConfig& config, int bin,
                        std::size_t step_index, const std::vector<int>& context, int reward) {
    auto mean = [](const std::pair<double, std::size_t>* cell) {
        return cell->first / static_cast<double>(cell->second);
    };
    switch (config.baseline_mode) {
        case OfflineBaselineMode::PositionGroup: {
            if (const auto* cell = tables.position.find({bin, static_cast<int>(step_index)}))
                return mean(cell);
            break;
        }
        case OfflineBaselineMode::RewardContextGroup: {
            std::vector<int> key;
            key.push_back(bin);
            key.insert(key.end(), context.begin(), context.end());
            if (const auto* cell = tables.bin_context.find(key)) return mean(cell);
            // Fall back on the position group; an exhausted fallback zeroes
            // the advantage.
            if (const auto* cell = tables.position.find({bin, static_cast<int>(step_index)}))
                return mean(cell);
            break;
        }
        case OfflineBaselineMode::PlainRewardContext: {
            if (const auto* cell = tables.plain_context.find(context)) return mean(cell);
            break;
        }
    }
    return reward;  // zero advantage
}

}  // namespace

OfflineStepReport offline_train_step(OfflineTrainState& state, const OfflineStore& store,
                                     std::size_t begin, std::size_t end,
                                     const ProblemSet& problems, const OfflineConfig& config,
                                     OfflineMode mode) {
    if (begin >= end || end > store.entries.size())
        throw Error(ErrorCode::Usage, "bad minibatch bounds");
    const BaselineTables tables = build_tables(store, problems);

    OfflineStepReport report;
    report.step = state.step;
    const double warmup =
        config.warmup_steps <= 0
            ? 1.0
            : std::min(1.0, static_cast<double>(state.step + 1) / config.warmup_steps);
    report.learning_rate = config.learning_rate * warmup;
    for (const auto& [bin, cell] : tables.bin_return)
        report.bin_mean_return[bin] = cell.first / static_cast<double>(cell.second);

    const double eps = config.clip_range;
    const double beta = config.kl_coefficient;
    LossGrad loss;
    loss.grad.assign(state.policy.param_count(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(end - begin);
    std::size_t clip_units = 0, total_units = 0;
    double advantage_sum = 0.0;

    for (std::size_t ei = begin; ei < end; ++ei) {
        const OfflineEntry& entry = store.entries[ei];
        const ProblemSpec& problem = problems.at(entry.problem_index);
        const Trajectory& traj = entry.sample.trajectory;
        report.mean_reward += outcome_reward(traj, problem);
        report.accuracy += outcome_reward(traj, problem) > 0 ? 1.0 : 0.0;
        {
            double lp_old_full = 0.0;
            for (double v : entry.sample.action_logps) lp_old_full += v;
            report.kl += lp_old_full - trajectory_log_prob(state.reference, problem, traj);
        }

        if (mode == OfflineMode::Outcome) {
            double lp_old = 0.0;
            for (double v : entry.sample.action_logps) lp_old += v;
            const double lp_ref = trajectory_log_prob(state.reference, problem, traj);
            const double baseline =
                tables.bin_return.at(entry.bin).first /
                static_cast<double>(tables.bin_return.at(entry.bin).second);
            const double adv =
                outcome_reward(traj, problem) - baseline - beta * (lp_old - lp_ref);
            advantage_sum += adv;
            const double ratio =
                std::exp(trajectory_log_prob(state.policy, problem, traj) - lp_old);
            const double unclipped = ratio * adv;
            const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * adv;
            loss.value -= inv_n * std::min(unclipped, clipped);
            if (unclipped <= clipped)
                accumulate_trajectory_log_prob_grad(state.policy, problem, traj, loss.grad,
                                                    -inv_n * ratio * adv);
            ++total_units;
            if (ratio < 1.0 - eps || ratio > 1.0 + eps) ++clip_units;
        } else {
            int action_count = 0;
            for (const Action& a : traj.actions)
                if (a.kind != ActionType::End) ++action_count;
            if (action_count == 0) continue;
            const double traj_weight = inv_n / static_cast<double>(action_count);
            std::vector<int> context;
            for (std::size_t ai = 0; ai < traj.actions.size(); ++ai) {
                if (traj.actions[ai].kind == ActionType::End) break;
                const int reward = entry.action_rewards[ai];
                const double baseline =
                    process_baseline(tables, config, entry.bin, ai, context, reward);
                const double lp_old = entry.sample.action_logps[ai];
                const double lp_ref = action_log_prob(state.reference, problem, traj, ai);
                const double adv = reward - baseline - beta * (lp_old - lp_ref);
                advantage_sum += adv;
                const double ratio =
                    std::exp(action_log_prob(state.policy, problem, traj, ai) - lp_old);
                const double unclipped = ratio * adv;
                const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * adv;
                loss.value -= traj_weight * std::min(unclipped, clipped);
                if (unclipped <= clipped)
                    accumulate_action_log_prob_grad(state.policy, problem, traj, ai,
                                                    loss.grad, -traj_weight * ratio * adv);
                ++total_units;
                if (ratio < 1.0 - eps || ratio > 1.0 + eps) ++clip_units;
                context.push_back(reward);
            }
        }
    }
    if (!std::isfinite(loss.value))
        throw Error(ErrorCode::Numeric, "non-finite offline loss");

    report.loss = loss.value;
    report.mean_reward /= static_cast<double>(end - begin);
    report.accuracy /= static_cast<double>(end - begin);
    report.kl /= static_cast<double>(end - begin);
    report.mean_advantage =
        total_units == 0 ? 0.0 : advantage_sum / static_cast<double>(total_units);
    report.clip_fraction =
        total_units == 0 ? 0.0
                         : static_cast<double>(clip_units) / static_cast<double>(total_units);
    apply_gradient_step(state.policy, loss.grad, report.learning_rate);
    ++state.step;
    return report;
}

OfflineIterationReport offline_iteration(OfflineTrainState& state, const ProblemSet& problems,
                                         const OfflineConfig& config, OfflineMode mode,
                                         std::uint64_t seed) {
    OfflineIterationReport report;
    state.sampling = state.policy;
    report.store = build_offline_store(state.sampling, problems, config, seed);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t begin = 0; begin < report.store.entries.size();
             begin += config.batch_size) {
            const std::size_t end =
                std::min(begin + config.batch_size, report.store.entries.size());
            report.steps.push_back(offline_train_step(state, report.store, begin, end,
                                                      problems, config, mode));
        }
    }
    return report;
}

}  // namespace svrl
