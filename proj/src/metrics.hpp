#pragma once

#include <map>
#include <optional>
#include <vector>

#include "environment.hpp"
#include "trajectory.hpp"

namespace svrl {

// Verification/correction metric suite. Every rate carries its raw counts,
// and a rate with a zero denominator is reported absent, never 0 or NaN.

struct RateCount {
    long long numerator = 0;
    long long denominator = 0;

    std::optional<double> rate() const {
        if (denominator == 0) return std::nullopt;
        return static_cast<double>(numerator) / static_cast<double>(denominator);
    }
};

struct MetricsReport {
    RateCount verification_accuracy;     // verdict matches ground truth
    RateCount error_recall;              // wrong answers flagged incorrect
    RateCount correct_precision;         // "correct" verdicts that are right
    RateCount incorrect_to_correct;      // first solve wrong, last solve right
    RateCount correct_to_incorrect;      // first solve right, last solve wrong
    std::map<int, double> avg_trials_by_difficulty;  // bin -> mean solve count
    std::map<int, long long> trajectories_by_difficulty;
    long long trajectory_count = 0;
};

// Aggregates the suite over an evaluation set. Trajectories may be
// truncated; the last emitted solve stands in for the final attempt.
MetricsReport compute_metrics(const std::vector<Trajectory>& evalset,
                              const ProblemSet& problems);

}  // namespace svrl
