#pragma once

#include "longtail/balancing.hpp"
#include "longtail/data.hpp"
#include "longtail/head.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace longtail {

struct SplitScore {
    std::size_t correct = 0;
    std::size_t total = 0;

    // Percentage, absent when the split has no evaluation instances.
    std::optional<double> accuracy() const;
};

// Top-1 accuracy overall (instance-weighted) and per many/medium/few split,
// where a split gathers the instances whose true class belongs to it.
struct EvalReport {
    std::string method;
    SplitScore all;
    SplitScore many;
    SplitScore medium;
    SplitScore few;
    std::vector<std::size_t> class_correct;
    std::vector<std::size_t> class_total;

    double top1_all() const { return all.accuracy().value_or(0.0); }
    std::optional<double> top1(Split split) const;
    const SplitScore& split(Split split) const;
    std::size_t n_eval() const { return all.total; }
    // Percentage per class; NaN for classes without evaluation instances.
    std::vector<double> per_class_acc() const;
    // Macro average over classes that have evaluation instances (percentage).
    double class_average() const;
};

EvalReport evaluate(std::span<const int> predicted, const Dataset& eval,
                    const ClassProfile& profile, std::string method = {});
EvalReport evaluate(const ClassifierHead& head, const Dataset& eval, const ClassProfile& profile,
                    std::string method = {});
EvalReport evaluate(const NCMClassifier& classifier, const Dataset& eval,
                    const ClassProfile& profile, std::string method = {});

// Spearman rank correlation with average ranks for ties; 0 when either side
// is constant.
double spearman(std::span<const double> a, std::span<const double> b);

struct WeightNormProfile {
    // Classes by descending training count.
    std::vector<int> classes;
    std::vector<std::size_t> counts;
    // |f_j| * ||w_j|| in the same order.
    std::vector<double> norms;
    double rank_correlation = 0.0;
};

WeightNormProfile weight_norm_profile(const ClassifierHead& head, const ClassProfile& profile);

struct TauSweepRow {
    double tau = 0.0;
    std::optional<double> many;
    std::optional<double> medium;
    std::optional<double> few;
    double all = 0.0;
};

// One evaluate() per tau on tau_normalize(head, tau).
std::vector<TauSweepRow> tau_sweep(const ClassifierHead& head, const Dataset& eval,
                                   const ClassProfile& profile, std::span<const double> grid);

// Least-squares slope of y against x.
double fitted_slope(std::span<const double> x, std::span<const double> y);

} // namespace longtail
