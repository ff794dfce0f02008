#include "longtail/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace longtail {

std::optional<double> SplitScore::accuracy() const
{
    if (total == 0) {
        return std::nullopt;
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(total);
}

const SplitScore& EvalReport::split(Split split) const
{
    switch (split) {
    case Split::many: return many;
    case Split::medium: return medium;
    case Split::few: return few;
    }
    return all;
}

std::optional<double> EvalReport::top1(Split s) const { return split(s).accuracy(); }

std::vector<double> EvalReport::per_class_acc() const
{
    std::vector<double> out(class_total.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t c = 0; c < class_total.size(); ++c) {
        if (class_total[c] > 0) {
            out[c] = 100.0 * static_cast<double>(class_correct[c])
                     / static_cast<double>(class_total[c]);
        }
    }
    return out;
}

double EvalReport::class_average() const
{
    double sum = 0.0;
    std::size_t present = 0;
    for (double acc : per_class_acc()) {
        if (!std::isnan(acc)) {
            sum += acc;
            ++present;
        }
    }
    return present == 0 ? 0.0 : sum / static_cast<double>(present);
}

EvalReport evaluate(std::span<const int> predicted, const Dataset& eval,
                    const ClassProfile& profile, std::string method)
{
    if (predicted.size() != eval.size()) {
        throw Error("evaluate: prediction count does not match evaluation set");
    }
    if (profile.num_classes() != eval.num_classes) {
        throw Error("evaluate: class profile has " + std::to_string(profile.num_classes())
                    + " classes, evaluation set " + std::to_string(eval.num_classes));
    }
    EvalReport report;
    report.method = std::move(method);
    const auto classes = static_cast<std::size_t>(eval.num_classes);
    report.class_correct.assign(classes, 0);
    report.class_total.assign(classes, 0);
    for (std::size_t i = 0; i < eval.size(); ++i) {
        const auto label = static_cast<std::size_t>(eval.labels[i]);
        ++report.class_total[label];
        if (predicted[i] == eval.labels[i]) {
            ++report.class_correct[label];
        }
    }
    for (std::size_t c = 0; c < classes; ++c) {
        SplitScore* bucket = nullptr;
        switch (profile.splits[c]) {
        case Split::many: bucket = &report.many; break;
        case Split::medium: bucket = &report.medium; break;
        case Split::few: bucket = &report.few; break;
        }
        bucket->correct += report.class_correct[c];
        bucket->total += report.class_total[c];
        report.all.correct += report.class_correct[c];
        report.all.total += report.class_total[c];
    }
    return report;
}

EvalReport evaluate(const ClassifierHead& head, const Dataset& eval, const ClassProfile& profile,
                    std::string method)
{
    const auto predicted = head.predict(eval.features);
    return evaluate(predicted, eval, profile, std::move(method));
}

EvalReport evaluate(const NCMClassifier& classifier, const Dataset& eval,
                    const ClassProfile& profile, std::string method)
{
    const auto predicted = classifier.predict(eval.features);
    return evaluate(predicted, eval, profile, std::move(method));
}

namespace {

std::vector<double> average_ranks(std::span<const double> values)
{
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) {
            ++j;
        }
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            ranks[order[k]] = rank;
        }
        i = j + 1;
    }
    return ranks;
}

double pearson(std::span<const double> a, std::span<const double> b)
{
    const auto n = static_cast<double>(a.size());
    const double mean_a = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mean_b = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double cov = 0.0;
    double var_a = 0.0;
    double var_b = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cov += (a[i] - mean_a) * (b[i] - mean_b);
        var_a += (a[i] - mean_a) * (a[i] - mean_a);
        var_b += (b[i] - mean_b) * (b[i] - mean_b);
    }
    if (var_a == 0.0 || var_b == 0.0) {
        return 0.0;
    }
    return cov / std::sqrt(var_a * var_b);
}

} // namespace

double spearman(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size()) {
        throw Error("spearman: length mismatch");
    }
    if (a.size() < 2) {
        return 0.0;
    }
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    return pearson(ra, rb);
}

WeightNormProfile weight_norm_profile(const ClassifierHead& head, const ClassProfile& profile)
{
    if (head.num_classes() != profile.num_classes()) {
        throw Error("weight_norm_profile: class count mismatch");
    }
    if (head.kind == HeadKind::ncm) {
        throw Error("weight_norm_profile: needs a linear-family head");
    }
    const Vector norms = head.class_norms();
    WeightNormProfile out;
    out.classes = profile.order;
    for (int c : profile.order) {
        out.counts.push_back(profile.counts[static_cast<std::size_t>(c)]);
        out.norms.push_back(norms[c]);
    }
    std::vector<double> counts(out.counts.begin(), out.counts.end());
    out.rank_correlation = spearman(out.norms, counts);
    return out;
}

std::vector<TauSweepRow> tau_sweep(const ClassifierHead& head, const Dataset& eval,
                                   const ClassProfile& profile, std::span<const double> grid)
{
    if (grid.empty()) {
        throw Error("tau_sweep: empty grid");
    }
    std::vector<TauSweepRow> rows;
    rows.reserve(grid.size());
    for (double tau : grid) {
        const auto report = evaluate(tau_normalize(head, tau), eval, profile);
        rows.push_back({tau, report.top1(Split::many), report.top1(Split::medium),
                        report.top1(Split::few), report.top1_all()});
    }
    return rows;
}

double fitted_slope(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size() || x.size() < 2) {
        throw Error("fitted_slope: need two or more paired points");
    }
    const auto n = static_cast<double>(x.size());
    const double mean_x = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double mean_y = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mean_x) * (y[i] - mean_y);
        sxx += (x[i] - mean_x) * (x[i] - mean_x);
    }
    if (sxx == 0.0) {
        throw Error("fitted_slope: x is constant");
    }
    return sxy / sxx;
}

} // namespace longtail
