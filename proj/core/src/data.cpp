#include "longtail/data.hpp"

#include "longtail/rng.hpp"
#include "text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace longtail {

std::vector<std::size_t> Dataset::class_counts() const
{
    std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
    for (int label : labels) {
        ++counts[static_cast<std::size_t>(label)];
    }
    return counts;
}

std::vector<std::vector<std::size_t>> Dataset::class_members() const
{
    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(num_classes));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        members[static_cast<std::size_t>(labels[i])].push_back(i);
    }
    return members;
}

Dataset make_dataset(RowMatrix features, std::vector<int> labels, int num_classes,
                     bool allow_empty_classes)
{
    if (num_classes < 1) {
        throw Error("dataset needs at least one class");
    }
    if (static_cast<std::size_t>(features.rows()) != labels.size()) {
        throw Error("feature rows (" + std::to_string(features.rows()) + ") and labels ("
                    + std::to_string(labels.size()) + ") disagree");
    }
    std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= num_classes) {
            throw Error("label " + std::to_string(labels[i]) + " out of range at row "
                        + std::to_string(i));
        }
        ++counts[static_cast<std::size_t>(labels[i])];
    }
    if (!features.allFinite()) {
        throw Error("non-finite feature value");
    }
    if (!allow_empty_classes) {
        for (std::size_t c = 0; c < counts.size(); ++c) {
            if (counts[c] == 0) {
                throw Error("empty class " + std::to_string(c));
            }
        }
    }
    return Dataset{std::move(features), std::move(labels), num_classes};
}

std::string_view to_string(Split split)
{
    switch (split) {
    case Split::many: return "many";
    case Split::medium: return "medium";
    case Split::few: return "few";
    }
    return "?";
}

std::size_t ClassProfile::total() const
{
    return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

std::vector<std::size_t> ClassProfile::sorted_counts() const
{
    std::vector<std::size_t> sorted;
    sorted.reserve(order.size());
    for (int c : order) {
        sorted.push_back(counts[static_cast<std::size_t>(c)]);
    }
    return sorted;
}

ClassProfile class_profile(std::span<const std::size_t> counts, std::size_t high_threshold,
                           std::size_t low_threshold)
{
    if (low_threshold < 1 || high_threshold < low_threshold) {
        throw Error("split thresholds must satisfy high >= low >= 1");
    }
    ClassProfile profile;
    profile.counts.assign(counts.begin(), counts.end());
    profile.high_threshold = high_threshold;
    profile.low_threshold = low_threshold;
    profile.order.resize(counts.size());
    std::iota(profile.order.begin(), profile.order.end(), 0);
    std::stable_sort(profile.order.begin(), profile.order.end(), [&](int a, int b) {
        return counts[static_cast<std::size_t>(a)] > counts[static_cast<std::size_t>(b)];
    });
    profile.splits.reserve(counts.size());
    for (std::size_t n : counts) {
        if (n > high_threshold) {
            profile.splits.push_back(Split::many);
        } else if (n < low_threshold) {
            profile.splits.push_back(Split::few);
        } else {
            profile.splits.push_back(Split::medium);
        }
    }
    return profile;
}

ClassProfile class_profile(const Dataset& dataset, std::size_t high_threshold,
                           std::size_t low_threshold)
{
    const auto counts = dataset.class_counts();
    return class_profile(counts, high_threshold, low_threshold);
}

std::string_view to_string(Decay decay)
{
    return decay == Decay::exponential ? "exponential" : "power_law";
}

Decay parse_decay(std::string_view text)
{
    if (text == "exponential" || text == "exp") {
        return Decay::exponential;
    }
    if (text == "power_law" || text == "power") {
        return Decay::power_law;
    }
    throw Error("unknown decay '" + std::string(text) + "' (expected exponential | power_law)");
}

void SyntheticSpec::validate() const
{
    if (num_classes < 1) {
        throw Error("synthetic spec: need at least one class");
    }
    if (n_min < 1) {
        throw Error("synthetic spec: n_min must be >= 1");
    }
    if (n_max < n_min) {
        throw Error("synthetic spec: n_max must be >= n_min");
    }
    if (dim < 1) {
        throw Error("synthetic spec: dim must be >= 1");
    }
    if (!(class_separation > 0.0) || !std::isfinite(class_separation)) {
        throw Error("synthetic spec: class_separation must be positive");
    }
}

std::vector<std::size_t> longtail_counts(const SyntheticSpec& spec)
{
    spec.validate();
    const auto classes = static_cast<std::size_t>(spec.num_classes);
    std::vector<std::size_t> counts(classes, spec.n_max);
    if (classes == 1) {
        return counts;
    }
    const double ratio = static_cast<double>(spec.n_min) / static_cast<double>(spec.n_max);
    const double nmax = static_cast<double>(spec.n_max);
    for (std::size_t j = 0; j < classes; ++j) {
        double n = nmax;
        if (spec.decay == Decay::exponential) {
            n = nmax * std::pow(ratio, static_cast<double>(j) / static_cast<double>(classes - 1));
        } else {
            // n_j = n_max * (j + 1)^(-alpha), alpha pinned by n_{C-1} = n_min.
            const double alpha = std::log(1.0 / ratio) / std::log(static_cast<double>(classes));
            n = nmax * std::pow(static_cast<double>(j + 1), -alpha);
        }
        const auto rounded = static_cast<std::size_t>(std::llround(n));
        counts[j] = std::clamp(rounded, spec.n_min, spec.n_max);
    }
    return counts;
}

namespace {

Matrix draw_centroids(const SyntheticSpec& spec, Rng& rng)
{
    const int d = spec.dim;
    const int classes = spec.num_classes;
    Matrix centroids(d, classes);
    for (int c = 0; c < classes; ++c) {
        double norm = 0.0;
        do {
            for (int k = 0; k < d; ++k) {
                centroids(k, c) = rng.normal();
            }
            norm = centroids.col(c).norm();
        } while (norm == 0.0);
        centroids.col(c) /= norm;
    }
    double min_dist = std::numeric_limits<double>::infinity();
    for (int a = 0; a < classes; ++a) {
        for (int b = a + 1; b < classes; ++b) {
            min_dist = std::min(min_dist, (centroids.col(a) - centroids.col(b)).norm());
        }
    }
    // Scale the sphere so the closest pair sits exactly class_separation apart.
    const double radius = std::isfinite(min_dist) && min_dist > 0.0
                              ? spec.class_separation / min_dist
                              : spec.class_separation;
    return centroids * radius;
}

Dataset sample_blobs(const Matrix& centroids, std::span<const std::size_t> counts, Rng& rng)
{
    const auto total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
    const auto d = centroids.rows();
    RowMatrix features(static_cast<Eigen::Index>(total), d);
    std::vector<int> labels;
    labels.reserve(total);
    Eigen::Index row = 0;
    for (std::size_t c = 0; c < counts.size(); ++c) {
        for (std::size_t i = 0; i < counts[c]; ++i, ++row) {
            for (Eigen::Index k = 0; k < d; ++k) {
                features(row, k) = centroids(k, static_cast<Eigen::Index>(c)) + rng.normal();
            }
            labels.push_back(static_cast<int>(c));
        }
    }
    return make_dataset(std::move(features), std::move(labels), static_cast<int>(counts.size()),
                        true);
}

} // namespace

SplitDatasets generate_longtail(const SyntheticSpec& spec)
{
    const auto train_counts = longtail_counts(spec);
    const auto classes = static_cast<std::size_t>(spec.num_classes);

    Rng centroid_rng(derive_seed(spec.seed, 0xC3));
    const Matrix centroids = draw_centroids(spec, centroid_rng);

    Rng train_rng(derive_seed(spec.seed, 0x7A));
    Rng val_rng(derive_seed(spec.seed, 0x7B));
    Rng test_rng(derive_seed(spec.seed, 0x7C));
    const std::vector<std::size_t> val_counts(classes, spec.val_per_class);
    const std::vector<std::size_t> test_counts(classes, spec.test_per_class);

    return SplitDatasets{
        sample_blobs(centroids, train_counts, train_rng),
        sample_blobs(centroids, val_counts, val_rng),
        sample_blobs(centroids, test_counts, test_rng),
    };
}

namespace {

using detail::is_skippable;
using detail::parse_number;
using detail::tokenize;

std::string at_line(std::size_t line) { return " at line " + std::to_string(line); }

} // namespace

Dataset read_feature_dataset(std::istream& in, bool allow_empty_classes)
{
    std::string line;
    std::size_t line_no = 0;
    long long n = -1;
    long long d = -1;
    long long classes = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_skippable(line)) {
            continue;
        }
        const auto tokens = tokenize(line);
        if (tokens.size() != 3 || !parse_number(tokens[0], n) || !parse_number(tokens[1], d)
            || !parse_number(tokens[2], classes) || n < 0 || d < 1 || classes < 1) {
            throw Error("malformed header" + at_line(line_no) + ": expected \"n d C\"");
        }
        break;
    }
    if (n < 0) {
        throw Error("malformed header: file is empty");
    }

    RowMatrix features(n, d);
    std::vector<int> labels;
    labels.reserve(static_cast<std::size_t>(n));
    std::vector<std::size_t> counts(static_cast<std::size_t>(classes), 0);
    while (std::getline(in, line)) {
        ++line_no;
        if (is_skippable(line)) {
            continue;
        }
        const auto tokens = tokenize(line);
        if (static_cast<long long>(labels.size()) >= n) {
            throw Error("more rows than declared (" + std::to_string(n) + ")" + at_line(line_no));
        }
        if (static_cast<long long>(tokens.size()) != d + 1) {
            throw Error("row arity mismatch" + at_line(line_no) + ": expected "
                        + std::to_string(d) + " features, got "
                        + std::to_string(static_cast<long long>(tokens.size()) - 1));
        }
        int label = 0;
        if (!parse_number(tokens[0], label)) {
            throw Error("bad label '" + std::string(tokens[0]) + "'" + at_line(line_no));
        }
        if (label < 0 || label >= classes) {
            throw Error("label " + std::to_string(label) + " out of range [0, "
                        + std::to_string(classes) + ")" + at_line(line_no));
        }
        const auto row = static_cast<Eigen::Index>(labels.size());
        for (long long k = 0; k < d; ++k) {
            double value = 0.0;
            const auto token = tokens[static_cast<std::size_t>(k + 1)];
            if (!parse_number(token, value) || !std::isfinite(value)) {
                throw Error("bad feature value '" + std::string(token) + "'" + at_line(line_no));
            }
            features(row, k) = value;
        }
        labels.push_back(label);
        ++counts[static_cast<std::size_t>(label)];
    }
    if (static_cast<long long>(labels.size()) != n) {
        throw Error("expected " + std::to_string(n) + " rows, found "
                    + std::to_string(labels.size()));
    }
    if (!allow_empty_classes) {
        for (std::size_t c = 0; c < counts.size(); ++c) {
            if (counts[c] == 0) {
                throw Error("empty class " + std::to_string(c));
            }
        }
    }
    return make_dataset(std::move(features), std::move(labels), static_cast<int>(classes),
                        allow_empty_classes);
}

Dataset load_feature_dataset(const std::filesystem::path& path, bool allow_empty_classes)
{
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open feature file " + path.string());
    }
    try {
        return read_feature_dataset(in, allow_empty_classes);
    } catch (const Error& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

void write_feature_dataset(const Dataset& dataset, std::ostream& out)
{
    std::ostringstream body;
    body.precision(17);
    body << dataset.size() << ' ' << dataset.dim() << ' ' << dataset.num_classes << '\n';
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        body << dataset.labels[i];
        for (int k = 0; k < dataset.dim(); ++k) {
            body << ' ' << dataset.features(static_cast<Eigen::Index>(i), k);
        }
        body << '\n';
    }
    out << body.str();
}

void save_feature_dataset(const Dataset& dataset, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write feature file " + path.string());
    }
    write_feature_dataset(dataset, out);
}

} // namespace longtail
