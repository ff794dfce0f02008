#pragma once

#include "longtail/types.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace longtail {

// Feature matrix (one row per instance) plus integer labels in [0, C).
// Every class has at least one instance and every feature is finite;
// make_dataset() enforces this.
struct Dataset {
    RowMatrix features;
    std::vector<int> labels;
    int num_classes = 0;

    std::size_t size() const { return labels.size(); }
    int dim() const { return static_cast<int>(features.cols()); }

    std::vector<std::size_t> class_counts() const;
    // Instance indices grouped by class.
    std::vector<std::vector<std::size_t>> class_members() const;
};

// Validates and assembles a Dataset. When allow_empty_classes is false
// (training data), every class must occur at least once.
Dataset make_dataset(RowMatrix features, std::vector<int> labels, int num_classes,
                     bool allow_empty_classes = false);

enum class Split { many, medium, few };

std::string_view to_string(Split split);

inline constexpr std::size_t kDefaultManyThreshold = 100;
inline constexpr std::size_t kDefaultFewThreshold = 20;

// Per-class training cardinalities and the many/medium/few split of each
// class. Thresholds are exclusive: many iff n_j > high, few iff n_j < low.
struct ClassProfile {
    std::vector<std::size_t> counts;
    // Class indices sorted by descending count (stable: ties keep index order).
    std::vector<int> order;
    std::vector<Split> splits;
    std::size_t high_threshold = kDefaultManyThreshold;
    std::size_t low_threshold = kDefaultFewThreshold;

    int num_classes() const { return static_cast<int>(counts.size()); }
    std::size_t total() const;
    // Counts in descending order, n_1 >= n_2 >= ...
    std::vector<std::size_t> sorted_counts() const;
};

ClassProfile class_profile(std::span<const std::size_t> counts,
                           std::size_t high_threshold = kDefaultManyThreshold,
                           std::size_t low_threshold = kDefaultFewThreshold);
ClassProfile class_profile(const Dataset& dataset,
                           std::size_t high_threshold = kDefaultManyThreshold,
                           std::size_t low_threshold = kDefaultFewThreshold);

enum class Decay { exponential, power_law };

std::string_view to_string(Decay decay);
Decay parse_decay(std::string_view text);

struct SyntheticSpec {
    int num_classes = 50;
    std::size_t n_max = 500;
    std::size_t n_min = 5;
    Decay decay = Decay::exponential;
    int dim = 64;
    // Minimum distance between class centroids, in within-class std units.
    double class_separation = 4.25;
    std::size_t val_per_class = 20;
    std::size_t test_per_class = 20;
    std::uint64_t seed = 0;

    void validate() const;
};

// Training-set cardinalities for class j = 0..C-1, non-increasing, with
// exact endpoints n_max and n_min.
std::vector<std::size_t> longtail_counts(const SyntheticSpec& spec);

struct SplitDatasets {
    Dataset train;
    Dataset val;
    Dataset test;
};

// Long-tailed training set and class-balanced val/test sets drawn from the
// same unit-variance Gaussian blobs. Deterministic in spec.seed.
SplitDatasets generate_longtail(const SyntheticSpec& spec);

// Text feature-file format:
//   line 1: "n d C"
//   then n rows: "label f_1 ... f_d"
// Blank lines and lines starting with '#' are skipped. Errors carry the
// offending line number.
Dataset read_feature_dataset(std::istream& in, bool allow_empty_classes = false);
Dataset load_feature_dataset(const std::filesystem::path& path, bool allow_empty_classes = false);

// Writes with 17 significant digits so a reload is exact.
void write_feature_dataset(const Dataset& dataset, std::ostream& out);
void save_feature_dataset(const Dataset& dataset, const std::filesystem::path& path);

} // namespace longtail
