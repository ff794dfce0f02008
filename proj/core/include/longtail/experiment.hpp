#pragma once

#include "longtail/balancing.hpp"
#include "longtail/config.hpp"
#include "longtail/data.hpp"
#include "longtail/evaluation.hpp"
#include "longtail/sampling.hpp"
#include "longtail/training.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace longtail {

enum class Method { joint, crt, ncm, tau, lws, learn_tau };

std::string_view to_string(Method method);
// Accepts joint | crt | ncm | tau | lws | learn_tau (also learn-tau).
Method parse_method(std::string_view text);

// Two-stage experiment: stage one trains a head jointly under every
// sampler, stage two applies each balancing method on top of it. Every
// field has a default; see to_key_values() for the config-file keys.
struct ExperimentConfig {
    // Feature files; when train_file is empty the synthetic spec is used
    // with its seed replaced by the run seed.
    std::filesystem::path train_file;
    std::filesystem::path val_file;
    std::filesystem::path test_file;
    SyntheticSpec synthetic;

    std::size_t many_threshold = kDefaultManyThreshold;
    std::size_t few_threshold = kDefaultFewThreshold;

    std::vector<SamplerKind> samplers{SamplerKind::instance_balanced, SamplerKind::class_balanced,
                                      SamplerKind::square_root, SamplerKind::progressive};
    TrainConfig stage_one;
    // Hidden widths of the stage-one head; empty means a linear head on the
    // raw features.
    std::vector<int> hidden;

    std::vector<Method> methods{Method::joint, Method::crt, Method::ncm, Method::tau,
                                Method::lws};
    TrainConfig stage_two = default_stage_two();
    NcmMetric ncm_metric = NcmMetric::cosine;
    std::vector<double> tau_grid = default_tau_grid();
    std::vector<double> sweep_grid = longtail::tau_grid(0.0, 1.0, 0.1);
    LearnTauConfig learn_tau;

    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    std::filesystem::path output_dir = "longtail_out";
    // 0 picks std::thread::hardware_concurrency().
    int threads = 0;

    static TrainConfig default_stage_two();
    void validate() const;
};

// "lo:hi:step" (inclusive) or an explicit comma-separated list.
std::vector<double> parse_tau_grid(const std::string& text);

// Reads every experiment key (unknown keys are errors).
ExperimentConfig experiment_config_from(KeyValueConfig& config);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
// Canonical key/value dump, used for manifests. Round-trips through
// experiment_config_from().
std::vector<std::pair<std::string, std::string>> to_key_values(const ExperimentConfig& config);

// Reads the synthetic-data keys (classes, n_max, n_min, decay, dim,
// class_separation, val_per_class, test_per_class, seed).
SyntheticSpec synthetic_spec_from(KeyValueConfig& config);

struct MethodResult {
    Method method = Method::joint;
    std::optional<EvalReport> report;
    // Non-empty when the cell failed.
    std::string error;
    // Tau used by tau / learn_tau.
    std::optional<double> tau;
};

// Everything produced for one (seed, sampler) pair.
struct SamplerRun {
    std::uint64_t seed = 0;
    SamplerKind sampler = SamplerKind::instance_balanced;
    ClassProfile profile;
    std::vector<EpochRecord> history;
    std::vector<MethodResult> methods;
    std::optional<WeightNormProfile> joint_norms;
    std::vector<std::string> norm_heads;
    std::vector<WeightNormProfile> norm_profiles;
    std::vector<TauSweepRow> sweep;
    std::optional<TauSelection> tau_val;
    std::optional<TauSelection> tau_train;
    std::optional<double> tau_learned;

    const MethodResult* find(Method method) const;
};

struct ExperimentResult {
    std::vector<SamplerRun> runs;

    const SamplerRun* find(std::uint64_t seed, SamplerKind sampler) const;
};

// Runs every (seed, sampler) cell, independent cells in parallel, and writes
// under config.output_dir:
//   summary.md, summary.csv, run_manifest.json, failures.csv (if any)
//   seed_<s>/manifest.json
//   seed_<s>/reports/<sampler>__<method>.csv
//   seed_<s>/history_<sampler>.csv, weight_norms_<sampler>.csv,
//   seed_<s>/tau_sweep_<sampler>.csv
// A failing (method, seed) cell is recorded and the rest still run.
ExperimentResult run_experiment(const ExperimentConfig& config);

} // namespace longtail
