#pragma once

#include "longtail/data.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace longtail {

enum class SamplerKind { instance_balanced, class_balanced, square_root, progressive };

std::string_view to_string(SamplerKind kind);
// Accepts the config spellings: instance | class | sqrt | progressive.
SamplerKind parse_sampler(std::string_view text);

struct SamplingStrategy {
    SamplerKind kind = SamplerKind::instance_balanced;
    // Exponent of n_j in p_j; 1, 0 and 1/2 for the fixed strategies.
    double q = 1.0;
    // Total epochs T of the progressive schedule.
    int total_epochs = 1;

    static SamplingStrategy instance_balanced() { return {SamplerKind::instance_balanced, 1.0, 1}; }
    static SamplingStrategy class_balanced() { return {SamplerKind::class_balanced, 0.0, 1}; }
    static SamplingStrategy square_root() { return {SamplerKind::square_root, 0.5, 1}; }
    static SamplingStrategy progressive(int total_epochs)
    {
        return {SamplerKind::progressive, 1.0, total_epochs};
    }
    static SamplingStrategy from_kind(SamplerKind kind, int total_epochs);

    void validate() const;
};

// p_j = n_j^q / sum_i n_i^q.
std::vector<double> sampling_weights(std::span<const std::size_t> counts, double q);

// (1 - t/T) p^IB + (t/T) p^CB.
std::vector<double> progressive_weights(std::span<const std::size_t> counts, int t, int total);

struct SamplingPlan {
    std::vector<double> class_probs;
    int epoch = 0;
};

// Class probabilities in effect for a given zero-based epoch. The
// progressive schedule uses t = epoch, T = strategy.total_epochs.
SamplingPlan make_plan(std::span<const std::size_t> counts, const SamplingStrategy& strategy,
                       int epoch);

// One epoch worth of instance indices (length n). Instance-balanced epochs
// are a shuffled permutation; every other strategy draws n i.i.d. samples
// by picking a class from the plan, then an instance uniformly within it.
std::vector<std::size_t> make_epoch_stream(const Dataset& dataset,
                                           const SamplingStrategy& strategy, int epoch,
                                           std::uint64_t seed);

// Reusable form of make_epoch_stream that keeps the class membership lists
// between epochs.
class EpochSampler {
public:
    EpochSampler(const Dataset& dataset, SamplingStrategy strategy, std::uint64_t seed);

    std::vector<std::size_t> epoch(int epoch) const;
    // Raw two-stage draws from an explicit plan, for diagnostics and tests.
    std::vector<std::size_t> draw(std::span<const double> class_probs, std::size_t count,
                                  std::uint64_t stream) const;

private:
    std::vector<std::vector<std::size_t>> members_;
    std::vector<std::size_t> counts_;
    std::size_t size_ = 0;
    SamplingStrategy strategy_;
    std::uint64_t seed_ = 0;
};

} // namespace longtail
