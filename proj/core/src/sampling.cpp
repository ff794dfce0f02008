#include "longtail/sampling.hpp"

#include "longtail/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace longtail {

std::string_view to_string(SamplerKind kind)
{
    switch (kind) {
    case SamplerKind::instance_balanced: return "instance";
    case SamplerKind::class_balanced: return "class";
    case SamplerKind::square_root: return "sqrt";
    case SamplerKind::progressive: return "progressive";
    }
    return "?";
}

SamplerKind parse_sampler(std::string_view text)
{
    if (text == "instance") {
        return SamplerKind::instance_balanced;
    }
    if (text == "class") {
        return SamplerKind::class_balanced;
    }
    if (text == "sqrt") {
        return SamplerKind::square_root;
    }
    if (text == "progressive") {
        return SamplerKind::progressive;
    }
    throw Error("unknown sampler '" + std::string(text)
                + "' (expected instance | class | sqrt | progressive)");
}

SamplingStrategy SamplingStrategy::from_kind(SamplerKind kind, int total_epochs)
{
    switch (kind) {
    case SamplerKind::instance_balanced: return instance_balanced();
    case SamplerKind::class_balanced: return class_balanced();
    case SamplerKind::square_root: return square_root();
    case SamplerKind::progressive: return progressive(total_epochs);
    }
    throw Error("bad sampler kind");
}

void SamplingStrategy::validate() const
{
    if (!(q >= 0.0 && q <= 1.0)) {
        throw Error("sampling exponent q must lie in [0, 1]");
    }
    if (kind == SamplerKind::progressive && total_epochs < 1) {
        throw Error("progressive sampling needs total_epochs >= 1");
    }
}

std::vector<double> sampling_weights(std::span<const std::size_t> counts, double q)
{
    if (counts.empty()) {
        throw Error("sampling_weights: no classes");
    }
    if (!(q >= 0.0 && q <= 1.0)) {
        throw Error("sampling_weights: q must lie in [0, 1]");
    }
    std::vector<double> weights;
    weights.reserve(counts.size());
    for (std::size_t j = 0; j < counts.size(); ++j) {
        if (counts[j] == 0) {
            throw Error("sampling_weights: class " + std::to_string(j) + " has zero count");
        }
        weights.push_back(std::pow(static_cast<double>(counts[j]), q));
    }
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    for (double& w : weights) {
        w /= total;
    }
    return weights;
}

std::vector<double> progressive_weights(std::span<const std::size_t> counts, int t, int total)
{
    if (total < 1 || t < 0 || t > total) {
        throw Error("progressive_weights: need 0 <= t <= T and T >= 1 (t=" + std::to_string(t)
                    + ", T=" + std::to_string(total) + ")");
    }
    const auto instance = sampling_weights(counts, 1.0);
    const auto balanced = sampling_weights(counts, 0.0);
    const double mix = static_cast<double>(t) / static_cast<double>(total);
    std::vector<double> weights(counts.size());
    for (std::size_t j = 0; j < counts.size(); ++j) {
        weights[j] = (1.0 - mix) * instance[j] + mix * balanced[j];
    }
    return weights;
}

SamplingPlan make_plan(std::span<const std::size_t> counts, const SamplingStrategy& strategy,
                       int epoch)
{
    strategy.validate();
    if (strategy.kind == SamplerKind::progressive) {
        if (epoch >= strategy.total_epochs) {
            throw Error("progressive sampling: epoch " + std::to_string(epoch)
                        + " beyond total_epochs " + std::to_string(strategy.total_epochs));
        }
        return {progressive_weights(counts, epoch, strategy.total_epochs), epoch};
    }
    return {sampling_weights(counts, strategy.q), epoch};
}

EpochSampler::EpochSampler(const Dataset& dataset, SamplingStrategy strategy, std::uint64_t seed)
    : members_(dataset.class_members()), counts_(dataset.class_counts()),
      size_(dataset.size()), strategy_(strategy), seed_(seed)
{
    strategy_.validate();
    if (size_ == 0) {
        throw Error("cannot sample from an empty dataset");
    }
}

std::vector<std::size_t> EpochSampler::draw(std::span<const double> class_probs,
                                            std::size_t count, std::uint64_t stream) const
{
    std::vector<double> cumulative(class_probs.size());
    std::partial_sum(class_probs.begin(), class_probs.end(), cumulative.begin());
    const double total = cumulative.back();

    Rng rng(stream);
    std::vector<std::size_t> indices;
    indices.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double u = rng.uniform() * total;
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        auto cls = static_cast<std::size_t>(std::distance(cumulative.begin(), it));
        cls = std::min(cls, cumulative.size() - 1);
        // Skip zero-probability (or empty) classes that upper_bound can land
        // on through rounding at the top of the range.
        while (members_[cls].empty() || class_probs[cls] == 0.0) {
            cls = cls == 0 ? cumulative.size() - 1 : cls - 1;
        }
        const auto& pool = members_[cls];
        indices.push_back(pool[rng.below(pool.size())]);
    }
    return indices;
}

std::vector<std::size_t> EpochSampler::epoch(int epoch) const
{
    const std::uint64_t stream = derive_seed(seed_, static_cast<std::uint64_t>(epoch), 0x5A);
    if (strategy_.kind == SamplerKind::instance_balanced) {
        std::vector<std::size_t> perm(size_);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        Rng rng(stream);
        // Fisher-Yates.
        for (std::size_t i = size_; i > 1; --i) {
            std::swap(perm[i - 1], perm[rng.below(i)]);
        }
        return perm;
    }
    const auto plan = make_plan(counts_, strategy_, epoch);
    return draw(plan.class_probs, size_, stream);
}

std::vector<std::size_t> make_epoch_stream(const Dataset& dataset,
                                           const SamplingStrategy& strategy, int epoch,
                                           std::uint64_t seed)
{
    return EpochSampler(dataset, strategy, seed).epoch(epoch);
}

} // namespace longtail
