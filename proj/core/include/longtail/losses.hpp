#pragma once

#include "longtail/types.hpp"

#include <span>
#include <string_view>
#include <vector>

namespace longtail {

// Per-sample loss and its gradient with respect to the logits.
struct LossResult {
    double loss = 0.0;
    Vector grad;
};

// -log softmax(logits)[label], max-subtracted; grad = softmax - onehot.
LossResult softmax_xent(const Eigen::Ref<const Vector>& logits, int label);

// (1 - h)^gamma * (-log h) where h is the true-class softmax probability.
LossResult focal(const Eigen::Ref<const Vector>& logits, int label, double gamma);

// Effective-number coefficient (1 - beta) / (1 - beta^n).
double class_balanced_weight(std::size_t n, double beta);

// Delta_j = max_margin * (min_k n_k / n_j)^(1/4); the rarest class gets max_margin.
Vector ldam_margins(std::span<const std::size_t> counts, double max_margin);

// Cross-entropy after subtracting margins[label] from the true-class logit.
//
// A variant that also subtracts Delta_c from every competing logit is just a
// fixed per-class offset of all logits, not a margin on the target class.
// Only the true logit is shifted here.
LossResult ldam(const Eigen::Ref<const Vector>& logits, int label,
                const Eigen::Ref<const Vector>& margins);

enum class LossKind { cross_entropy, focal, ldam };

std::string_view to_string(LossKind kind);
// Accepts the config spellings: ce | focal | ldam.
LossKind parse_loss(std::string_view text);

struct LossSpec {
    LossKind kind = LossKind::cross_entropy;
    double gamma = 2.0;
    // Class-balanced re-weighting; 0 disables it.
    double beta = 0.0;
    double max_margin = 0.5;

    void validate() const;
};

// A LossSpec bound to the training class counts (margins and class weights
// precomputed). Class weights are normalised to sum to C.
class LossFunction {
public:
    LossFunction(const LossSpec& spec, std::span<const std::size_t> counts);

    LossResult operator()(const Eigen::Ref<const Vector>& logits, int label) const;

    const Vector& class_weights() const { return class_weights_; }
    const Vector& margins() const { return margins_; }

private:
    LossSpec spec_;
    Vector class_weights_;
    Vector margins_;
};

} // namespace longtail
