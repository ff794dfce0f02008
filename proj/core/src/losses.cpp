#include "longtail/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace longtail {

namespace {

void check_label(const Eigen::Ref<const Vector>& logits, int label)
{
    if (label < 0 || label >= logits.size()) {
        throw Error("loss: label " + std::to_string(label) + " out of range");
    }
}

// Softmax probabilities plus the two quantities needed for an accurate
// -log p_label: the max-shift and log1p of the off-max mass.
struct Softmax {
    Vector probs;
    double neg_log_label = 0.0;
    // 1 - p_label, summed from the other classes to avoid cancellation.
    double complement = 0.0;
};

Softmax stable_softmax(const Eigen::Ref<const Vector>& logits, int label)
{
    const int top = argmax(logits);
    const double shift = logits[top];
    Softmax out;
    out.probs = (logits.array() - shift).exp();
    double off_top = 0.0;
    for (Eigen::Index k = 0; k < out.probs.size(); ++k) {
        if (k != top) {
            off_top += out.probs[k];
        }
    }
    const double normaliser = 1.0 + off_top;
    out.probs /= normaliser;
    out.neg_log_label = (shift - logits[label]) + std::log1p(off_top);
    for (Eigen::Index k = 0; k < out.probs.size(); ++k) {
        if (k != label) {
            out.complement += out.probs[k];
        }
    }
    return out;
}

} // namespace

LossResult softmax_xent(const Eigen::Ref<const Vector>& logits, int label)
{
    check_label(logits, label);
    auto sm = stable_softmax(logits, label);
    LossResult result{sm.neg_log_label, std::move(sm.probs)};
    result.grad[label] -= 1.0;
    return result;
}

LossResult focal(const Eigen::Ref<const Vector>& logits, int label, double gamma)
{
    check_label(logits, label);
    if (gamma < 0.0) {
        throw Error("focal: gamma must be >= 0");
    }
    const auto sm = stable_softmax(logits, label);
    const double h = sm.probs[label];
    const double miss = sm.complement;
    const double ce = sm.neg_log_label;
    const double modulator = std::pow(miss, gamma);

    // dL/dz_k = [gamma h (1-h)^(gamma-1) log h - (1-h)^gamma] (onehot_k - p_k)
    double chain = 0.0;
    if (gamma != 0.0 && miss > 0.0) {
        chain = gamma * h * std::pow(miss, gamma - 1.0) * ce;
    }
    const double scale = chain + modulator;

    LossResult result{modulator * ce, sm.probs * scale};
    result.grad[label] = -sm.complement * scale;
    return result;
}

double class_balanced_weight(std::size_t n, double beta)
{
    if (n < 1) {
        throw Error("class_balanced_weight: n must be >= 1");
    }
    if (!(beta >= 0.0 && beta < 1.0)) {
        throw Error("class_balanced_weight: beta must lie in [0, 1)");
    }
    if (beta == 0.0) {
        return 1.0;
    }
    // (1 - beta) / (1 - beta^n) with expm1 for small (1 - beta).
    const double log_beta = std::log(beta);
    return -std::expm1(log_beta) / -std::expm1(static_cast<double>(n) * log_beta);
}

Vector ldam_margins(std::span<const std::size_t> counts, double max_margin)
{
    if (counts.empty()) {
        throw Error("ldam_margins: no classes");
    }
    if (!(max_margin > 0.0)) {
        throw Error("ldam_margins: max_margin must be positive");
    }
    const auto rarest = *std::min_element(counts.begin(), counts.end());
    if (rarest < 1) {
        throw Error("ldam_margins: counts must be >= 1");
    }
    Vector margins(static_cast<Eigen::Index>(counts.size()));
    const double anchor = std::pow(static_cast<double>(rarest), 0.25);
    for (std::size_t j = 0; j < counts.size(); ++j) {
        margins[static_cast<Eigen::Index>(j)] =
            max_margin * anchor / std::pow(static_cast<double>(counts[j]), 0.25);
    }
    return margins;
}

LossResult ldam(const Eigen::Ref<const Vector>& logits, int label,
                const Eigen::Ref<const Vector>& margins)
{
    check_label(logits, label);
    if (margins.size() != logits.size()) {
        throw Error("ldam: margin vector size mismatch");
    }
    Vector shifted = logits;
    shifted[label] -= margins[label];
    // d(shifted)/d(logits) is the identity, so the gradient carries over.
    return softmax_xent(shifted, label);
}

std::string_view to_string(LossKind kind)
{
    switch (kind) {
    case LossKind::cross_entropy: return "ce";
    case LossKind::focal: return "focal";
    case LossKind::ldam: return "ldam";
    }
    return "?";
}

LossKind parse_loss(std::string_view text)
{
    if (text == "ce" || text == "cross_entropy") {
        return LossKind::cross_entropy;
    }
    if (text == "focal") {
        return LossKind::focal;
    }
    if (text == "ldam") {
        return LossKind::ldam;
    }
    throw Error("unknown loss '" + std::string(text) + "' (expected ce | focal | ldam)");
}

void LossSpec::validate() const
{
    if (!(gamma >= 0.0)) {
        throw Error("loss: focal_gamma must be >= 0");
    }
    if (!(beta >= 0.0 && beta < 1.0)) {
        throw Error("loss: cb_beta must lie in [0, 1)");
    }
    if (!(max_margin > 0.0)) {
        throw Error("loss: ldam_max_margin must be positive");
    }
}

LossFunction::LossFunction(const LossSpec& spec, std::span<const std::size_t> counts)
    : spec_(spec)
{
    spec_.validate();
    const auto classes = static_cast<Eigen::Index>(counts.size());
    class_weights_ = Vector::Ones(classes);
    if (spec_.beta > 0.0) {
        for (Eigen::Index j = 0; j < classes; ++j) {
            class_weights_[j] = class_balanced_weight(counts[static_cast<std::size_t>(j)], spec_.beta);
        }
        class_weights_ *= static_cast<double>(classes) / class_weights_.sum();
    }
    if (spec_.kind == LossKind::ldam) {
        margins_ = ldam_margins(counts, spec_.max_margin);
    }
}

LossResult LossFunction::operator()(const Eigen::Ref<const Vector>& logits, int label) const
{
    LossResult result;
    switch (spec_.kind) {
    case LossKind::cross_entropy: result = softmax_xent(logits, label); break;
    case LossKind::focal: result = focal(logits, label, spec_.gamma); break;
    case LossKind::ldam: result = ldam(logits, label, margins_); break;
    }
    const double weight = class_weights_[label];
    if (weight != 1.0) {
        result.loss *= weight;
        result.grad *= weight;
    }
    return result;
}

} // namespace longtail
