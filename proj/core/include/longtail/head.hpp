#pragma once

#include "longtail/types.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

namespace longtail {

enum class HeadKind { linear, tau_normalized, ncm, cosine, mlp };

std::string_view to_string(HeadKind kind);
HeadKind parse_head_kind(std::string_view text);

// Fully connected layer, out = relu(weights^T in + bias).
struct DenseLayer {
    Matrix weights; // in x out
    Vector bias;    // out
};

// Classifier g(z) on top of fixed features z.
//
//   linear / tau_normalized / mlp:  logit_j = f_j * (w_j . h) + b_j
//   ncm:                            logit_j = cos(w_j, h)      (w_j = class mean)
//   cosine:                         logit_j = s * f_j * cos(w_j, relu?(h))
//
// h is z itself, or the output of the ReLU hidden layers for mlp heads. The
// scale f_j and bias b_j terms apply only when present.
struct ClassifierHead {
    HeadKind kind = HeadKind::linear;
    std::vector<DenseLayer> hidden;
    Matrix weights; // feature_dim x C, column j is w_j
    std::optional<Vector> bias;
    std::optional<Vector> scales;
    // cosine heads only
    double cosine_scale = 16.0;
    bool rectify_input = true;

    int input_dim() const;
    int feature_dim() const { return static_cast<int>(weights.rows()); }
    int num_classes() const { return static_cast<int>(weights.cols()); }

    // Output of the hidden stack (identity when there are no hidden layers).
    RowMatrix represent(const RowMatrix& inputs) const;

    // Logits for an already-represented batch (rows are h).
    RowMatrix logits_from_features(const RowMatrix& features) const;
    RowMatrix logits(const RowMatrix& inputs) const;
    Vector logits_one(const Eigen::Ref<const Vector>& input) const;

    int predict_one(const Eigen::Ref<const Vector>& input) const;
    std::vector<int> predict(const RowMatrix& inputs) const;

    // Effective per-class weight norms |f_j| * ||w_j||.
    Vector class_norms() const;

    void validate() const;
};

// Fresh head: W uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] (same rule for
// hidden layers), zero bias for kinds that carry one.
ClassifierHead init_head(int dim, int num_classes, HeadKind kind, std::uint64_t seed,
                         const std::vector<int>& hidden_widths = {});

// Text format:
//   "d C kind"
//   mlp only: "hidden k", then per layer "layer in out", in rows of out
//             values and a "layer_bias ..." row
//   feature_dim rows of C values (W)
//   optional "bias b_1 ... b_C"
//   optional "scales f_1 ... f_C"
//   cosine only: "cosine <scale> <rectify 0|1>"
// Values use 17 significant digits; a reload reproduces the head exactly.
void write_head(const ClassifierHead& head, std::ostream& out);
ClassifierHead read_head(std::istream& in);
void save_head(const ClassifierHead& head, const std::filesystem::path& path);
ClassifierHead load_head(const std::filesystem::path& path);

} // namespace longtail
