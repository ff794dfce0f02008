#pragma once

#include "longtail/data.hpp"
#include "longtail/head.hpp"
#include "longtail/training.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace longtail {

// Classifier re-training: fresh linear head trained with class-balanced
// sampling on the given (frozen) features. config.sampler is overridden.
ClassifierHead crt(const Dataset& train, TrainConfig config);

// Same, for a head with a hidden stack: the hidden layers are kept fixed
// and only a re-initialised final layer (zero bias) is trained.
ClassifierHead crt(const ClassifierHead& base, const Dataset& train, TrainConfig config);

enum class NcmMetric { cosine, euclidean_l2norm };

std::string_view to_string(NcmMetric metric);
NcmMetric parse_ncm_metric(std::string_view text);

struct NcmPrediction {
    int label = 0;
    // Set when a zero query made the cosine metric undefined (label is 0).
    bool zero_query = false;
};

// Nearest class mean. Under euclidean_l2norm the stored means are
// L2-normalised and queries are matched by Euclidean distance; under cosine
// the raw means are kept and matched by cosine similarity.
struct NCMClassifier {
    Matrix means; // d x C
    NcmMetric metric = NcmMetric::cosine;

    NcmPrediction predict_one(const Eigen::Ref<const Vector>& z) const;
    std::vector<int> predict(const RowMatrix& queries) const;

    // Equivalent ncm-kind head (unit-normalised means, cosine matching).
    // Both metrics rank classes identically once the means are unit length.
    ClassifierHead to_head() const;
};

NCMClassifier ncm_fit(const Dataset& train, NcmMetric metric = NcmMetric::cosine);
inline NcmPrediction ncm_predict(const NCMClassifier& classifier,
                                 const Eigen::Ref<const Vector>& z)
{
    return classifier.predict_one(z);
}

// w_j <- w_j / ||w_j||^tau on the final layer; the bias is dropped. Any
// tau is accepted, values outside [0, 1] produce a warning. Zero-norm
// columns are an error.
ClassifierHead tau_normalize(const ClassifierHead& head, double tau);

// Learnable weight scaling: f = 1, then only f trained with class-balanced
// sampling and cross-entropy. W and b are left bit-identical.
ClassifierHead lws_fit(const ClassifierHead& head, const Dataset& train, TrainConfig config);

enum class TauObjective { val_top1, train_class_averaged };

std::string_view to_string(TauObjective objective);

struct TauSelection {
    std::vector<double> grid;
    std::vector<double> scores;
    double chosen = 0.0;
    TauObjective objective = TauObjective::val_top1;
};

// Evaluates tau_normalize(head, tau) on eval for every grid value and keeps
// the best. val_top1 scores plain top-1; train_class_averaged scores the
// mean of per-class accuracies. Ties go to the smallest tau.
TauSelection select_tau(const ClassifierHead& head, const Dataset& eval,
                        std::span<const double> grid, TauObjective objective);

// Inclusive grid lo, lo + step, ..., hi (hi included when it lies on the lattice).
std::vector<double> tau_grid(double lo, double hi, double step);
std::vector<double> default_tau_grid();

struct LearnTauConfig {
    double init = 0.5;
    double lr0 = 0.01;
    int epochs = 5;
    int batch_size = 64;
    std::uint64_t seed = 0;
};

// Mean cross-entropy of tau-normalised, bias-free logits over a batch of
// represented features, and its derivative with respect to tau.
struct TauObjectiveValue {
    double loss = 0.0;
    double grad = 0.0;
};

TauObjectiveValue tau_loss_and_gradient(const Matrix& weights, const RowMatrix& features,
                                        std::span<const int> labels, double tau);

// Learns the scalar tau by plain SGD (cosine schedule, class-balanced
// sampling) with every other parameter frozen.
double learn_tau(const ClassifierHead& head, const Dataset& train, const LearnTauConfig& config);

struct CosinePrediction {
    int label = 0;
    bool zero_query = false;
};

// argmax_j cos(w_j, z'), z' = relu(z) when with_activation is set.
CosinePrediction cosine_predict(const ClassifierHead& head, const Eigen::Ref<const Vector>& z,
                                bool with_activation);

} // namespace longtail
