#include "longtail/balancing.hpp"

#include "longtail/log.hpp"
#include "longtail/rng.hpp"
#include "longtail/sampling.hpp"

#include <cmath>
#include <sstream>
#include <string>

namespace longtail {

ClassifierHead crt(const Dataset& train, TrainConfig config)
{
    config.sampler = SamplingStrategy::class_balanced();
    config.freeze = Freeze::nothing;
    return train_head(train, config, HeadKind::linear).head;
}

ClassifierHead crt(const ClassifierHead& base, const Dataset& train, TrainConfig config)
{
    if (base.hidden.empty()) {
        return crt(train, config);
    }
    auto fresh = init_head(base.feature_dim(), base.num_classes(), HeadKind::linear, config.seed);
    ClassifierHead head = base;
    head.weights = std::move(fresh.weights);
    head.bias = Vector::Zero(base.num_classes());
    head.scales.reset();
    config.sampler = SamplingStrategy::class_balanced();
    config.freeze = Freeze::all_but_classifier;
    return train_head(train, config, std::move(head)).head;
}

std::string_view to_string(NcmMetric metric)
{
    return metric == NcmMetric::cosine ? "cosine" : "euclidean_l2norm";
}

NcmMetric parse_ncm_metric(std::string_view text)
{
    if (text == "cosine") {
        return NcmMetric::cosine;
    }
    if (text == "euclidean_l2norm" || text == "euclidean") {
        return NcmMetric::euclidean_l2norm;
    }
    throw Error("unknown NCM metric '" + std::string(text)
                + "' (expected cosine | euclidean_l2norm)");
}

NcmPrediction NCMClassifier::predict_one(const Eigen::Ref<const Vector>& z) const
{
    if (z.size() != means.rows()) {
        throw Error("ncm: query dimension mismatch");
    }
    const auto classes = means.cols();
    if (metric == NcmMetric::euclidean_l2norm) {
        int best = 0;
        double best_dist = (z - means.col(0)).squaredNorm();
        for (Eigen::Index j = 1; j < classes; ++j) {
            const double dist = (z - means.col(j)).squaredNorm();
            if (dist < best_dist) {
                best_dist = dist;
                best = static_cast<int>(j);
            }
        }
        return {best, false};
    }
    const double query_norm = z.norm();
    if (query_norm == 0.0) {
        return {0, true};
    }
    Vector similarity(classes);
    for (Eigen::Index j = 0; j < classes; ++j) {
        const double mean_norm = means.col(j).norm();
        similarity[j] = mean_norm > 0.0 ? z.dot(means.col(j)) / (query_norm * mean_norm) : 0.0;
    }
    return {argmax(similarity), false};
}

std::vector<int> NCMClassifier::predict(const RowMatrix& queries) const
{
    std::vector<int> out(static_cast<std::size_t>(queries.rows()));
    for (Eigen::Index i = 0; i < queries.rows(); ++i) {
        out[static_cast<std::size_t>(i)] = predict_one(queries.row(i).transpose()).label;
    }
    return out;
}

ClassifierHead NCMClassifier::to_head() const
{
    ClassifierHead head;
    head.kind = HeadKind::ncm;
    head.weights = means;
    for (Eigen::Index j = 0; j < head.weights.cols(); ++j) {
        const double norm = head.weights.col(j).norm();
        if (norm > 0.0) {
            head.weights.col(j) /= norm;
        }
    }
    return head;
}

NCMClassifier ncm_fit(const Dataset& train, NcmMetric metric)
{
    const auto classes = static_cast<Eigen::Index>(train.num_classes);
    Matrix sums = Matrix::Zero(train.dim(), classes);
    std::vector<std::size_t> counts(static_cast<std::size_t>(classes), 0);
    for (std::size_t i = 0; i < train.size(); ++i) {
        const auto c = train.labels[i];
        sums.col(c) += train.features.row(static_cast<Eigen::Index>(i)).transpose();
        ++counts[static_cast<std::size_t>(c)];
    }
    NCMClassifier classifier;
    classifier.metric = metric;
    classifier.means = std::move(sums);
    for (Eigen::Index j = 0; j < classes; ++j) {
        if (counts[static_cast<std::size_t>(j)] == 0) {
            throw Error("ncm: empty class " + std::to_string(j));
        }
        classifier.means.col(j) /= static_cast<double>(counts[static_cast<std::size_t>(j)]);
        if (metric == NcmMetric::euclidean_l2norm) {
            const double norm = classifier.means.col(j).norm();
            if (norm == 0.0) {
                throw Error("ncm: class " + std::to_string(j) + " has a zero mean");
            }
            classifier.means.col(j) /= norm;
        }
    }
    return classifier;
}

ClassifierHead tau_normalize(const ClassifierHead& head, double tau)
{
    if (!std::isfinite(tau)) {
        throw Error("tau_normalize: tau must be finite");
    }
    if (tau < 0.0 || tau > 1.0) {
        std::ostringstream message;
        message << "tau_normalize: tau " << tau << " outside [0, 1]";
        warn(message.str());
    }
    ClassifierHead out = head;
    for (Eigen::Index j = 0; j < out.weights.cols(); ++j) {
        const double norm = out.weights.col(j).norm();
        if (norm == 0.0) {
            throw Error("tau_normalize: class " + std::to_string(j) + " has a zero weight vector");
        }
        out.weights.col(j) /= std::pow(norm, tau);
    }
    out.bias.reset();
    if (out.kind == HeadKind::linear) {
        out.kind = HeadKind::tau_normalized;
    }
    return out;
}

ClassifierHead lws_fit(const ClassifierHead& head, const Dataset& train, TrainConfig config)
{
    ClassifierHead start = head;
    start.scales = Vector::Ones(head.num_classes());
    config.sampler = SamplingStrategy::class_balanced();
    config.freeze = Freeze::all_but_scales;
    config.loss = LossSpec{};
    return train_head(train, config, std::move(start)).head;
}

std::string_view to_string(TauObjective objective)
{
    return objective == TauObjective::val_top1 ? "val_top1" : "train_class_averaged";
}

namespace {

double score_predictions(std::span<const int> predicted, const Dataset& eval,
                         TauObjective objective)
{
    std::vector<std::size_t> correct(static_cast<std::size_t>(eval.num_classes), 0);
    std::vector<std::size_t> total(static_cast<std::size_t>(eval.num_classes), 0);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < eval.size(); ++i) {
        const auto label = static_cast<std::size_t>(eval.labels[i]);
        ++total[label];
        if (predicted[i] == eval.labels[i]) {
            ++correct[label];
            ++hits;
        }
    }
    if (objective == TauObjective::val_top1) {
        return eval.size() == 0 ? 0.0
                                : static_cast<double>(hits) / static_cast<double>(eval.size());
    }
    double sum = 0.0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < correct.size(); ++c) {
        if (total[c] > 0) {
            sum += static_cast<double>(correct[c]) / static_cast<double>(total[c]);
            ++present;
        }
    }
    return present == 0 ? 0.0 : sum / static_cast<double>(present);
}

} // namespace

TauSelection select_tau(const ClassifierHead& head, const Dataset& eval,
                        std::span<const double> grid, TauObjective objective)
{
    if (grid.empty()) {
        throw Error("select_tau: empty grid");
    }
    TauSelection selection;
    selection.objective = objective;
    selection.grid.assign(grid.begin(), grid.end());
    const RowMatrix features = head.represent(eval.features);
    double best_score = -1.0;
    for (double tau : grid) {
        const auto normalized = tau_normalize(head, tau);
        const RowMatrix logits = normalized.logits_from_features(features);
        std::vector<int> predicted(eval.size());
        for (Eigen::Index i = 0; i < logits.rows(); ++i) {
            predicted[static_cast<std::size_t>(i)] = argmax(logits.row(i).transpose());
        }
        const double score = score_predictions(predicted, eval, objective);
        selection.scores.push_back(score);
        if (score > best_score || (score == best_score && tau < selection.chosen)) {
            best_score = score;
            selection.chosen = tau;
        }
    }
    return selection;
}

std::vector<double> tau_grid(double lo, double hi, double step)
{
    if (!(step > 0.0) || !(hi >= lo)) {
        throw Error("tau grid: need step > 0 and hi >= lo");
    }
    std::vector<double> grid;
    const auto steps = static_cast<long long>(std::floor((hi - lo) / step + 1e-9));
    for (long long i = 0; i <= steps; ++i) {
        // Snap to 1e-12 so 3 * 0.05 prints as 0.15.
        const double value = lo + static_cast<double>(i) * step;
        grid.push_back(std::round(value * 1e12) / 1e12);
    }
    return grid;
}

std::vector<double> default_tau_grid() { return tau_grid(0.0, 1.0, 0.05); }

TauObjectiveValue tau_loss_and_gradient(const Matrix& weights, const RowMatrix& features,
                                        std::span<const int> labels, double tau)
{
    if (features.cols() != weights.rows()
        || static_cast<std::size_t>(features.rows()) != labels.size() || labels.empty()) {
        throw Error("tau_loss_and_gradient: shape mismatch");
    }
    const Vector log_norms = weights.colwise().norm().transpose().array().log();
    // logit_j = exp(-tau log||w_j||) (w_j . h);  d logit_j / d tau = -log||w_j|| logit_j
    const Vector factors = (-tau * log_norms.array()).exp();
    RowMatrix logits = features * weights;
    logits.array().rowwise() *= factors.transpose().array();

    TauObjectiveValue value;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const Vector row = logits.row(i).transpose();
        const auto result = softmax_xent(row, labels[static_cast<std::size_t>(i)]);
        value.loss += result.loss;
        value.grad -= (result.grad.array() * log_norms.array() * row.array()).sum();
    }
    const auto n = static_cast<double>(logits.rows());
    value.loss /= n;
    value.grad /= n;
    return value;
}

double learn_tau(const ClassifierHead& head, const Dataset& train, const LearnTauConfig& config)
{
    if (config.epochs < 0 || config.batch_size < 1 || !(config.lr0 >= 0.0)) {
        throw Error("learn_tau: invalid optimiser settings");
    }
    for (Eigen::Index j = 0; j < head.weights.cols(); ++j) {
        if (head.weights.col(j).norm() == 0.0) {
            throw Error("learn_tau: class " + std::to_string(j) + " has a zero weight vector");
        }
    }
    double tau = config.init;
    if (config.epochs == 0) {
        return tau;
    }
    const RowMatrix features = head.represent(train.features);
    const auto n = static_cast<long long>(train.size());
    const long long batch = config.batch_size;
    const long long steps_per_epoch = (n + batch - 1) / batch;
    const long long total_steps = steps_per_epoch * config.epochs;
    const EpochSampler sampler(train, SamplingStrategy::class_balanced(),
                               derive_seed(config.seed, 0x7A0));
    long long step = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const auto stream = sampler.epoch(epoch);
        for (long long start = 0; start < n; start += batch, ++step) {
            const auto count = std::min(batch, n - start);
            RowMatrix rows(count, features.cols());
            std::vector<int> labels(static_cast<std::size_t>(count));
            for (long long i = 0; i < count; ++i) {
                const auto index = stream[static_cast<std::size_t>(start + i)];
                rows.row(i) = features.row(static_cast<Eigen::Index>(index));
                labels[static_cast<std::size_t>(i)] = train.labels[index];
            }
            const auto value = tau_loss_and_gradient(head.weights, rows, labels, tau);
            if (!std::isfinite(value.loss) || !std::isfinite(value.grad)) {
                throw DivergenceError("learn_tau: non-finite objective at step "
                                      + std::to_string(step));
            }
            tau -= cosine_lr(step, total_steps, config.lr0) * value.grad;
        }
    }
    return tau;
}

CosinePrediction cosine_predict(const ClassifierHead& head, const Eigen::Ref<const Vector>& z,
                                bool with_activation)
{
    if (z.size() != head.input_dim()) {
        throw Error("cosine_predict: query dimension mismatch");
    }
    RowMatrix row = z.transpose();
    Vector feature = head.represent(row).row(0).transpose();
    if (with_activation) {
        feature = feature.cwiseMax(0.0);
    }
    const double feature_norm = feature.norm();
    if (feature_norm == 0.0) {
        warn("cosine_predict: zero feature vector, predicting class 0");
        return {0, true};
    }
    Vector similarity(head.num_classes());
    for (Eigen::Index j = 0; j < head.weights.cols(); ++j) {
        const double norm = head.weights.col(j).norm();
        if (norm == 0.0) {
            throw Error("cosine_predict: class " + std::to_string(j)
                        + " has a zero weight vector");
        }
        similarity[j] = feature.dot(head.weights.col(j)) / (feature_norm * norm);
    }
    return {argmax(similarity), false};
}

} // namespace longtail
