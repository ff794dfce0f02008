#include "longtail/training.hpp"

#include "longtail/rng.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

namespace longtail {

std::string_view to_string(Freeze freeze)
{
    switch (freeze) {
    case Freeze::nothing: return "nothing";
    case Freeze::all_but_scales: return "all_but_scales";
    case Freeze::all_but_classifier: return "all_but_classifier";
    }
    return "?";
}

Freeze parse_freeze(std::string_view text)
{
    for (auto freeze : {Freeze::nothing, Freeze::all_but_scales, Freeze::all_but_classifier}) {
        if (text == to_string(freeze)) {
            return freeze;
        }
    }
    throw Error("unknown freeze mode '" + std::string(text) + "'");
}

void TrainConfig::validate() const
{
    if (epochs < 0) {
        throw Error("train: epochs must be >= 0");
    }
    if (batch_size < 1) {
        throw Error("train: batch_size must be >= 1");
    }
    if (!(lr0 >= 0.0) || !std::isfinite(lr0)) {
        throw Error("train: lr must be a non-negative number");
    }
    if (!(momentum >= 0.0 && momentum < 1.0)) {
        throw Error("train: momentum must lie in [0, 1)");
    }
    if (!(weight_decay >= 0.0)) {
        throw Error("train: weight_decay must be >= 0");
    }
    sampler.validate();
    if (sampler.kind == SamplerKind::progressive && sampler.total_epochs < epochs) {
        throw Error("train: progressive sampler total_epochs is shorter than the run");
    }
    loss.validate();
}

double cosine_lr(long long step, long long total_steps, double lr0)
{
    if (total_steps < 1 || step < 0 || step > total_steps) {
        throw Error("cosine_lr: need 0 <= step <= total_steps, total_steps >= 1");
    }
    if (step == total_steps) {
        return 0.0;
    }
    const double phase = static_cast<double>(step) / static_cast<double>(total_steps);
    return 0.5 * lr0 * (1.0 + std::cos(std::numbers::pi * phase));
}

namespace {

// One trainable tensor's momentum buffer: v = mu v + g + wd theta, theta -= lr v.
template <typename Tensor>
struct Slot {
    Tensor velocity;

    void step(Tensor& param, const Tensor& grad, double lr, double momentum, double decay)
    {
        if (velocity.size() == 0) {
            velocity = Tensor::Zero(param.rows(), param.cols());
        }
        if (decay != 0.0) {
            velocity = momentum * velocity + grad + decay * param;
        } else {
            velocity = momentum * velocity + grad;
        }
        param -= lr * velocity;
    }
};

RowMatrix gather_rows(const RowMatrix& source, std::span<const std::size_t> rows)
{
    RowMatrix out(static_cast<Eigen::Index>(rows.size()), source.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = source.row(static_cast<Eigen::Index>(rows[i]));
    }
    return out;
}

class Trainer {
public:
    Trainer(const Dataset& train, const TrainConfig& config, ClassifierHead head)
        : train_(train), config_(config), head_(std::move(head)),
          loss_(config.loss, train.class_counts())
    {
        head_.validate();
        if (head_.kind == HeadKind::ncm) {
            throw Error("train: ncm heads are not trainable");
        }
        if (head_.kind == HeadKind::cosine && !head_.hidden.empty()) {
            throw Error("train: cosine heads cannot carry hidden layers");
        }
        if (head_.input_dim() != train.dim() || head_.num_classes() != train.num_classes) {
            throw Error("train: head shape (" + std::to_string(head_.input_dim()) + " x "
                        + std::to_string(head_.num_classes()) + ") does not match dataset ("
                        + std::to_string(train.dim()) + " x " + std::to_string(train.num_classes)
                        + ")");
        }
        if (config_.freeze == Freeze::all_but_scales && !head_.scales) {
            head_.scales = Vector::Ones(head_.num_classes());
        }
        train_hidden_ = config_.freeze == Freeze::nothing && !head_.hidden.empty();
        train_classifier_ = config_.freeze != Freeze::all_but_scales;
        train_scales_ = head_.scales.has_value();
        hidden_weight_slots_.resize(head_.hidden.size());
        hidden_bias_slots_.resize(head_.hidden.size());
        // Frozen hidden layers: represent once.
        if (!train_hidden_ && !head_.hidden.empty()) {
            frozen_features_ = head_.represent(train.features);
        }
    }

    TrainResult run()
    {
        TrainResult result;
        const auto n = static_cast<long long>(train_.size());
        const long long batch = config_.batch_size;
        const long long steps_per_epoch = (n + batch - 1) / batch;
        const long long total_steps = steps_per_epoch * config_.epochs;
        const EpochSampler sampler(train_, config_.sampler, derive_seed(config_.seed, 0x5A3));

        long long step = 0;
        for (int epoch = 0; epoch < config_.epochs; ++epoch) {
            const auto stream = sampler.epoch(epoch);
            EpochRecord record;
            record.epoch = epoch;
            record.lr = cosine_lr(step, total_steps, config_.lr0);
            double loss_sum = 0.0;
            std::size_t correct = 0;
            for (long long start = 0; start < n; start += batch, ++step) {
                const auto count = static_cast<std::size_t>(std::min(batch, n - start));
                const std::span<const std::size_t> rows(stream.data() + start, count);
                const double lr = cosine_lr(step, total_steps, config_.lr0);
                const auto [batch_loss, batch_correct] = sgd_step(rows, lr);
                if (!std::isfinite(batch_loss)) {
                    throw DivergenceError("train: loss became non-finite at epoch "
                                          + std::to_string(epoch) + ", step "
                                          + std::to_string(step) + " (lr "
                                          + std::to_string(lr) + ")");
                }
                loss_sum += batch_loss;
                correct += batch_correct;
            }
            record.mean_loss = loss_sum / static_cast<double>(n);
            record.train_acc = static_cast<double>(correct) / static_cast<double>(n);
            result.history.push_back(record);
        }
        result.head = std::move(head_);
        return result;
    }

private:
    // Returns the summed per-sample loss and the count of correct
    // pre-update predictions for the batch.
    std::pair<double, std::size_t> sgd_step(std::span<const std::size_t> rows, double lr)
    {
        const auto b = static_cast<Eigen::Index>(rows.size());
        const RowMatrix inputs = gather_rows(
            frozen_features_.size() > 0 ? frozen_features_ : train_.features, rows);

        // Forward through trainable hidden layers, keeping pre-activations.
        std::vector<RowMatrix> activations;
        std::vector<RowMatrix> pre;
        RowMatrix features = inputs;
        if (train_hidden_) {
            activations.push_back(inputs);
            for (const auto& layer : head_.hidden) {
                RowMatrix z = activations.back() * layer.weights;
                z.rowwise() += layer.bias.transpose();
                pre.push_back(z);
                activations.push_back(z.cwiseMax(0.0));
            }
            features = activations.back();
        }

        const bool cosine = head_.kind == HeadKind::cosine;
        RowMatrix matched = features;
        Vector row_norms;
        Vector col_norms;
        RowMatrix raw;
        if (cosine) {
            if (head_.rectify_input) {
                matched = matched.cwiseMax(0.0);
            }
            row_norms = matched.rowwise().norm();
            col_norms = head_.weights.colwise().norm().transpose();
            raw = matched * head_.weights;
            for (Eigen::Index i = 0; i < b; ++i) {
                for (Eigen::Index j = 0; j < raw.cols(); ++j) {
                    const double denom = row_norms[i] * col_norms[j];
                    raw(i, j) = denom > 0.0 ? raw(i, j) / denom : 0.0;
                }
            }
            raw *= head_.cosine_scale;
        } else {
            raw = features * head_.weights;
        }
        RowMatrix logits = raw;
        if (head_.scales) {
            logits.array().rowwise() *= head_.scales->transpose().array();
        }
        if (head_.bias) {
            logits.rowwise() += head_.bias->transpose();
        }

        // dL/dlogits, averaged over the batch.
        RowMatrix grad(b, logits.cols());
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (Eigen::Index i = 0; i < b; ++i) {
            const int label = train_.labels[rows[static_cast<std::size_t>(i)]];
            const Vector row = logits.row(i).transpose();
            if (argmax(row) == label) {
                ++correct;
            }
            auto result = loss_(row, label);
            loss_sum += result.loss;
            grad.row(i) = result.grad.transpose();
        }
        grad /= static_cast<double>(b);
        if (!std::isfinite(loss_sum)) {
            return {loss_sum, correct};
        }

        const double momentum = config_.momentum;
        const double decay = config_.weight_decay;

        Vector grad_scales;
        if (train_scales_) {
            grad_scales = (grad.array() * raw.array()).colwise().sum().transpose();
        }

        RowMatrix grad_raw = grad;
        if (head_.scales) {
            grad_raw.array().rowwise() *= head_.scales->transpose().array();
        }

        if (train_classifier_) {
            Matrix grad_w;
            if (cosine) {
                // raw_ij = s * <x_i/|x_i|, w_j/|w_j|>
                RowMatrix unit_rows = matched;
                for (Eigen::Index i = 0; i < b; ++i) {
                    if (row_norms[i] > 0.0) {
                        unit_rows.row(i) /= row_norms[i];
                    }
                }
                grad_w = Matrix(unit_rows.transpose() * grad_raw) * head_.cosine_scale;
                for (Eigen::Index j = 0; j < grad_w.cols(); ++j) {
                    if (col_norms[j] == 0.0) {
                        continue;
                    }
                    const double dot = grad_raw.col(j).dot(raw.col(j)) / head_.cosine_scale;
                    const Vector unit_w = head_.weights.col(j) / col_norms[j];
                    grad_w.col(j) = (grad_w.col(j) - head_.cosine_scale * dot * unit_w)
                                    / col_norms[j];
                }
            } else {
                grad_w = features.transpose() * grad_raw;
            }

            Matrix grad_features;
            if (train_hidden_) {
                grad_features = grad_raw * head_.weights.transpose();
            }
            weight_slot_.step(head_.weights, grad_w, lr, momentum, decay);
            if (head_.bias) {
                bias_slot_.step(*head_.bias, grad.colwise().sum().transpose(), lr, momentum,
                                decay);
            }

            if (train_hidden_) {
                Matrix upstream = grad_features;
                for (std::size_t l = head_.hidden.size(); l-- > 0;) {
                    const Matrix local = upstream.array() * (pre[l].array() > 0.0).cast<double>();
                    const Matrix grad_layer = activations[l].transpose() * local;
                    const Vector grad_bias = local.colwise().sum().transpose();
                    if (l > 0) {
                        upstream = local * head_.hidden[l].weights.transpose();
                    }
                    auto& layer = head_.hidden[l];
                    hidden_weight_slots_[l].step(layer.weights, grad_layer, lr, momentum, decay);
                    hidden_bias_slots_[l].step(layer.bias, grad_bias, lr, momentum, decay);
                }
            }
        }

        if (train_scales_) {
            scale_slot_.step(*head_.scales, grad_scales, lr, momentum, 0.0);
        }
        return {loss_sum, correct};
    }

    const Dataset& train_;
    TrainConfig config_;
    ClassifierHead head_;
    LossFunction loss_;
    RowMatrix frozen_features_;
    bool train_hidden_ = false;
    bool train_classifier_ = true;
    bool train_scales_ = false;
    Slot<Matrix> weight_slot_;
    Slot<Vector> bias_slot_;
    Slot<Vector> scale_slot_;
    std::vector<Slot<Matrix>> hidden_weight_slots_;
    std::vector<Slot<Vector>> hidden_bias_slots_;
};

} // namespace

TrainResult train_head(const Dataset& train, const TrainConfig& config, ClassifierHead init)
{
    config.validate();
    if (train.size() == 0) {
        throw Error("train: empty dataset");
    }
    return Trainer(train, config, std::move(init)).run();
}

TrainResult train_head(const Dataset& train, const TrainConfig& config, HeadKind kind,
                       const std::vector<int>& hidden_widths)
{
    return train_head(train, config,
                      init_head(train.dim(), train.num_classes, kind, config.seed, hidden_widths));
}

void write_history_csv(std::span<const EpochRecord> history, std::ostream& out)
{
    std::ostringstream body;
    body.precision(17);
    body << "epoch,lr,mean_loss,train_acc\n";
    for (const auto& r : history) {
        body << r.epoch << ',' << r.lr << ',' << r.mean_loss << ',' << r.train_acc << '\n';
    }
    out << body.str();
}

} // namespace longtail
