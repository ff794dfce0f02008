#pragma once

#include "longtail/data.hpp"
#include "longtail/head.hpp"
#include "longtail/losses.hpp"
#include "longtail/sampling.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

namespace longtail {

// Which parameters SGD may touch.
enum class Freeze {
    nothing,
    // Only the per-class scales f (learnable weight scaling).
    all_but_scales,
    // Hidden layers fixed; final-layer W, b (and scales, if present) train.
    all_but_classifier,
};

std::string_view to_string(Freeze freeze);
Freeze parse_freeze(std::string_view text);

struct TrainConfig {
    int epochs = 90;
    int batch_size = 64;
    double lr0 = 0.2;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    SamplingStrategy sampler = SamplingStrategy::instance_balanced();
    LossSpec loss;
    std::uint64_t seed = 0;
    Freeze freeze = Freeze::nothing;

    // epochs == 0 is accepted and leaves the head untouched.
    void validate() const;
};

struct EpochRecord {
    int epoch = 0;
    // Learning rate at the first step of the epoch.
    double lr = 0.0;
    double mean_loss = 0.0;
    // Accuracy of the pre-update predictions on the sampled stream.
    double train_acc = 0.0;
};

struct TrainResult {
    ClassifierHead head;
    std::vector<EpochRecord> history;
};

class DivergenceError : public Error {
public:
    using Error::Error;
};

// Half-cosine decay from lr0 at step 0 to 0 at total_steps, no restarts.
double cosine_lr(long long step, long long total_steps, double lr0);

// Mini-batch SGD with momentum and a per-step cosine schedule over
// epochs * ceil(n / batch_size) steps, drawing each epoch from
// make_epoch_stream. Weight decay applies to weights and biases, never to
// scales. Deterministic in config.seed.
TrainResult train_head(const Dataset& train, const TrainConfig& config, ClassifierHead init);

// Same, starting from init_head(d, C, kind, config.seed, hidden_widths).
TrainResult train_head(const Dataset& train, const TrainConfig& config,
                       HeadKind kind = HeadKind::linear,
                       const std::vector<int>& hidden_widths = {});

// epoch,lr,mean_loss,train_acc
void write_history_csv(std::span<const EpochRecord> history, std::ostream& out);

} // namespace longtail
