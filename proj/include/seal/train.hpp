#pragma once

#include "seal/corpus.hpp"
#include "seal/model.hpp"

#include <functional>
#include <optional>
#include <vector>

#include <json.hpp>

namespace seal::tiny {

struct TrainConfig {
    TinyConfig model;            // vocab_size is filled from the tokenizer when 0
    uint64_t seed = 1234;        // parameter init + batch order
    size_t batch_size = 16;
    size_t max_epochs = 30;
    double lr = 3e-3;
    double min_lr_fraction = 0.1;
    size_t warmup_steps = 50;
    double beta1 = 0.9;
    double beta2 = 0.98;
    double adam_eps = 1e-8;
    double grad_clip = 1.0;
    // stop once a full epoch averages below this (nats per output token)
    double target_loss = 0.0;
    // training fails unless the final epoch loss is below this
    double loss_threshold = 1.0;

    nlohmann::json to_json() const;
};

struct TrainLogEntry {
    size_t epoch = 0;
    size_t steps = 0;
    double mean_loss = 0.0;   // nats per output token over the epoch
    double lr = 0.0;
    double seconds = 0.0;
};

struct TrainResult {
    TinyModel model;
    std::vector<TrainLogEntry> log;
    double initial_loss = 0.0;
    double final_loss = 0.0;
};

// One training example: [BOS] prompt output [EOS]; loss on output + EOS.
struct EncodedSample {
    std::vector<TokenId> tokens;
    size_t loss_start = 0;
};

EncodedSample encode_sample(const WordTokenizer & tok, const CorpusSample & sample);

struct BatchGradient {
    std::vector<float> grad;   // summed over targets, divided by target count
    double loss_sum = 0.0;
    size_t targets = 0;
};

// Gradient of the mean next-token loss over a batch. Per-sample gradients are
// reduced in sample order, so the result does not depend on thread count.
namespace serial {
BatchGradient batch_gradient(const TinyConfig & cfg, const ParamLayout & layout, std::span<const float> params,
                             std::span<const EncodedSample> batch);
}
namespace parallel {
BatchGradient batch_gradient(const TinyConfig & cfg, const ParamLayout & layout, std::span<const float> params,
                             std::span<const EncodedSample> batch);
}

// mean nats per output token
double evaluate_loss(const TinyModel & model, std::span<const CorpusSample> samples);

using TrainProgress = std::function<void(const TrainLogEntry &)>;

// Throws DivergedTraining when the last epoch does not get below
// config.loss_threshold.
TrainResult train_tiny(const std::vector<CorpusSample> & corpus, TrainConfig config,
                       const TrainProgress & progress = {});

// hash over corpus text and training hyperparameters
std::string training_hash(const std::vector<CorpusSample> & corpus, const TrainConfig & config);

} // namespace seal::tiny
