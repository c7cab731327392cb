#include "seal/train.hpp"

#include "seal/bytes.hpp"
#include "seal/errors.hpp"
#include "seal/random.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include <omp.h>

namespace seal::tiny {

nlohmann::json TrainConfig::to_json() const {
    return {{"model", model.to_json()},
            {"seed", seed},
            {"batch_size", batch_size},
            {"max_epochs", max_epochs},
            {"lr", lr},
            {"min_lr_fraction", min_lr_fraction},
            {"warmup_steps", warmup_steps},
            {"beta1", beta1},
            {"beta2", beta2},
            {"adam_eps", adam_eps},
            {"grad_clip", grad_clip},
            {"target_loss", target_loss},
            {"loss_threshold", loss_threshold}};
}

EncodedSample encode_sample(const WordTokenizer & tok, const CorpusSample & sample) {
    EncodedSample e;
    e.tokens.push_back(WordTokenizer::kBos);
    const auto p = tok.encode(sample.prompt);
    e.tokens.insert(e.tokens.end(), p.begin(), p.end());
    e.loss_start = e.tokens.size();
    const auto o = tok.encode(sample.output);
    e.tokens.insert(e.tokens.end(), o.begin(), o.end());
    e.tokens.push_back(WordTokenizer::kEos);
    return e;
}

namespace {

BatchGradient reduce(std::vector<std::vector<float>> & per_sample, const std::vector<double> & losses,
                     const std::vector<size_t> & counts, size_t n_params, bool par) {
    BatchGradient out;
    out.grad.assign(n_params, 0.0f);
    for (size_t b = 0; b < losses.size(); ++b) {
        out.loss_sum += losses[b];
        out.targets += counts[b];
    }
    const float inv = out.targets ? 1.0f / static_cast<float>(out.targets) : 0.0f;
    float * g = out.grad.data();
    const auto n = static_cast<std::ptrdiff_t>(n_params);
    #pragma omp parallel for schedule(static) if (par)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        float acc = 0.0f;
        for (const auto & ps : per_sample) acc += ps[i];
        g[i] = acc * inv;
    }
    return out;
}

} // namespace

namespace serial {

BatchGradient batch_gradient(const TinyConfig & cfg, const ParamLayout & layout, std::span<const float> params,
                             std::span<const EncodedSample> batch) {
    std::vector<std::vector<float>> per_sample(batch.size(), std::vector<float>(layout.total, 0.0f));
    std::vector<double> losses(batch.size());
    std::vector<size_t> counts(batch.size());
    SequenceGraph<float> graph(cfg, layout);
    for (size_t b = 0; b < batch.size(); ++b) {
        const auto [loss, n] = graph.forward(params, batch[b].tokens, batch[b].loss_start);
        graph.backward(params, per_sample[b], 1.0f);
        losses[b] = loss;
        counts[b] = n;
    }
    return reduce(per_sample, losses, counts, layout.total, false);
}

} // namespace serial

namespace parallel {

BatchGradient batch_gradient(const TinyConfig & cfg, const ParamLayout & layout, std::span<const float> params,
                             std::span<const EncodedSample> batch) {
    std::vector<std::vector<float>> per_sample(batch.size(), std::vector<float>(layout.total, 0.0f));
    std::vector<double> losses(batch.size());
    std::vector<size_t> counts(batch.size());
    #pragma omp parallel
    {
        SequenceGraph<float> graph(cfg, layout);
        #pragma omp for schedule(dynamic, 1)
        for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(batch.size()); ++b) {
            const auto [loss, n] = graph.forward(params, batch[b].tokens, batch[b].loss_start);
            graph.backward(params, per_sample[b], 1.0f);
            losses[b] = loss;
            counts[b] = n;
        }
    }
    return reduce(per_sample, losses, counts, layout.total, true);
}

} // namespace parallel

double evaluate_loss(const TinyModel & model, std::span<const CorpusSample> samples) {
    std::vector<double> losses(samples.size());
    std::vector<size_t> counts(samples.size());
    #pragma omp parallel
    {
        SequenceGraph<float> graph(model.config(), model.layout());
        #pragma omp for schedule(dynamic, 4)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(samples.size()); ++i) {
            const auto enc = encode_sample(model.tokenizer(), samples[i]);
            const auto [loss, n] = graph.forward(model.params(), enc.tokens, enc.loss_start);
            losses[i] = loss;
            counts[i] = n;
        }
    }
    const double total = std::accumulate(losses.begin(), losses.end(), 0.0);
    const size_t n = std::accumulate(counts.begin(), counts.end(), size_t{0});
    return n ? total / static_cast<double>(n) : 0.0;
}

std::string training_hash(const std::vector<CorpusSample> & corpus, const TrainConfig & config) {
    std::string blob = config.to_json().dump();
    for (const auto & s : corpus) {
        blob += '\x1e';
        blob += s.prompt;
        blob += s.output;
    }
    return bytes::sha256_hex(blob);
}

TrainResult train_tiny(const std::vector<CorpusSample> & corpus, TrainConfig config, const TrainProgress & progress) {
    if (corpus.empty()) {
        throw InvalidConfig("training corpus is empty");
    }
    const WordTokenizer tok;
    if (config.model.vocab_size == 0) {
        config.model.vocab_size = tok.vocab_size();
    }
    config.model.validate();
    const ParamLayout layout(config.model);

    std::vector<EncodedSample> data;
    data.reserve(corpus.size());
    for (const auto & s : corpus) {
        data.push_back(encode_sample(tok, s));
        if (data.back().tokens.size() > config.model.max_context) {
            throw ContextOverflow("corpus sample longer than max_context");
        }
    }

    std::vector<float> params = init_params(config.model, config.seed);
    std::vector<float> m(layout.total, 0.0f), v(layout.total, 0.0f);
    Rng order_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<size_t> order(data.size());
    std::iota(order.begin(), order.end(), size_t{0});

    const size_t steps_per_epoch = (data.size() + config.batch_size - 1) / config.batch_size;
    const size_t total_steps = steps_per_epoch * config.max_epochs;

    TrainResult result{TinyModel(config.model, params, config.seed, ""), {}, 0.0, 0.0};
    result.initial_loss = evaluate_loss(result.model, std::span(corpus).first(std::min<size_t>(corpus.size(), 256)));

    size_t step = 0;
    std::vector<EncodedSample> batch;
    for (size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        order_rng.shuffle(order.begin(), order.end());
        double epoch_loss = 0.0;
        size_t epoch_targets = 0;
        double lr = config.lr;
        for (size_t s = 0; s < steps_per_epoch; ++s, ++step) {
            batch.clear();
            for (size_t i = s * config.batch_size; i < std::min(data.size(), (s + 1) * config.batch_size); ++i) {
                batch.push_back(data[order[i]]);
            }
            BatchGradient bg = parallel::batch_gradient(config.model, layout, params, batch);
            if (!std::isfinite(bg.loss_sum)) {
                throw DivergedTraining("non-finite loss at step " + std::to_string(step));
            }
            epoch_loss += bg.loss_sum;
            epoch_targets += bg.targets;

            double norm2 = 0.0;
            for (float g : bg.grad) norm2 += static_cast<double>(g) * g;
            const double norm = std::sqrt(norm2);
            const float clip = norm > config.grad_clip ? static_cast<float>(config.grad_clip / norm) : 1.0f;

            if (step < config.warmup_steps) {
                lr = config.lr * static_cast<double>(step + 1) / static_cast<double>(config.warmup_steps);
            } else {
                const double prog = static_cast<double>(step - config.warmup_steps) /
                                    static_cast<double>(std::max<size_t>(1, total_steps - config.warmup_steps));
                lr = config.lr * (config.min_lr_fraction +
                                  (1.0 - config.min_lr_fraction) * 0.5 * (1.0 + std::cos(M_PI * std::min(1.0, prog))));
            }
            const double t = static_cast<double>(step + 1);
            const double bc1 = 1.0 - std::pow(config.beta1, t);
            const double bc2 = 1.0 - std::pow(config.beta2, t);
            const auto b1 = static_cast<float>(config.beta1), b2 = static_cast<float>(config.beta2);
            const auto step_size = static_cast<float>(lr / bc1);
            const auto inv_bc2 = static_cast<float>(1.0 / bc2);
            const auto eps = static_cast<float>(config.adam_eps);
            for (size_t i = 0; i < layout.total; ++i) {
                const float g = bg.grad[i] * clip;
                m[i] = b1 * m[i] + (1.0f - b1) * g;
                v[i] = b2 * v[i] + (1.0f - b2) * g * g;
                params[i] -= step_size * m[i] / (std::sqrt(v[i] * inv_bc2) + eps);
            }
        }
        TrainLogEntry entry;
        entry.epoch = epoch;
        entry.steps = step;
        entry.mean_loss = epoch_loss / static_cast<double>(std::max<size_t>(1, epoch_targets));
        entry.lr = lr;
        entry.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.log.push_back(entry);
        if (progress) {
            progress(entry);
        }
        if (config.target_loss > 0.0 && entry.mean_loss < config.target_loss) {
            break;
        }
    }

    result.final_loss = result.log.back().mean_loss;
    result.model = TinyModel(config.model, std::move(params), config.seed, training_hash(corpus, config));
    if (!(result.final_loss < config.loss_threshold)) {
        throw DivergedTraining("final loss " + std::to_string(result.final_loss) + " did not reach threshold " +
                               std::to_string(config.loss_threshold));
    }
    return result;
}

} // namespace seal::tiny
