#include "seal/tiny_backend.hpp"

#include "seal/errors.hpp"
#include "seal/random.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>

namespace seal {

TinyBackend::TinyBackend(std::shared_ptr<const tiny::TinyModel> model, std::string model_id)
    : model_(std::move(model)), model_id_(std::move(model_id)) {
    if (model_id_.empty()) {
        model_id_ = "seal-tiny-seed" + std::to_string(model_->seed());
    }
}

BackendCapabilities TinyBackend::capabilities() const {
    const auto & c = model_->config();
    BackendCapabilities caps;
    caps.model_id = model_id_;
    caps.n_layers = c.n_layers;
    caps.d_model = c.d_model;
    caps.vocab_size = c.vocab_size;
    caps.max_context = c.max_context;
    caps.newline_token_ids = model_->tokenizer().newline_token_ids();
    return caps;
}

std::vector<TokenId> TinyBackend::tokenize(std::string_view text) {
    return model_->tokenizer().encode(text);
}

std::optional<TokenId> TinyBackend::single_token_id(std::string_view piece) {
    const auto ids = model_->tokenizer().encode(piece);
    if (ids.size() != 1 || ids.front() == WordTokenizer::kUnk) {
        return std::nullopt;
    }
    return ids.front();
}

std::vector<TokenId> TinyBackend::prompt_ids(std::string_view prompt) const {
    std::vector<TokenId> ids{WordTokenizer::kBos};
    const auto body = model_->tokenizer().encode(prompt);
    ids.insert(ids.end(), body.begin(), body.end());
    if (ids.size() >= model_->config().max_context) {
        throw ContextOverflow("prompt of " + std::to_string(ids.size()) + " tokens does not fit context " +
                              std::to_string(model_->config().max_context));
    }
    return ids;
}

bool TinyBackend::steer_here(const std::optional<Intervention> & iv, std::span<const TokenId> generated,
                             TokenId tok) const {
    const auto & t = model_->tokenizer();
    if (!iv || !t.is_newline_only(tok)) {
        return false;
    }
    if (iv->scope == BoundaryScope::AllNewlineTokens) {
        return true;
    }
    // first token of a "\n\n" pair: an even number of newline characters
    // precede it within the current run
    size_t run = 0;
    for (size_t i = generated.size(); i-- > 0 && t.is_newline_only(generated[i]);) {
        run += t.piece(generated[i]).size();
    }
    return run % 2 == 0;
}

namespace {

TokenId sample_token(const std::vector<double> & logits, const Sampling & s, Rng & rng) {
    if (s.mode == SamplingMode::Greedy) {
        size_t best = 0;
        for (size_t i = 1; i < logits.size(); ++i) {
            if (logits[i] > logits[best]) best = i;
        }
        return static_cast<TokenId>(best);
    }
    double mx = -INFINITY;
    for (double v : logits) mx = std::max(mx, v);
    std::vector<double> p(logits.size());
    double z = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp((logits[i] - mx) / s.temperature);
        z += p[i];
    }
    const double u = rng.uniform() * z;
    double acc = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        acc += p[i];
        if (u < acc) return static_cast<TokenId>(i);
    }
    // u landed in the rounding gap at the top; take the last nonzero entry
    for (size_t i = p.size(); i-- > 0;) {
        if (p[i] > 0.0) return static_cast<TokenId>(i);
    }
    return 0;
}

} // namespace

GenerationResult TinyBackend::generate(std::string_view prompt, const GenerationConfig & config) {
    return generate_const(prompt, config);
}

GenerationResult TinyBackend::generate_const(std::string_view prompt, const GenerationConfig & config) const {
    const auto t0 = std::chrono::steady_clock::now();
    const auto caps = capabilities();
    config.validate(caps);
    const auto & tok = model_->tokenizer();
    const auto ids = prompt_ids(prompt);

    tiny::Session session = model_->new_session();
    std::span<const float> logits;
    for (TokenId id : ids) {
        logits = session.step(id);
    }

    Rng rng(config.sampling.seed);
    GenerationResult r;
    TokenId prev = ids.back();
    std::vector<double> biased(caps.vocab_size);
    std::vector<float> tap;
    r.finish_reason = "length";
    while (r.token_ids.size() < config.max_new_tokens) {
        for (size_t v = 0; v < biased.size(); ++v) {
            biased[v] = static_cast<double>(logits[v]);
        }
        for (const auto & [id, b] : config.logit_bias) {
            biased[static_cast<size_t>(id)] += b;
        }
        if (!config.logit_probe_ids.empty()) {
            std::vector<double> raw, adj;
            for (TokenId id : config.logit_probe_ids) {
                raw.push_back(static_cast<double>(logits[static_cast<size_t>(id)]));
                adj.push_back(biased[static_cast<size_t>(id)]);
            }
            r.probe_raw_logits.push_back(std::move(raw));
            r.probe_logits.push_back(std::move(adj));
        }
        const TokenId next = sample_token(biased, config.sampling, rng);
        if (next == WordTokenizer::kEos) {
            r.finish_reason = "eos";
            break;
        }
        if (session.position() >= caps.max_context) {
            r.finish_reason = "context";
            break;
        }
        const size_t begin = r.text.size();
        r.text += tok.render_after(prev, next);
        r.offsets.push_back({begin, r.text.size()});

        tiny::StepControl ctl;
        const bool newline = tok.is_newline_only(next);
        if (steer_here(config.intervention, r.token_ids, next)) {
            ctl.steer = config.intervention->vector;
            ctl.alpha = static_cast<float>(config.intervention->alpha);
            ctl.steer_layer = config.intervention->layer;
            ++r.steered_positions;
        }
        if (newline && config.tap_layer) {
            ctl.tap = &tap;
            ctl.tap_layer = *config.tap_layer;
        }
        r.token_ids.push_back(next);
        logits = session.step(next, ctl);
        if (ctl.tap) {
            r.taps.push_back({*config.tap_layer, r.token_ids.size() - 1, session.position() - 1, tap});
        }
        prev = next;

        bool stop = false;
        for (const auto & s : config.stop) {
            if (!s.empty() && r.text.size() >= s.size() &&
                r.text.find(s, begin >= s.size() ? begin - s.size() + 1 : 0) != std::string::npos) {
                stop = true;
            }
        }
        if (stop) {
            r.finish_reason = "stop";
            break;
        }
    }
    r.tokens_generated = r.token_ids.size();
    r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

std::vector<std::vector<float>> TinyBackend::replay_logits(std::string_view prompt,
                                                           std::span<const TokenId> continuation) const {
    const auto ids = prompt_ids(prompt);
    tiny::Session session = model_->new_session();
    std::span<const float> logits;
    for (TokenId id : ids) {
        logits = session.step(id);
    }
    std::vector<std::vector<float>> out;
    for (TokenId id : continuation) {
        out.emplace_back(logits.begin(), logits.end());
        logits = session.step(id);
    }
    return out;
}

std::vector<std::vector<std::vector<float>>> TinyBackend::residual_states(
    std::string_view prompt, std::span<const TokenId> continuation, const std::optional<Intervention> & iv) const {
    const auto ids = prompt_ids(prompt);
    tiny::Session session = model_->new_session();
    std::vector<std::vector<std::vector<float>>> states;
    std::vector<std::vector<float>> layers;
    for (TokenId id : ids) {
        tiny::StepControl ctl;
        ctl.all_layers = &layers;
        session.step(id, ctl);
        states.push_back(layers);
    }
    for (size_t i = 0; i < continuation.size(); ++i) {
        tiny::StepControl ctl;
        ctl.all_layers = &layers;
        if (steer_here(iv, continuation.first(i), continuation[i])) {
            ctl.steer = iv->vector;
            ctl.alpha = static_cast<float>(iv->alpha);
            ctl.steer_layer = iv->layer;
        }
        session.step(continuation[i], ctl);
        states.push_back(layers);
    }
    return states;
}

std::string default_model_dir() {
    if (const char * env = std::getenv("SEAL_MODEL_DIR")) {
        return env;
    }
    return SEAL_MODEL_DIR;
}

std::string tiny_checkpoint_path(uint64_t seed, const std::string & model_dir) {
    return (std::filesystem::path(model_dir) / ("tiny_seed" + std::to_string(seed) + ".ckpt")).string();
}

std::unique_ptr<TinyBackend> build_tiny_backend(uint64_t seed, const std::string & model_dir) {
    const std::string path = tiny_checkpoint_path(seed, model_dir);
    if (!std::filesystem::exists(path)) {
        throw MissingCheckpoint("no tiny checkpoint for seed " + std::to_string(seed) + " at " + path);
    }
    auto model = std::make_shared<const tiny::TinyModel>(tiny::load_checkpoint(path));
    return std::make_unique<TinyBackend>(std::move(model));
}

} // namespace seal
