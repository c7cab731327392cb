#pragma once

#include "seal/backend.hpp"
#include "seal/errors.hpp"

#include <functional>
#include <mutex>
#include <string>
#include <vector>

namespace seal::testing {

// Backend whose output text is a function of the prompt and config. Tokens
// are "\n\n", "\n", runs of spaces and runs of other characters; a tap at a
// newline token holds {token position, layer, 1, ...}.
class ScriptedBackend : public Backend {
public:
    using Script = std::function<std::string(std::string_view prompt, const GenerationConfig & config)>;

    static constexpr TokenId kDouble = 1;
    static constexpr TokenId kSingle = 2;

    explicit ScriptedBackend(Script script, size_t d_model = 8, size_t n_layers = 3)
        : script_(std::move(script)), d_model_(d_model), n_layers_(n_layers) {}

    BackendCapabilities capabilities() const override {
        return {"scripted", n_layers_, d_model_, 4096, 100000, {kDouble, kSingle}};
    }

    std::vector<TokenId> tokenize(std::string_view text) override { return split(text).first; }

    GenerationResult generate(std::string_view prompt, const GenerationConfig & config) override {
        config.validate(capabilities());
        {
            std::lock_guard lock(mutex_);
            configs.push_back(config);
        }
        const std::string full = script_(prompt, config);
        if (full == "!throw") {
            throw BackendError("scripted failure");
        }
        auto [ids, spans] = split(full);
        GenerationResult r;
        r.finish_reason = "eos";
        if (ids.size() > config.max_new_tokens) {
            ids.resize(config.max_new_tokens);
            spans.resize(config.max_new_tokens);
            r.finish_reason = "length";
        }
        r.text = full.substr(0, spans.empty() ? 0 : spans.back().end);
        r.token_ids = ids;
        r.offsets = spans;
        r.tokens_generated = ids.size();
        for (size_t i = 0; i < ids.size(); ++i) {
            const bool newline = ids[i] == kDouble || ids[i] == kSingle;
            if (newline && config.intervention) {
                ++r.steered_positions;
            }
            if (newline && config.tap_layer) {
                std::vector<float> v(d_model_, 1.0f);
                v[0] = static_cast<float>(i);
                v[1] = static_cast<float>(*config.tap_layer);
                r.taps.push_back({*config.tap_layer, i, i, v});
            }
        }
        return r;
    }

    std::vector<GenerationConfig> configs;

private:
    static std::pair<std::vector<TokenId>, std::vector<CharSpan>> split(std::string_view t) {
        std::vector<TokenId> ids;
        std::vector<CharSpan> spans;
        size_t i = 0;
        while (i < t.size()) {
            const size_t b = i;
            TokenId id;
            if (t.compare(i, 2, "\n\n") == 0) {
                i += 2;
                id = kDouble;
            } else if (t[i] == '\n') {
                i += 1;
                id = kSingle;
            } else {
                const bool space = t[i] == ' ';
                while (i < t.size() && t[i] != '\n' && (t[i] == ' ') == space) ++i;
                id = static_cast<TokenId>(3 + std::hash<std::string_view>{}(t.substr(b, i - b)) % 4000);
            }
            ids.push_back(id);
            spans.push_back({b, i});
        }
        return {ids, spans};
    }

    Script script_;
    size_t d_model_;
    size_t n_layers_;
    std::mutex mutex_;
};

} // namespace seal::testing
