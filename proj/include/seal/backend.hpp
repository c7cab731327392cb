#pragma once

// Backend contract: autoregressive generation with per-layer hidden-state
// taps, an additive residual-stream intervention at thought boundaries, and
// additive logit bias.
//
// "Hidden state at layer i" is the residual stream at the output of block i
// (0-based). Taps and interventions use that same site.

#include "seal/tokenizer.hpp"
#include "seal/trace.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace seal {

struct BackendCapabilities {
    std::string model_id;
    size_t n_layers = 0;
    size_t d_model = 0;
    size_t vocab_size = 0;
    size_t max_context = 0;
    std::vector<TokenId> newline_token_ids;
};

struct HiddenTap {
    size_t layer = 0;
    size_t token_position = 0;     // index into GenerationResult::token_ids
    size_t absolute_position = 0;  // position in the full context (prompt included)
    std::vector<float> vector;
};

enum class SamplingMode { Greedy, Temperature };

// Temperature sampling draws u = (mt19937_64() >> 11) * 2^-53 once per step
// and walks the cumulative softmax(logits / temperature) in token-id order.
struct Sampling {
    SamplingMode mode = SamplingMode::Greedy;
    double temperature = 1.0;
    uint64_t seed = 0;
};

enum class BoundaryScope { AllNewlineTokens, FirstBoundaryTokenOnly };

std::string_view to_string(BoundaryScope s);
BoundaryScope boundary_scope_from_string(std::string_view s);

struct Intervention {
    std::vector<float> vector;
    double alpha = 1.0;
    size_t layer = 0;
    BoundaryScope scope = BoundaryScope::AllNewlineTokens;
};

struct GenerationConfig {
    size_t max_new_tokens = 256;
    Sampling sampling;
    std::optional<size_t> tap_layer;
    std::optional<Intervention> intervention;
    std::map<TokenId, double> logit_bias;
    // generation stops after the token that completes any of these strings
    std::vector<std::string> stop;
    // per-step logits of these ids are reported (biased and raw)
    std::vector<TokenId> logit_probe_ids;

    void validate(const BackendCapabilities & caps) const;
};

struct GenerationResult {
    std::string text;
    std::vector<TokenId> token_ids;
    std::vector<CharSpan> offsets;   // per token, covering `text` exactly
    std::vector<HiddenTap> taps;
    size_t tokens_generated = 0;
    double wall_time = 0.0;          // seconds, generation only
    std::string finish_reason;       // "eos" | "length" | "stop" | "context"
    // [step][probe] logits before and after bias
    std::vector<std::vector<double>> probe_raw_logits;
    std::vector<std::vector<double>> probe_logits;
    // number of positions that received the intervention
    size_t steered_positions = 0;
};

class Backend {
public:
    virtual ~Backend() = default;

    virtual BackendCapabilities capabilities() const = 0;

    // Throws ContextOverflow, InvalidConfig, LayerOutOfRange, DimensionMismatch.
    virtual GenerationResult generate(std::string_view prompt, const GenerationConfig & config) = 0;

    // Token ids of `text` without special tokens.
    virtual std::vector<TokenId> tokenize(std::string_view text) = 0;

    // The id of `piece` when it encodes to exactly one known token.
    virtual std::optional<TokenId> single_token_id(std::string_view piece) {
        const auto ids = tokenize(piece);
        if (ids.size() != 1) {
            return std::nullopt;
        }
        return ids.front();
    }
};

// Trace of a generation result: segmented, token-aligned, unclassified.
ReasoningTrace trace_from_result(std::string prompt, const GenerationResult & result, const std::string & model_id);

// JSON forms shared by the CLI configs and the sidecar protocol.
nlohmann::json to_json(const GenerationConfig & config);
GenerationConfig generation_config_from_json(const nlohmann::json & j);
nlohmann::json to_json(const GenerationResult & result);
GenerationResult generation_result_from_json(const nlohmann::json & j);
nlohmann::json to_json(const BackendCapabilities & caps);
BackendCapabilities capabilities_from_json(const nlohmann::json & j);

} // namespace seal
