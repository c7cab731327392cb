#pragma once

// Backend contract checks shared by the in-process tiny backend and the
// sidecar client.

#include "seal/backend.hpp"
#include "seal/errors.hpp"

#include <doctest.h>

#include <string>
#include <vector>

namespace seal::testing {

inline const std::vector<std::string> & contract_prompts() {
    static const std::vector<std::string> p = {
        "Problem: add 3, 4 and 5.\n\n",
        "Problem: add 9 and 1.\n\n",
        "Problem: add 2, 2, 7, 1 and 6.\n\n",
    };
    return p;
}

inline void check_capabilities(Backend & be) {
    const auto caps = be.capabilities();
    CHECK(caps.n_layers > 0);
    CHECK(caps.d_model > 0);
    CHECK(caps.vocab_size > 0);
    CHECK_FALSE(caps.newline_token_ids.empty());
    CHECK_FALSE(caps.model_id.empty());
}

inline void check_tap_non_interference(Backend & be) {
    const auto caps = be.capabilities();
    for (const auto & p : contract_prompts()) {
        GenerationConfig plain;
        plain.max_new_tokens = 60;
        GenerationConfig tapped = plain;
        tapped.tap_layer = caps.n_layers - 1;
        const auto a = be.generate(p, plain);
        const auto b = be.generate(p, tapped);
        CHECK(a.token_ids == b.token_ids);
        CHECK(a.text == b.text);
        CHECK(a.taps.empty());
        for (const auto & tap : b.taps) {
            REQUIRE(tap.token_position < b.token_ids.size());
            const auto & span = b.offsets[tap.token_position];
            const std::string piece = b.text.substr(span.begin, span.size());
            CHECK(piece.find_first_not_of('\n') == std::string::npos);
            CHECK(tap.vector.size() == caps.d_model);
            CHECK(tap.layer == caps.n_layers - 1);
        }
    }
}

inline void check_alpha_zero_identity(Backend & be, size_t n_prompts = 3) {
    const auto caps = be.capabilities();
    std::vector<float> v(caps.d_model);
    for (size_t k = 0; k < v.size(); ++k) v[k] = static_cast<float>((k % 7) - 3.0);
    for (size_t i = 0; i < n_prompts; ++i) {
        const auto & p = contract_prompts()[i % contract_prompts().size()];
        GenerationConfig plain;
        plain.max_new_tokens = 60;
        GenerationConfig steered = plain;
        steered.intervention = Intervention{v, 0.0, caps.n_layers / 2, BoundaryScope::AllNewlineTokens};
        const auto a = be.generate(p, plain);
        const auto b = be.generate(p, steered);
        CHECK(a.token_ids == b.token_ids);
        CHECK(a.text == b.text);
    }
}

inline void check_bias_exactness(Backend & be) {
    GenerationConfig cfg;
    cfg.max_new_tokens = 30;
    const auto wait = be.single_token_id("Wait");
    const auto alt = be.single_token_id("Alternatively");
    REQUIRE(wait.has_value());
    REQUIRE(alt.has_value());
    const TokenId other = 5;
    cfg.logit_bias = {{*wait, -3.0}, {*alt, -10.0}};
    cfg.logit_probe_ids = {*wait, *alt, other};
    const auto r = be.generate(contract_prompts()[0], cfg);
    REQUIRE(r.probe_logits.size() >= r.token_ids.size());
    for (size_t s = 0; s < r.probe_logits.size(); ++s) {
        CHECK(r.probe_logits[s][0] - r.probe_raw_logits[s][0] == -3.0);
        CHECK(r.probe_logits[s][1] - r.probe_raw_logits[s][1] == -10.0);
        CHECK(r.probe_logits[s][2] - r.probe_raw_logits[s][2] == 0.0);
    }
}

inline void check_validation_errors(Backend & be) {
    const auto caps = be.capabilities();
    GenerationConfig cfg;
    cfg.tap_layer = caps.n_layers;
    CHECK_THROWS_AS(be.generate("x", cfg), LayerOutOfRange);
    cfg = GenerationConfig{};
    cfg.intervention = Intervention{std::vector<float>(caps.d_model + 1, 0.f), 1.0, 0, BoundaryScope::AllNewlineTokens};
    CHECK_THROWS_AS(be.generate("x", cfg), DimensionMismatch);
    cfg.intervention = Intervention{std::vector<float>(caps.d_model, 0.f), 1.0, caps.n_layers,
                                    BoundaryScope::AllNewlineTokens};
    CHECK_THROWS_AS(be.generate("x", cfg), LayerOutOfRange);
}

inline void check_seeded_sampling_replays(Backend & be) {
    GenerationConfig cfg;
    cfg.max_new_tokens = 60;
    cfg.sampling = {SamplingMode::Temperature, 1.0, 77};
    const auto a = be.generate(contract_prompts()[1], cfg);
    const auto b = be.generate(contract_prompts()[1], cfg);
    CHECK(a.token_ids == b.token_ids);
}

inline void run_backend_contract(Backend & be) {
    check_capabilities(be);
    check_tap_non_interference(be);
    check_alpha_zero_identity(be);
    check_bias_exactness(be);
    check_validation_errors(be);
    check_seeded_sampling_replays(be);
}

} // namespace seal::testing
