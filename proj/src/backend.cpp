#include "seal/backend.hpp"

#include "seal/bytes.hpp"
#include "seal/errors.hpp"

#include <cmath>

namespace seal {

std::string_view to_string(BoundaryScope s) {
    return s == BoundaryScope::AllNewlineTokens ? "all_newline_tokens" : "first_boundary_token_only";
}

BoundaryScope boundary_scope_from_string(std::string_view s) {
    if (s == "all_newline_tokens") return BoundaryScope::AllNewlineTokens;
    if (s == "first_boundary_token_only") return BoundaryScope::FirstBoundaryTokenOnly;
    throw InvalidConfig("unknown boundary scope '" + std::string(s) + "'");
}

void GenerationConfig::validate(const BackendCapabilities & caps) const {
    if (tap_layer && *tap_layer >= caps.n_layers) {
        throw LayerOutOfRange("tap layer " + std::to_string(*tap_layer) + " >= n_layers " +
                              std::to_string(caps.n_layers));
    }
    if (intervention) {
        if (!std::isfinite(intervention->alpha)) {
            throw InvalidConfig("intervention alpha must be finite");
        }
        if (intervention->layer >= caps.n_layers) {
            throw LayerOutOfRange("intervention layer " + std::to_string(intervention->layer) + " >= n_layers " +
                                  std::to_string(caps.n_layers));
        }
        if (intervention->vector.size() != caps.d_model) {
            throw DimensionMismatch("steering vector has " + std::to_string(intervention->vector.size()) +
                                    " values, backend d_model is " + std::to_string(caps.d_model));
        }
    }
    for (const auto & [id, bias] : logit_bias) {
        if (!std::isfinite(bias)) {
            throw InvalidConfig("logit bias must be finite");
        }
        if (id < 0 || (caps.vocab_size && static_cast<size_t>(id) >= caps.vocab_size)) {
            throw InvalidConfig("logit bias token id " + std::to_string(id) + " out of range");
        }
    }
    if (sampling.mode == SamplingMode::Temperature && !(sampling.temperature > 0.0)) {
        throw InvalidConfig("temperature must be positive");
    }
}

ReasoningTrace trace_from_result(std::string prompt, const GenerationResult & result, const std::string & model_id) {
    ReasoningTrace trace = make_trace(std::move(prompt), result.text, model_id, result.tokens_generated);
    trace = align_token_boundaries(std::move(trace), result.offsets);
    trace.token_offsets = result.offsets;
    return trace;
}

nlohmann::json to_json(const GenerationConfig & c) {
    nlohmann::json j = {
        {"max_new_tokens", c.max_new_tokens},
        {"sampling",
         {{"mode", c.sampling.mode == SamplingMode::Greedy ? "greedy" : "temperature"},
          {"temperature", c.sampling.temperature},
          {"seed", c.sampling.seed}}},
        {"stop", c.stop},
    };
    if (c.tap_layer) {
        j["tap_layer"] = *c.tap_layer;
    }
    if (c.intervention) {
        j["intervention"] = {{"vector", bytes::floats_to_base64(c.intervention->vector)},
                             {"alpha", c.intervention->alpha},
                             {"layer", c.intervention->layer},
                             {"boundary_scope", to_string(c.intervention->scope)}};
    }
    if (!c.logit_bias.empty()) {
        nlohmann::json lb = nlohmann::json::object();
        for (const auto & [id, b] : c.logit_bias) {
            lb[std::to_string(id)] = b;
        }
        j["logit_bias"] = lb;
    }
    if (!c.logit_probe_ids.empty()) {
        j["logit_probe_ids"] = c.logit_probe_ids;
    }
    return j;
}

GenerationConfig generation_config_from_json(const nlohmann::json & j) {
    GenerationConfig c;
    c.max_new_tokens = j.value("max_new_tokens", c.max_new_tokens);
    if (j.contains("sampling")) {
        const auto & s = j["sampling"];
        const std::string mode = s.value("mode", "greedy");
        if (mode == "greedy") {
            c.sampling.mode = SamplingMode::Greedy;
        } else if (mode == "temperature") {
            c.sampling.mode = SamplingMode::Temperature;
        } else {
            throw InvalidConfig("unknown sampling mode '" + mode + "'");
        }
        c.sampling.temperature = s.value("temperature", 1.0);
        c.sampling.seed = s.value("seed", uint64_t{0});
    }
    if (j.contains("tap_layer") && !j["tap_layer"].is_null()) {
        c.tap_layer = j["tap_layer"].get<size_t>();
    }
    if (j.contains("intervention") && !j["intervention"].is_null()) {
        const auto & iv = j["intervention"];
        Intervention v;
        v.vector = bytes::floats_from_base64(iv.at("vector").get<std::string>());
        v.alpha = iv.value("alpha", 1.0);
        v.layer = iv.at("layer").get<size_t>();
        v.scope = boundary_scope_from_string(iv.value("boundary_scope", "all_newline_tokens"));
        c.intervention = std::move(v);
    }
    if (j.contains("logit_bias")) {
        for (const auto & [k, v] : j["logit_bias"].items()) {
            c.logit_bias[std::stoi(k)] = v.get<double>();
        }
    }
    c.stop = j.value("stop", std::vector<std::string>{});
    c.logit_probe_ids = j.value("logit_probe_ids", std::vector<TokenId>{});
    return c;
}

nlohmann::json to_json(const GenerationResult & r) {
    nlohmann::json offsets = nlohmann::json::array();
    for (const auto & o : r.offsets) {
        offsets.push_back({o.begin, o.end});
    }
    nlohmann::json taps = nlohmann::json::array();
    for (const auto & t : r.taps) {
        taps.push_back({{"layer", t.layer},
                        {"token_position", t.token_position},
                        {"absolute_position", t.absolute_position},
                        {"vector", bytes::floats_to_base64(t.vector)}});
    }
    nlohmann::json j = {
        {"text", r.text},
        {"token_ids", r.token_ids},
        {"offsets", offsets},
        {"taps", taps},
        {"tokens_generated", r.tokens_generated},
        {"wall_time", r.wall_time},
        {"finish_reason", r.finish_reason},
        {"steered_positions", r.steered_positions},
    };
    if (!r.probe_logits.empty()) {
        j["probe_logits"] = r.probe_logits;
        j["probe_raw_logits"] = r.probe_raw_logits;
    }
    return j;
}

GenerationResult generation_result_from_json(const nlohmann::json & j) {
    GenerationResult r;
    r.text = j.at("text").get<std::string>();
    r.token_ids = j.at("token_ids").get<std::vector<TokenId>>();
    for (const auto & o : j.at("offsets")) {
        r.offsets.push_back({o.at(0).get<size_t>(), o.at(1).get<size_t>()});
    }
    for (const auto & t : j.value("taps", nlohmann::json::array())) {
        HiddenTap tap;
        tap.layer = t.at("layer").get<size_t>();
        tap.token_position = t.at("token_position").get<size_t>();
        tap.absolute_position = t.value("absolute_position", tap.token_position);
        tap.vector = bytes::floats_from_base64(t.at("vector").get<std::string>());
        r.taps.push_back(std::move(tap));
    }
    r.tokens_generated = j.value("tokens_generated", r.token_ids.size());
    r.wall_time = j.value("wall_time", 0.0);
    r.finish_reason = j.value("finish_reason", "");
    r.steered_positions = j.value("steered_positions", size_t{0});
    if (j.contains("probe_logits")) {
        r.probe_logits = j["probe_logits"].get<std::vector<std::vector<double>>>();
        r.probe_raw_logits = j.value("probe_raw_logits", std::vector<std::vector<double>>{});
    }
    return r;
}

nlohmann::json to_json(const BackendCapabilities & c) {
    return {{"model_id", c.model_id},       {"n_layers", c.n_layers},       {"d_model", c.d_model},
            {"vocab_size", c.vocab_size},   {"max_context", c.max_context}, {"newline_token_ids", c.newline_token_ids}};
}

BackendCapabilities capabilities_from_json(const nlohmann::json & j) {
    BackendCapabilities c;
    c.model_id = j.value("model_id", "");
    c.n_layers = j.at("n_layers").get<size_t>();
    c.d_model = j.at("d_model").get<size_t>();
    c.vocab_size = j.value("vocab_size", size_t{0});
    c.max_context = j.value("max_context", size_t{0});
    c.newline_token_ids = j.value("newline_token_ids", std::vector<TokenId>{});
    return c;
}

} // namespace seal
