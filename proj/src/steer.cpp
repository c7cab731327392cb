#include "seal/steer.hpp"

#include "seal/errors.hpp"

#include <cmath>
#include <iostream>

namespace seal {

void SteerPolicy::validate(const BackendCapabilities & caps) const {
    if (!std::isfinite(alpha)) {
        throw InvalidConfig("alpha must be finite");
    }
    if (vector.d_model() != caps.d_model) {
        throw DimensionMismatch("steering vector d_model " + std::to_string(vector.d_model()) +
                                " vs backend d_model " + std::to_string(caps.d_model));
    }
    if (layer >= caps.n_layers) {
        throw LayerOutOfRange("intervention layer " + std::to_string(layer) + " >= n_layers " +
                              std::to_string(caps.n_layers));
    }
}

Intervention SteerPolicy::intervention() const {
    return {vector.values, alpha, layer, boundary_scope};
}

GenerationResult steered_generate(Backend & backend, std::string_view prompt, const SteerPolicy & policy,
                                  GenerationConfig config) {
    policy.validate(backend.capabilities());
    config.intervention = policy.intervention();
    return backend.generate(prompt, config);
}

ResolvedPenalty resolve_penalty(Backend & backend, const LogitPenalty & penalty) {
    if (!std::isfinite(penalty.bias)) {
        throw InvalidConfig("penalty bias must be finite");
    }
    ResolvedPenalty out;
    for (const auto & s : penalty.tokens) {
        if (const auto id = backend.single_token_id(s)) {
            out.bias[*id] = penalty.bias;
        } else {
            std::cerr << "warning: penalty string '" << s << "' is not a single token; skipped\n";
            out.skipped.push_back(s);
        }
    }
    return out;
}

GenerationResult logit_penalty_generate(Backend & backend, std::string_view prompt, const LogitPenalty & penalty,
                                        GenerationConfig config) {
    for (const auto & [id, b] : resolve_penalty(backend, penalty).bias) {
        config.logit_bias[id] += b;
    }
    return backend.generate(prompt, config);
}

} // namespace seal
