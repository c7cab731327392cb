#pragma once

// Decoding-time calibration: H' = H + alpha * S on the residual stream of the
// intervention layer at every generated newline-only token, and the
// token-level logits-penalty baseline it is compared against.

#include "seal/backend.hpp"
#include "seal/extract.hpp"

#include <string>
#include <vector>

namespace seal {

inline constexpr double kDefaultAlpha = 1.0;
// intervention layer used for the distilled 1.5B/7B reasoning models
inline constexpr size_t kDefaultSteerLayer = 20;
inline constexpr double kDefaultPenaltyBias = -3.0;
inline const std::vector<double> kPenaltyBiasSweep = {-1.0, -3.0, -10.0, -20.0};

struct SteerPolicy {
    SteeringVector vector;
    double alpha = kDefaultAlpha;
    size_t layer = kDefaultSteerLayer;
    BoundaryScope boundary_scope = BoundaryScope::AllNewlineTokens;

    // Throws InvalidConfig / DimensionMismatch / LayerOutOfRange.
    void validate(const BackendCapabilities & caps) const;
    Intervention intervention() const;
};

GenerationResult steered_generate(Backend & backend, std::string_view prompt, const SteerPolicy & policy,
                                  GenerationConfig config);

struct LogitPenalty {
    std::vector<std::string> tokens{"Wait", "wait", "Alternatively", "alternatively"};
    double bias = kDefaultPenaltyBias;
};

struct ResolvedPenalty {
    std::map<TokenId, double> bias;
    std::vector<std::string> skipped;  // strings that are not a single known token
};

// Maps penalty strings to token ids; multi-token strings are skipped with a
// warning on stderr.
ResolvedPenalty resolve_penalty(Backend & backend, const LogitPenalty & penalty);

GenerationResult logit_penalty_generate(Backend & backend, std::string_view prompt, const LogitPenalty & penalty,
                                        GenerationConfig config);

} // namespace seal
