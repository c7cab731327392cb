#pragma once

#include "seal/backend.hpp"
#include "seal/model.hpp"

#include <memory>
#include <span>

namespace seal {

// In-process backend over the tiny transformer. generate() is const-safe:
// each call owns its KV cache, so concurrent calls over one instance are fine.
class TinyBackend : public Backend {
public:
    explicit TinyBackend(std::shared_ptr<const tiny::TinyModel> model, std::string model_id = "");

    BackendCapabilities capabilities() const override;
    GenerationResult generate(std::string_view prompt, const GenerationConfig & config) override;
    std::vector<TokenId> tokenize(std::string_view text) override;
    std::optional<TokenId> single_token_id(std::string_view piece) override;

    GenerationResult generate_const(std::string_view prompt, const GenerationConfig & config) const;

    // Teacher-forced replay: feeds BOS + prompt + continuation and returns the
    // raw (unbiased) next-token logits before each continuation token.
    std::vector<std::vector<float>> replay_logits(std::string_view prompt, std::span<const TokenId> continuation) const;

    // Residual stream after every block for every position of
    // BOS + prompt + continuation, [position][layer][d]. An optional
    // intervention is applied exactly as during generation.
    std::vector<std::vector<std::vector<float>>> residual_states(
        std::string_view prompt, std::span<const TokenId> continuation,
        const std::optional<Intervention> & intervention = std::nullopt) const;

    const tiny::TinyModel & model() const { return *model_; }

private:
    std::vector<TokenId> prompt_ids(std::string_view prompt) const;
    bool steer_here(const std::optional<Intervention> & iv, std::span<const TokenId> generated, TokenId tok) const;

    std::shared_ptr<const tiny::TinyModel> model_;
    std::string model_id_;
};

// Default location of committed checkpoints.
std::string default_model_dir();
std::string tiny_checkpoint_path(uint64_t seed, const std::string & model_dir = default_model_dir());

// Loads the committed checkpoint trained with `seed`; MissingCheckpoint if absent.
std::unique_ptr<TinyBackend> build_tiny_backend(uint64_t seed = 1234, const std::string & model_dir = default_model_dir());

} // namespace seal
