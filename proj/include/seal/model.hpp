#pragma once

// Tiny decoder-only transformer: pre-LayerNorm blocks (causal multi-head
// attention + GELU MLP), learned absolute positions, untied output head.
//
// Parameters live in one flat float vector. ParamLayout fixes their order,
// which is also the on-disk order of the checkpoint payload.

#include "seal/tokenizer.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace seal::tiny {

struct TinyConfig {
    size_t vocab_size  = 0;
    size_t d_model     = 64;
    size_t n_layers    = 4;
    size_t n_heads     = 4;
    size_t d_ff        = 128;
    size_t max_context = 256;

    size_t head_dim() const { return d_model / n_heads; }
    void validate() const;

    nlohmann::json to_json() const;
    static TinyConfig from_json(const nlohmann::json & j);
    bool operator==(const TinyConfig &) const = default;
};

struct LayerOffsets {
    size_t ln1_g, ln1_b;
    size_t w_qkv, b_qkv;   // [3d x d], [3d]  rows: q, k, v
    size_t w_o, b_o;       // [d x d], [d]
    size_t ln2_g, ln2_b;
    size_t w_fc1, b_fc1;   // [f x d], [f]
    size_t w_fc2, b_fc2;   // [d x f], [d]
};

class ParamLayout {
public:
    explicit ParamLayout(const TinyConfig & cfg);

    size_t tok_emb = 0;   // [V x d]
    size_t pos_emb = 0;   // [C x d]
    std::vector<LayerOffsets> layers;
    size_t lnf_g = 0, lnf_b = 0;
    size_t w_out = 0, b_out = 0;  // [V x d], [V]
    size_t total = 0;

    // (name, element count) in storage order
    const std::vector<std::pair<std::string, size_t>> & tensors() const { return tensors_; }

private:
    std::vector<std::pair<std::string, size_t>> tensors_;
};

// GPT-2 style initialization: N(0, 0.02), residual output projections scaled
// by 1/sqrt(2 * n_layers), LayerNorm gains 1, biases 0.
std::vector<float> init_params(const TinyConfig & cfg, uint64_t seed);

// Full-sequence forward/backward used for training and gradient checks.
// Real is float for training and double for finite-difference checks.
template <typename Real>
class SequenceGraph {
public:
    SequenceGraph(const TinyConfig & cfg, const ParamLayout & layout);

    // Cross-entropy summed over next-token targets tokens[t] with
    // t >= max(loss_start, 1). Returns (summed loss, number of targets).
    std::pair<double, size_t> forward(std::span<const Real> params, std::span<const TokenId> tokens,
                                      size_t loss_start);

    // Accumulates scale * d(summed loss)/d(params) into grad. Requires a
    // preceding forward() with the same params.
    void backward(std::span<const Real> params, std::span<Real> grad, Real scale);

    // [T x V] logits of the last forward
    std::span<const Real> logits() const { return logits_; }
    // residual stream after block `layer` for all positions, [T x d]
    std::span<const Real> block_output(size_t layer) const { return xs_[layer + 1]; }
    size_t length() const { return T_; }

private:
    const TinyConfig & cfg_;
    const ParamLayout & layout_;
    size_t T_ = 0;
    std::vector<TokenId> tokens_;
    std::vector<std::vector<Real>> xs_;           // L+1 residual states [T x d]
    std::vector<std::vector<Real>> ln1_, ln1_mu_, ln1_rs_;
    std::vector<std::vector<Real>> qkv_, att_, o_;
    std::vector<std::vector<Real>> xmid_;
    std::vector<std::vector<Real>> ln2_, ln2_mu_, ln2_rs_;
    std::vector<std::vector<Real>> h_, g_;
    std::vector<Real> lnf_, lnf_mu_, lnf_rs_;
    std::vector<Real> logits_, dlogits_;
};

extern template class SequenceGraph<float>;
extern template class SequenceGraph<double>;

// Per-step controls for incremental decoding.
struct StepControl {
    // residual intervention: after block `steer_layer`, x += alpha * steer
    std::span<const float> steer;
    float alpha = 0.0f;
    size_t steer_layer = 0;
    // copy of the residual stream after block `tap_layer` (after any steering)
    std::vector<float> * tap = nullptr;
    size_t tap_layer = 0;
    // residual after every block, [n_layers][d]
    std::vector<std::vector<float>> * all_layers = nullptr;
};

class TinyModel;

// KV-cached incremental forward. One session per generation; sessions hold
// no reference to mutable model state, so any number may share a model.
class Session {
public:
    explicit Session(const TinyModel & model);

    // Processes one token at the next position and returns the next-token
    // logits. Throws ContextOverflow when the context is full.
    std::span<const float> step(TokenId token, const StepControl & ctl = {});

    size_t position() const { return pos_; }

private:
    const TinyModel & model_;
    size_t pos_ = 0;
    std::vector<std::vector<float>> k_cache_, v_cache_;  // per layer [C x d]
    std::vector<float> x_, a_, qkv_, att_, o_, proj_, h_, logits_;
};

class TinyModel {
public:
    TinyModel(TinyConfig cfg, std::vector<float> params, uint64_t seed, std::string training_hash);

    const TinyConfig & config() const { return cfg_; }
    const ParamLayout & layout() const { return layout_; }
    const std::vector<float> & params() const { return params_; }
    const WordTokenizer & tokenizer() const { return tokenizer_; }
    uint64_t seed() const { return seed_; }
    const std::string & training_hash() const { return training_hash_; }

    Session new_session() const { return Session(*this); }

private:
    TinyConfig cfg_;
    ParamLayout layout_;
    std::vector<float> params_;
    WordTokenizer tokenizer_;
    uint64_t seed_;
    std::string training_hash_;
};

// Checkpoint file: "SEALTNY1", u32 header length, JSON header, then the
// parameters as little-endian float32 in ParamLayout order, then a CRC32 of
// everything before it.
void save_checkpoint(const std::string & path, const TinyModel & model, const nlohmann::json & extra = {});
TinyModel load_checkpoint(const std::string & path);

std::vector<uint8_t> encode_checkpoint(const TinyModel & model, const nlohmann::json & extra = {});
TinyModel decode_checkpoint(std::span<const uint8_t> bytes);

} // namespace seal::tiny
