#pragma once

#include "seal/model.hpp"
#include "seal/tiny_backend.hpp"

#include <memory>
#include <string>

namespace seal::testing {

inline tiny::TinyConfig tiny_config() {
    tiny::TinyConfig c;
    c.vocab_size = WordTokenizer().vocab_size();
    return c;
}

// untrained model with seeded random weights
inline std::shared_ptr<const tiny::TinyModel> random_model(uint64_t seed = 7) {
    const auto cfg = tiny_config();
    return std::make_shared<tiny::TinyModel>(cfg, tiny::init_params(cfg, seed), seed, "untrained");
}

inline std::shared_ptr<const tiny::TinyModel> trained_model() {
    static const auto model = std::make_shared<tiny::TinyModel>(tiny::load_checkpoint(tiny_checkpoint_path(1234)));
    return model;
}

inline std::string data_path(const std::string & name) {
    return std::string(SEAL_TEST_DATA_DIR) + "/" + name;
}

inline std::string temp_path(const std::string & name) {
    return std::string(SEAL_TEST_TMP_DIR) + "/" + name;
}

} // namespace seal::testing
