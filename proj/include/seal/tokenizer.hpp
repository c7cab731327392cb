#pragma once

#include "seal/trace.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace seal {

using TokenId = int;

// Word-level tokenizer of the built-in tiny backend. "\n\n" is a single
// token. Words are rendered with a leading space except after the start of
// text, after a newline token, after "\boxed{", and before closing
// punctuation. A token's character range includes its leading space.
class WordTokenizer {
public:
    static constexpr std::string_view kVersion = "seal-words-v1";

    static constexpr TokenId kBos = 0;
    static constexpr TokenId kEos = 1;
    static constexpr TokenId kUnk = 2;
    static constexpr TokenId kDoubleNewline = 3;
    static constexpr TokenId kNewline = 4;

    WordTokenizer();

    size_t vocab_size() const { return pieces_.size(); }
    const std::string & piece(TokenId id) const { return pieces_.at(static_cast<size_t>(id)); }
    std::optional<TokenId> find(std::string_view piece) const;

    // Encoding never emits BOS/EOS.
    std::vector<TokenId> encode(std::string_view text) const;

    struct Decoded {
        std::string text;
        std::vector<CharSpan> offsets;
    };
    Decoded decode(std::span<const TokenId> ids) const;

    // Incremental rendering: the text appended when `next` follows `prev`
    // (prev == -1 at start of text).
    std::string render_after(TokenId prev, TokenId next) const;

    bool is_newline_only(TokenId id) const { return id == kDoubleNewline || id == kNewline; }
    std::vector<TokenId> newline_token_ids() const { return {kDoubleNewline, kNewline}; }

    const std::vector<std::string> & pieces() const { return pieces_; }

private:
    std::vector<std::string> pieces_;
    std::unordered_map<std::string, TokenId> index_;
};

} // namespace seal
