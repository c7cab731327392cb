#include "seal/tokenizer.hpp"

#include <cctype>

namespace seal {

namespace {

constexpr std::string_view kBoxedOpen = "\\boxed{";

const char * const kWords[] = {
    "Problem", "add",   "and",    "Start",   "with",          "Add",   "to",      "get",   "So",
    "the",     "answer", "is",    "Wait",    "let",           "me",    "verify",  "total", "sum",
    "correct", "seems", "right",  "Let",     "check",         "again", "Hold",    "on",    "make",
    "sure",    "we",    "could",  "numbers", "in",            "another", "order", "count", "up",
    "from",    "Maybe", "there",  "way",     "reach",         "us",    "try",     "approach",
    "Alternatively",
};

bool is_closing(std::string_view p) {
    return p == "." || p == "," || p == ":" || p == "?" || p == "}";
}

bool is_punct_char(char c) {
    return c == '.' || c == ',' || c == ':' || c == '?' || c == '}';
}

} // namespace

WordTokenizer::WordTokenizer() {
    pieces_ = {"<bos>", "<eos>", "<unk>", "\n\n", "\n", ".", ",", ":", "?", std::string(kBoxedOpen), "}"};
    for (const char * w : kWords) {
        pieces_.emplace_back(w);
    }
    for (int n = 0; n < 100; ++n) {
        pieces_.push_back(std::to_string(n));
    }
    for (size_t i = 0; i < pieces_.size(); ++i) {
        index_.emplace(pieces_[i], static_cast<TokenId>(i));
    }
}

std::optional<TokenId> WordTokenizer::find(std::string_view piece) const {
    const auto it = index_.find(std::string(piece));
    if (it == index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::vector<TokenId> WordTokenizer::encode(std::string_view text) const {
    std::vector<TokenId> ids;
    size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        if (c == '\n' || c == '\r') {
            size_t run = 0;
            while (i < text.size() && (text[i] == '\n' || text[i] == '\r')) {
                run += text[i] == '\n';
                ++i;
            }
            for (size_t k = 0; k < run / 2; ++k) ids.push_back(kDoubleNewline);
            if (run % 2) ids.push_back(kNewline);
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        if (text.substr(i, kBoxedOpen.size()) == kBoxedOpen) {
            ids.push_back(*find(kBoxedOpen));
            i += kBoxedOpen.size();
            continue;
        }
        if (is_punct_char(c)) {
            ids.push_back(*find(std::string_view(&text[i], 1)));
            ++i;
            continue;
        }
        size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j])) && !is_punct_char(text[j]) &&
               text[j] != '\\') {
            ++j;
        }
        if (j == i) {
            ++j;  // lone backslash
        }
        ids.push_back(find(text.substr(i, j - i)).value_or(kUnk));
        i = j;
    }
    return ids;
}

std::string WordTokenizer::render_after(TokenId prev, TokenId next) const {
    if (next == kBos || next == kEos) {
        return {};
    }
    const std::string & p = piece(next);
    const bool at_start = prev < 0 || prev == kBos;
    const bool space = !at_start && !is_newline_only(prev) && piece(prev) != kBoxedOpen && !is_newline_only(next) &&
                       !is_closing(p);
    return space ? " " + p : p;
}

WordTokenizer::Decoded WordTokenizer::decode(std::span<const TokenId> ids) const {
    Decoded out;
    TokenId prev = -1;
    for (TokenId id : ids) {
        const size_t begin = out.text.size();
        out.text += render_after(prev, id);
        out.offsets.push_back({begin, out.text.size()});
        prev = id;
    }
    return out;
}

} // namespace seal
