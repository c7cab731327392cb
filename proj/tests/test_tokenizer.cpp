#include "seal/tokenizer.hpp"

#include <doctest.h>

using namespace seal;

TEST_CASE("the double newline is one token") {
    WordTokenizer tok;
    const auto ids = tok.encode("Add 3.\n\nWait");
    REQUIRE(ids.size() == 5);
    CHECK(ids[3] == WordTokenizer::kDoubleNewline);
    CHECK(tok.is_newline_only(ids[3]));
    CHECK_FALSE(tok.is_newline_only(ids[0]));
}

TEST_CASE("decode reproduces corpus-style text with exact offsets") {
    WordTokenizer tok;
    const std::string text = "Start with 5.\n\nWait, is the sum 12 correct?\n\nSo the answer is \\boxed{12}.";
    const auto ids = tok.encode(text);
    const auto d = tok.decode(ids);
    CHECK(d.text == text);
    REQUIRE(d.offsets.size() == ids.size());
    size_t pos = 0;
    for (const auto & o : d.offsets) {
        CHECK(o.begin == pos);
        pos = o.end;
    }
    CHECK(pos == text.size());
}

TEST_CASE("unknown words map to UNK") {
    WordTokenizer tok;
    const auto ids = tok.encode("zebra");
    REQUIRE(ids.size() == 1);
    CHECK(ids[0] == WordTokenizer::kUnk);
    CHECK_FALSE(tok.find("zebra").has_value());
    CHECK(tok.find("Wait").has_value());
}

TEST_CASE("vocabulary is stable") {
    WordTokenizer tok;
    CHECK(tok.vocab_size() == 156);
    CHECK(tok.piece(WordTokenizer::kBos) == "<bos>");
    CHECK(tok.piece(WordTokenizer::kDoubleNewline) == "\n\n");
    CHECK(tok.newline_token_ids().size() == 2);
}
