#include "seal/classify.hpp"
#include "seal/errors.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <fstream>

using namespace seal;

namespace {
Category cat(std::string_view text, const ClassificationRules & r = ClassificationRules::defaults()) {
    return classify_text(text, r).category;
}
} // namespace

TEST_CASE("prefix keywords classify") {
    CHECK(cat("Wait, that is wrong.") == Category::Reflection);
    CHECK(cat("Alternatively, use symmetry.") == Category::Transition);
    CHECK(cat("Compute 3 + 4 = 7.") == Category::Execution);
}

TEST_CASE("matching is case-insensitive by default") {
    CHECK(cat("wAiT, hmm.") == Category::Reflection);
    CHECK(cat("ALTERNATIVELY we could.") == Category::Transition);
    CHECK(cat("we should VERIFY it") == Category::Reflection);
}

TEST_CASE("case-sensitive rules respect case") {
    auto r = ClassificationRules::defaults();
    r.case_sensitive = true;
    CHECK(cat("wait, hmm.", r) == Category::Execution);
    CHECK(cat("Wait, hmm.", r) == Category::Reflection);
}

TEST_CASE("prefix needs a word boundary") {
    CHECK(cat("Waiting is over; add 3.") == Category::Execution);
    CHECK(cat("Wait.") == Category::Reflection);
    CHECK(cat("Wait") == Category::Reflection);
}

TEST_CASE("prefix skips leading whitespace, punctuation and quotes") {
    CHECK(cat("  Wait, no.") == Category::Reflection);
    CHECK(cat("**Wait**, no.") == Category::Reflection);
    CHECK(cat("\xE2\x80\x9CWait,\xE2\x80\x9D I said.") == Category::Reflection);
}

TEST_CASE("a prefix keyword in the middle is not a prefix match") {
    const auto c = classify_text("I will wait for it.", ClassificationRules::defaults());
    CHECK(c.category == Category::Execution);
}

TEST_CASE("rule order: reflection prefix, transition prefix, reflection phrase, transition phrase") {
    // reflection prefix beats transition phrase
    CHECK(cat("Wait, another way exists.") == Category::Reflection);
    // transition prefix beats reflection phrase
    CHECK(cat("Alternatively, verify with n = 1.") == Category::Transition);
    // reflection phrase beats transition phrase
    CHECK(cat("Let me check another approach.") == Category::Reflection);
    CHECK(cat("Try another approach.") == Category::Transition);
}

TEST_CASE("match kind distinguishes prefix and phrase hits") {
    const auto r = ClassificationRules::defaults();
    CHECK(classify_text("Wait, verify this", r).matched_by == MatchKind::Prefix);
    CHECK(classify_text("Let me check the sign", r).matched_by == MatchKind::Phrase);
    CHECK(classify_text("Add 2.", r).matched_by == MatchKind::None);
}

TEST_CASE("prefix-only and phrase-only arms") {
    const auto base = ClassificationRules::defaults();
    CHECK(cat("Let me check the sign", base.prefix_only()) == Category::Execution);
    CHECK(cat("Wait, hmm", base.prefix_only()) == Category::Reflection);
    CHECK(cat("Wait, hmm", base.phrase_only()) == Category::Execution);
    CHECK(cat("Let me check the sign", base.phrase_only()) == Category::Reflection);
}

TEST_CASE("golden classification file agrees 100%, including case-folded variants") {
    std::ifstream in(testing::data_path("classification_golden.jsonl"));
    REQUIRE(in);
    std::string line;
    size_t n = 0;
    const auto rules = ClassificationRules::defaults();
    auto upper = [](std::string s) {
        for (auto & c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        return s;
    };
    auto lower = [](std::string s) {
        for (auto & c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return s;
    };
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        const std::string text = j["text"];
        const Category want = category_from_string(j["label"].get<std::string>());
        INFO(text);
        CHECK(cat(text, rules) == want);
        CHECK(cat(upper(text), rules) == want);
        CHECK(cat(lower(text), rules) == want);
        ++n;
    }
    CHECK(n == 30);
}

TEST_CASE("rules JSON round trip and file loading") {
    const auto r = ClassificationRules::defaults();
    const auto back = ClassificationRules::from_json(r.to_json());
    CHECK(back.reflection_phrases == r.reflection_phrases);
    CHECK(back.transition_prefixes == r.transition_prefixes);
    CHECK(load_rules("").reflection_prefixes == r.reflection_prefixes);
    const auto path = testing::temp_path("rules.json");
    auto custom = r;
    custom.reflection_prefixes = {"Hmm"};
    {
        std::ofstream(path) << custom.to_json().dump();
    }
    CHECK(cat("Hmm, odd.", load_rules(path)) == Category::Reflection);
}

TEST_CASE("classify_trace labels every thought") {
    auto trace = make_trace("p", "Start.\n\nWait, no.\n\nAlternatively, x.", "m", 6);
    trace = classify_trace(trace, ClassificationRules::defaults());
    CHECK(trace.thoughts[0].category == Category::Execution);
    CHECK(trace.thoughts[1].category == Category::Reflection);
    CHECK(trace.thoughts[2].category == Category::Transition);
}

TEST_CASE("thought statistics match hand counts") {
    const auto rules = ClassificationRules::defaults();
    auto a = classify_trace(make_trace("p", "Add.\n\nWait, no.\n\nDone.", "m", 10), rules);
    a.correct = true;
    a.difficulty = 2;
    auto b = classify_trace(make_trace("p", "Add.\n\nAlternatively, x.", "m", 6), rules);
    b.correct = false;
    b.difficulty = 5;
    const std::vector<ReasoningTrace> ts = {a, b};
    const auto stats = thought_statistics(ts);
    CHECK(stats.overall.n_traces == 2);
    CHECK(stats.overall.total_counts[0] == 3);
    CHECK(stats.overall.total_counts[1] == 1);
    CHECK(stats.overall.total_counts[2] == 1);
    CHECK(stats.overall.mean_counts[0] == doctest::Approx(1.5));
    CHECK(stats.overall.mean_response_tokens == doctest::Approx(8.0));
    CHECK(stats.overall.total_generated_tokens == 16);
    REQUIRE(stats.by_correctness.size() >= 2);
    REQUIRE(stats.by_difficulty.size() == 2);
    CHECK(stats.to_csv().find("difficulty=5") != std::string::npos);
    CHECK_THROWS_AS(thought_statistics(std::vector<ReasoningTrace>{}), EmptyInput);
}

TEST_CASE("per-thought token counts sum to the trace token count") {
    auto t = make_trace("p", "aaaa\n\nbb\n\nc", "m", 7);
    const auto counts = thought_token_counts(t);
    REQUIRE(counts.size() == 3);
    CHECK(counts[0] + counts[1] + counts[2] == 7);
    CHECK(counts[0] >= counts[1]);
    // explicit offsets: tokens attributed by their start byte
    t.token_offsets = {{0, 4}, {4, 6}, {6, 8}, {8, 9}, {9, 10}, {10, 11}};
    t.token_count = 6;
    const auto exact = thought_token_counts(t);
    CHECK(exact[0] + exact[1] + exact[2] == 6);
}
