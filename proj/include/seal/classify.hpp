#pragma once

#include "seal/trace.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace seal {

// Keyword criteria for reflection/transition thoughts. Everything that matches
// neither is an execution thought.
struct ClassificationRules {
    std::vector<std::string> transition_prefixes;
    std::vector<std::string> transition_phrases;
    std::vector<std::string> reflection_prefixes;
    std::vector<std::string> reflection_phrases;
    bool case_sensitive = false;

    static ClassificationRules defaults();

    // criteria ablation arms
    ClassificationRules prefix_only() const;
    ClassificationRules phrase_only() const;

    nlohmann::json to_json() const;
    static ClassificationRules from_json(const nlohmann::json & j);
};

// Loads rules from a JSON file; an empty path yields the defaults.
ClassificationRules load_rules(const std::string & path);

// Which rule tier fired, for the reworded-thought metric.
enum class MatchKind { None, Prefix, Phrase };

struct Classification {
    Category category = Category::Execution;
    MatchKind matched_by = MatchKind::None;
};

// Rule order, first match wins: reflection prefix, transition prefix,
// reflection phrase, transition phrase, else execution.
Classification classify_text(std::string_view text, const ClassificationRules & rules);

Category classify_thought(const Thought & thought, const ClassificationRules & rules);

ReasoningTrace classify_trace(ReasoningTrace trace, const ClassificationRules & rules);

struct ThoughtStatsRow {
    std::string group;
    size_t n_traces = 0;
    // indexed by Category
    std::array<double, 4> mean_counts{};
    std::array<double, 4> mean_tokens{};
    double mean_response_tokens = 0.0;
    std::array<size_t, 4> total_counts{};
    std::array<size_t, 4> total_tokens{};
    size_t total_thoughts = 0;
    size_t total_generated_tokens = 0;
};

struct ThoughtStats {
    ThoughtStatsRow overall;
    std::vector<ThoughtStatsRow> by_correctness;  // "correct" / "incorrect" / "unlabeled"
    std::vector<ThoughtStatsRow> by_difficulty;   // "difficulty=<d>" / "difficulty=none"

    std::string to_csv() const;
};

// Per-thought token counts. Uses the trace's token offsets when present,
// otherwise apportions token_count by byte length (largest remainder).
// The result always sums to trace.token_count.
std::vector<size_t> thought_token_counts(const ReasoningTrace & trace);

// Throws EmptyInput when traces is empty.
ThoughtStats thought_statistics(std::span<const ReasoningTrace> traces);

} // namespace seal
