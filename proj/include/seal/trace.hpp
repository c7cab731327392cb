#pragma once

// Reasoning traces: a generated output split into an ordered list of thoughts
// on the literal "\n\n" delimiter, plus the character/token span bookkeeping
// needed to find the hidden state that closes each thought.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace seal {

enum class Category { Execution, Reflection, Transition, Unclassified };

constexpr std::string_view kThoughtDelimiter = "\n\n";

std::string_view to_string(Category c);
Category category_from_string(std::string_view s);

// Half-open byte range into a text.
struct CharSpan {
    size_t begin = 0;
    size_t end   = 0;

    size_t size() const { return end - begin; }
    bool operator==(const CharSpan &) const = default;
};

struct Thought {
    size_t index = 0;
    std::string text;
    Category category = Category::Unclassified;
    CharSpan char_span;
    // tokens covering the delimiter that closes this thought; empty when no
    // delimiter follows (normally the final thought)
    std::vector<size_t> boundary_token_positions;

    bool has_boundary() const { return !boundary_token_positions.empty(); }
    // the representation-bearing token: first token of the delimiter
    size_t tap_position() const { return boundary_token_positions.front(); }
};

struct ReasoningTrace {
    std::string prompt;
    std::string output;
    std::vector<Thought> thoughts;
    std::string model_id;
    size_t token_count = 0;
    std::optional<bool> correct;
    std::optional<int> difficulty;
    // per generated token byte range into output; optional
    std::vector<CharSpan> token_offsets;
};

// "\r\n" -> "\n"
std::string normalize_newlines(std::string_view text);

// Splits on "\n\n" after newline normalization. Empty segments are dropped.
// Spans index into the normalized text.
std::vector<Thought> segment(std::string_view output_text);

std::string reassemble(std::span<const Thought> thoughts);

// Builds a trace (normalized output + segmented thoughts) in one step.
ReasoningTrace make_trace(std::string prompt, std::string_view output, std::string model_id,
                          size_t token_count);

// Fills boundary_token_positions from per-token byte ranges into trace.output.
// Throws AlignmentError when some delimiter byte is not covered by any token.
ReasoningTrace align_token_boundaries(ReasoningTrace trace, std::span<const CharSpan> token_offsets);

// JSONL persistence
nlohmann::json to_json(const ReasoningTrace & trace);
ReasoningTrace trace_from_json(const nlohmann::json & j);
void write_traces(const std::string & path, std::span<const ReasoningTrace> traces);
std::vector<ReasoningTrace> read_traces(const std::string & path);

} // namespace seal
