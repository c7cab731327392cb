#include "seal/trace.hpp"

#include "seal/errors.hpp"

#include <algorithm>
#include <fstream>

namespace seal {

std::string_view to_string(Category c) {
    switch (c) {
        case Category::Execution:    return "execution";
        case Category::Reflection:   return "reflection";
        case Category::Transition:   return "transition";
        case Category::Unclassified: return "unclassified";
    }
    return "unclassified";
}

Category category_from_string(std::string_view s) {
    if (s == "execution")    return Category::Execution;
    if (s == "reflection")   return Category::Reflection;
    if (s == "transition")   return Category::Transition;
    if (s == "unclassified") return Category::Unclassified;
    throw ParseError("unknown category '" + std::string(s) + "'");
}

std::string normalize_newlines(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
            continue;
        }
        out.push_back(text[i]);
    }
    return out;
}

std::vector<Thought> segment(std::string_view output_text) {
    const std::string text = normalize_newlines(output_text);
    std::vector<Thought> thoughts;
    size_t start = 0;
    auto emit = [&](size_t end) {
        if (end > start) {
            Thought t;
            t.index     = thoughts.size();
            t.text      = text.substr(start, end - start);
            t.char_span = {start, end};
            thoughts.push_back(std::move(t));
        }
    };
    for (;;) {
        const size_t pos = text.find(kThoughtDelimiter, start);
        if (pos == std::string::npos) {
            emit(text.size());
            break;
        }
        emit(pos);
        start = pos + kThoughtDelimiter.size();
    }
    return thoughts;
}

std::string reassemble(std::span<const Thought> thoughts) {
    std::string out;
    for (size_t i = 0; i < thoughts.size(); ++i) {
        if (i > 0) {
            out += kThoughtDelimiter;
        }
        out += thoughts[i].text;
    }
    return out;
}

ReasoningTrace make_trace(std::string prompt, std::string_view output, std::string model_id,
                          size_t token_count) {
    ReasoningTrace trace;
    trace.prompt      = std::move(prompt);
    trace.output      = normalize_newlines(output);
    trace.thoughts    = segment(trace.output);
    trace.model_id    = std::move(model_id);
    trace.token_count = token_count;
    return trace;
}

ReasoningTrace align_token_boundaries(ReasoningTrace trace, std::span<const CharSpan> token_offsets) {
    const std::string & out = trace.output;
    for (auto & thought : trace.thoughts) {
        thought.boundary_token_positions.clear();
        const size_t d0 = thought.char_span.end;
        if (out.compare(d0, kThoughtDelimiter.size(), kThoughtDelimiter) != 0) {
            continue;
        }
        const size_t d1 = d0 + kThoughtDelimiter.size();
        // tokens are ordered by offset, so the covering ones form a run
        size_t covered_to = d0;
        for (size_t i = 0; i < token_offsets.size(); ++i) {
            const CharSpan & tok = token_offsets[i];
            if (tok.end <= d0 || tok.begin >= d1 || tok.size() == 0) {
                continue;
            }
            if (tok.begin > covered_to) {
                break;
            }
            thought.boundary_token_positions.push_back(i);
            covered_to = std::max(covered_to, tok.end);
        }
        if (covered_to < d1) {
            throw AlignmentError("delimiter at byte " + std::to_string(d0) + " closing thought " +
                                 std::to_string(thought.index) + " is not covered by token offsets");
        }
    }
    return trace;
}

nlohmann::json to_json(const ReasoningTrace & trace) {
    nlohmann::json thoughts = nlohmann::json::array();
    for (const auto & t : trace.thoughts) {
        thoughts.push_back({
            {"index", t.index},
            {"text", t.text},
            {"category", to_string(t.category)},
            {"char_span", {t.char_span.begin, t.char_span.end}},
            {"boundary_token_positions", t.boundary_token_positions},
        });
    }
    nlohmann::json j = {
        {"prompt", trace.prompt},
        {"output", trace.output},
        {"model_id", trace.model_id},
        {"token_count", trace.token_count},
        {"thoughts", thoughts},
    };
    if (trace.correct) {
        j["correct"] = *trace.correct;
    }
    if (trace.difficulty) {
        j["difficulty"] = *trace.difficulty;
    }
    if (!trace.token_offsets.empty()) {
        nlohmann::json offs = nlohmann::json::array();
        for (const auto & o : trace.token_offsets) {
            offs.push_back({o.begin, o.end});
        }
        j["token_offsets"] = std::move(offs);
    }
    return j;
}

ReasoningTrace trace_from_json(const nlohmann::json & j) {
    ReasoningTrace trace;
    trace.prompt      = j.at("prompt").get<std::string>();
    trace.output      = j.at("output").get<std::string>();
    trace.model_id    = j.value("model_id", "");
    trace.token_count = j.value("token_count", size_t{0});
    if (j.contains("correct") && !j["correct"].is_null()) {
        trace.correct = j["correct"].get<bool>();
    }
    if (j.contains("difficulty") && !j["difficulty"].is_null()) {
        trace.difficulty = j["difficulty"].get<int>();
    }
    if (j.contains("token_offsets")) {
        for (const auto & o : j["token_offsets"]) {
            trace.token_offsets.push_back({o.at(0).get<size_t>(), o.at(1).get<size_t>()});
        }
    }
    if (j.contains("thoughts")) {
        for (const auto & jt : j["thoughts"]) {
            Thought t;
            t.index    = jt.at("index").get<size_t>();
            t.text     = jt.at("text").get<std::string>();
            t.category = category_from_string(jt.value("category", "unclassified"));
            const auto & span = jt.at("char_span");
            t.char_span = {span.at(0).get<size_t>(), span.at(1).get<size_t>()};
            t.boundary_token_positions = jt.value("boundary_token_positions", std::vector<size_t>{});
            trace.thoughts.push_back(std::move(t));
        }
    } else {
        trace.thoughts = segment(trace.output);
    }
    return trace;
}

void write_traces(const std::string & path, std::span<const ReasoningTrace> traces) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path);
    }
    for (const auto & t : traces) {
        out << to_json(t).dump() << '\n';
    }
}

std::vector<ReasoningTrace> read_traces(const std::string & path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path);
    }
    std::vector<ReasoningTrace> traces;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            traces.push_back(trace_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception & e) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return traces;
}

} // namespace seal
