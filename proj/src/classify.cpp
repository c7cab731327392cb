#include "seal/classify.hpp"

#include "seal/errors.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace seal {

ClassificationRules ClassificationRules::defaults() {
    ClassificationRules r;
    r.transition_prefixes = {"Alternatively"};
    // "differenly" is intentional: it is the canonical keyword spelling
    r.transition_phrases = {"think differenly", "another way",      "another approach", "another method",
                            "another solution", "another strategy", "another technique"};
    r.reflection_prefixes = {"Wait"};
    r.reflection_phrases  = {"verify",      "make sure",     "hold on",      "think again",
                             "'s correct", "'s incorrect", "Let me check", "seems right"};
    r.case_sensitive = false;
    return r;
}

ClassificationRules ClassificationRules::prefix_only() const {
    ClassificationRules r = *this;
    r.transition_phrases.clear();
    r.reflection_phrases.clear();
    return r;
}

ClassificationRules ClassificationRules::phrase_only() const {
    ClassificationRules r = *this;
    r.transition_prefixes.clear();
    r.reflection_prefixes.clear();
    return r;
}

nlohmann::json ClassificationRules::to_json() const {
    return {
        {"transition", {{"prefixes", transition_prefixes}, {"phrases", transition_phrases}}},
        {"reflection", {{"prefixes", reflection_prefixes}, {"phrases", reflection_phrases}}},
        {"case_sensitive", case_sensitive},
    };
}

ClassificationRules ClassificationRules::from_json(const nlohmann::json & j) {
    ClassificationRules r = defaults();
    auto read = [&](const char * group, std::vector<std::string> & prefixes, std::vector<std::string> & phrases) {
        if (!j.contains(group)) {
            return;
        }
        const auto & g = j.at(group);
        if (g.contains("prefixes")) prefixes = g.at("prefixes").get<std::vector<std::string>>();
        if (g.contains("phrases"))  phrases  = g.at("phrases").get<std::vector<std::string>>();
    };
    read("transition", r.transition_prefixes, r.transition_phrases);
    read("reflection", r.reflection_prefixes, r.reflection_phrases);
    r.case_sensitive = j.value("case_sensitive", false);
    return r;
}

ClassificationRules load_rules(const std::string & path) {
    if (path.empty()) {
        return ClassificationRules::defaults();
    }
    std::ifstream in(path);
    if (!in) {
        throw InvalidConfig("cannot open rules file " + path);
    }
    try {
        return ClassificationRules::from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception & e) {
        throw ParseError(path + ": " + e.what());
    }
}

namespace {

std::string fold(std::string_view s, bool case_sensitive) {
    std::string out(s);
    if (!case_sensitive) {
        for (char & c : out) {
            c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        }
    }
    return out;
}

// Skips ASCII whitespace/punctuation and the UTF-8 curly quotes.
size_t skip_leading_noise(std::string_view s) {
    size_t i = 0;
    while (i < s.size()) {
        const auto c = static_cast<unsigned char>(s[i]);
        if (std::isspace(c) || std::ispunct(c)) {
            ++i;
        } else if (c == 0xE2 && i + 2 < s.size() && static_cast<unsigned char>(s[i + 1]) == 0x80 &&
                   (static_cast<unsigned char>(s[i + 2]) >= 0x98 && static_cast<unsigned char>(s[i + 2]) <= 0x9F)) {
            i += 3;
        } else {
            break;
        }
    }
    return i;
}

bool starts_with_word(std::string_view text, std::string_view prefix) {
    if (prefix.empty() || text.substr(0, prefix.size()) != prefix) {
        return false;
    }
    if (text.size() == prefix.size()) {
        return true;
    }
    // "Wait" must not fire on "Waiting"
    const auto next = static_cast<unsigned char>(text[prefix.size()]);
    return !std::isalnum(next) && next != '_';
}

bool any_prefix(std::string_view body, const std::vector<std::string> & prefixes, bool cs) {
    return std::any_of(prefixes.begin(), prefixes.end(),
                       [&](const std::string & p) { return starts_with_word(body, fold(p, cs)); });
}

bool any_phrase(std::string_view text, const std::vector<std::string> & phrases, bool cs) {
    return std::any_of(phrases.begin(), phrases.end(), [&](const std::string & p) {
        return !p.empty() && text.find(fold(p, cs)) != std::string_view::npos;
    });
}

} // namespace

Classification classify_text(std::string_view text, const ClassificationRules & rules) {
    const bool cs = rules.case_sensitive;
    const std::string folded = fold(text, cs);
    const std::string_view body = std::string_view(folded).substr(skip_leading_noise(folded));

    if (any_prefix(body, rules.reflection_prefixes, cs)) return {Category::Reflection, MatchKind::Prefix};
    if (any_prefix(body, rules.transition_prefixes, cs)) return {Category::Transition, MatchKind::Prefix};
    if (any_phrase(folded, rules.reflection_phrases, cs)) return {Category::Reflection, MatchKind::Phrase};
    if (any_phrase(folded, rules.transition_phrases, cs)) return {Category::Transition, MatchKind::Phrase};
    return {Category::Execution, MatchKind::None};
}

Category classify_thought(const Thought & thought, const ClassificationRules & rules) {
    return classify_text(thought.text, rules).category;
}

ReasoningTrace classify_trace(ReasoningTrace trace, const ClassificationRules & rules) {
    for (auto & t : trace.thoughts) {
        t.category = classify_thought(t, rules);
    }
    return trace;
}

std::vector<size_t> thought_token_counts(const ReasoningTrace & trace) {
    const size_t n = trace.thoughts.size();
    std::vector<size_t> counts(n, 0);
    if (n == 0) {
        return counts;
    }
    // region of thought i: [start_i, start_{i+1}), first region starts at 0
    std::vector<size_t> region_end(n);
    for (size_t i = 0; i + 1 < n; ++i) {
        region_end[i] = trace.thoughts[i + 1].char_span.begin;
    }
    region_end[n - 1] = std::max(trace.output.size(), trace.thoughts[n - 1].char_span.end);

    if (!trace.token_offsets.empty()) {
        size_t assigned = 0;
        size_t k = 0;
        for (const auto & off : trace.token_offsets) {
            while (k + 1 < n && off.begin >= region_end[k]) {
                ++k;
            }
            if (assigned < trace.token_count) {
                ++counts[k];
                ++assigned;
            }
        }
        counts[n - 1] += trace.token_count - assigned;
        return counts;
    }

    std::vector<double> weight(n);
    size_t prev = 0;
    for (size_t i = 0; i < n; ++i) {
        weight[i] = static_cast<double>(region_end[i] - prev);
        prev = region_end[i];
    }
    const double total_w = std::accumulate(weight.begin(), weight.end(), 0.0);
    if (total_w <= 0.0) {
        counts[n - 1] = trace.token_count;
        return counts;
    }
    std::vector<double> exact(n);
    std::vector<size_t> order(n);
    size_t assigned = 0;
    for (size_t i = 0; i < n; ++i) {
        exact[i]  = static_cast<double>(trace.token_count) * weight[i] / total_w;
        counts[i] = static_cast<size_t>(exact[i]);
        assigned += counts[i];
        order[i] = i;
    }
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return exact[a] - static_cast<double>(counts[a]) > exact[b] - static_cast<double>(counts[b]);
    });
    for (size_t k = 0; assigned < trace.token_count; ++k, ++assigned) {
        ++counts[order[k % n]];
    }
    return counts;
}

namespace {

struct Accum {
    size_t n_traces = 0;
    std::array<size_t, 4> counts{};
    std::array<size_t, 4> tokens{};
    size_t thoughts = 0;
    size_t generated = 0;

    void add(const ReasoningTrace & trace) {
        ++n_traces;
        const auto per_thought = thought_token_counts(trace);
        for (size_t i = 0; i < trace.thoughts.size(); ++i) {
            const auto c = static_cast<size_t>(trace.thoughts[i].category);
            ++counts[c];
            tokens[c] += per_thought[i];
        }
        thoughts += trace.thoughts.size();
        generated += trace.token_count;
    }

    ThoughtStatsRow row(std::string group) const {
        ThoughtStatsRow r;
        r.group = std::move(group);
        r.n_traces = n_traces;
        r.total_counts = counts;
        r.total_tokens = tokens;
        r.total_thoughts = thoughts;
        r.total_generated_tokens = generated;
        const double n = static_cast<double>(n_traces);
        for (size_t c = 0; c < 4; ++c) {
            r.mean_counts[c] = static_cast<double>(counts[c]) / n;
            r.mean_tokens[c] = static_cast<double>(tokens[c]) / n;
        }
        r.mean_response_tokens = static_cast<double>(generated) / n;
        return r;
    }
};

} // namespace

ThoughtStats thought_statistics(std::span<const ReasoningTrace> traces) {
    if (traces.empty()) {
        throw EmptyInput("thought_statistics needs at least one trace");
    }
    Accum all;
    std::map<std::string, Accum> by_correct;
    std::map<std::string, Accum> by_difficulty;
    for (const auto & t : traces) {
        all.add(t);
        by_correct[t.correct ? (*t.correct ? "correct" : "incorrect") : "unlabeled"].add(t);
        by_difficulty[t.difficulty ? "difficulty=" + std::to_string(*t.difficulty) : "difficulty=none"].add(t);
    }
    ThoughtStats stats;
    stats.overall = all.row("all");
    for (const auto & [k, a] : by_correct) {
        stats.by_correctness.push_back(a.row(k));
    }
    for (const auto & [k, a] : by_difficulty) {
        stats.by_difficulty.push_back(a.row(k));
    }
    return stats;
}

std::string ThoughtStats::to_csv() const {
    std::ostringstream os;
    os << "group,n_traces,mean_execution,mean_reflection,mean_transition,mean_unclassified,"
          "mean_tokens_execution,mean_tokens_reflection,mean_tokens_transition,mean_response_tokens\n";
    auto emit = [&](const ThoughtStatsRow & r) {
        os << r.group << ',' << r.n_traces;
        for (double v : r.mean_counts) os << ',' << v;
        for (size_t c = 0; c < 3; ++c) os << ',' << r.mean_tokens[c];
        os << ',' << r.mean_response_tokens << '\n';
    };
    emit(overall);
    for (const auto & r : by_correctness) emit(r);
    for (const auto & r : by_difficulty) emit(r);
    return os.str();
}

} // namespace seal
