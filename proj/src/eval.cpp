#include "seal/eval.hpp"

#include "seal/bytes.hpp"
#include "seal/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <regex>
#include <sstream>

namespace seal {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(ws);
    return std::string(s.substr(b, e - b + 1));
}

std::string json_scalar_string(const json & v) {
    if (v.is_string()) {
        return v.get<std::string>();
    }
    if (v.is_number_integer()) {
        return std::to_string(v.get<long long>());
    }
    if (v.is_number()) {
        std::ostringstream os;
        os << std::setprecision(17) << v.get<double>();
        return os.str();
    }
    if (v.is_null()) {
        return {};
    }
    return v.dump();
}

std::optional<int> parse_difficulty(const json & v) {
    if (v.is_null()) {
        return std::nullopt;
    }
    if (v.is_number_integer()) {
        return v.get<int>();
    }
    if (v.is_string()) {
        // "Level 4" / "4"
        static const std::regex digits("(\\d+)");
        std::smatch m;
        const auto s = v.get<std::string>();
        if (std::regex_search(s, m, digits)) {
            return std::stoi(m[1].str());
        }
    }
    throw ParseError("difficulty must be an integer or \"Level N\"");
}

const json * field(const json & j, std::initializer_list<const char *> names) {
    for (const char * n : names) {
        if (auto it = j.find(n); it != j.end()) {
            return &*it;
        }
    }
    return nullptr;
}

} // namespace

DatasetFormat dataset_format_from_string(std::string_view s) {
    if (s == "auto") return DatasetFormat::Auto;
    if (s == "math" || s == "math500") return DatasetFormat::Math;
    if (s == "gsm8k") return DatasetFormat::Gsm8k;
    if (s == "code") return DatasetFormat::Code;
    throw InvalidConfig("unknown dataset format '" + std::string(s) + "'");
}

std::string gsm8k_reference(std::string_view answer_field) {
    const auto pos = answer_field.rfind("####");
    if (pos == std::string_view::npos) {
        return trim(answer_field);
    }
    std::string out = trim(answer_field.substr(pos + 4));
    out.erase(std::remove(out.begin(), out.end(), ','), out.end());
    return out;
}

std::vector<BenchmarkItem> load_dataset(const std::string & path, DatasetFormat format) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open dataset '" + path + "'");
    }
    std::vector<BenchmarkItem> items;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        try {
            const json j = json::parse(line);
            if (!j.is_object()) {
                throw ParseError("expected a JSON object");
            }
            BenchmarkItem item;
            const json * id = field(j, {"id", "unique_id", "task_id", "question_id"});
            item.id = id ? json_scalar_string(*id) : std::to_string(items.size());
            const json * problem = field(j, {"problem", "question", "prompt"});
            if (!problem || !problem->is_string()) {
                throw ParseError("missing 'problem'");
            }
            item.problem = problem->get<std::string>();

            DatasetFormat f = format;
            if (f == DatasetFormat::Auto) {
                const json * kind = field(j, {"kind", "task"});
                if (kind && kind->is_string() && kind->get<std::string>() == "code") {
                    f = DatasetFormat::Code;
                } else if (j.contains("question") && !j.contains("problem")) {
                    f = DatasetFormat::Gsm8k;
                } else {
                    f = DatasetFormat::Math;
                }
            }
            const json * answer = field(j, {"answer", "reference", "solution"});
            const std::string raw = answer ? json_scalar_string(*answer) : std::string();
            switch (f) {
                case DatasetFormat::Gsm8k:
                    item.answer = gsm8k_reference(raw);
                    item.domain = "gsm8k";
                    break;
                case DatasetFormat::Code:
                    item.answer = raw;
                    item.kind = TaskKind::Code;
                    item.domain = "code";
                    break;
                default:
                    item.answer = trim(raw);
                    break;
            }
            if (const json * d = field(j, {"difficulty", "level"})) {
                item.difficulty = parse_difficulty(*d);
            }
            if (const json * dom = field(j, {"domain", "subject", "type"}); dom && dom->is_string()) {
                item.domain = dom->get<std::string>();
            }
            if (item.kind == TaskKind::Math && item.answer.empty()) {
                throw ParseError("empty reference answer");
            }
            items.push_back(std::move(item));
        } catch (const ParseError & e) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const json::exception & e) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return items;
}

std::vector<BenchmarkItem> hard_subset(std::span<const BenchmarkItem> items) {
    std::vector<BenchmarkItem> out;
    for (const auto & it : items) {
        if (it.difficulty && (*it.difficulty == 4 || *it.difficulty == 5)) {
            out.push_back(it);
        }
    }
    return out;
}

std::optional<std::string> extract_answer(std::string_view text, TaskKind kind) {
    if (kind != TaskKind::Math) {
        return std::nullopt;
    }
    static constexpr std::string_view kBoxed = "\\boxed{";
    std::optional<std::string> last;
    size_t pos = 0;
    while ((pos = text.find(kBoxed, pos)) != std::string_view::npos) {
        const size_t start = pos + kBoxed.size();
        int depth = 1;
        size_t i = start;
        for (; i < text.size() && depth > 0; ++i) {
            if (text[i] == '{') ++depth;
            else if (text[i] == '}') --depth;
        }
        if (depth == 0) {
            last = trim(text.substr(start, i - 1 - start));
            pos = i;
        } else {
            pos = start;
        }
    }
    if (last) {
        return last;
    }
    const auto thoughts = segment(text);
    if (thoughts.empty()) {
        return std::nullopt;
    }
    static const std::regex number("-?\\d[\\d,]*(?:\\.\\d+)?(?:/\\d+)?");
    const std::string & final_text = thoughts.back().text;
    std::optional<std::string> found;
    for (auto it = std::sregex_iterator(final_text.begin(), final_text.end(), number); it != std::sregex_iterator(); ++it) {
        std::string s = it->str();
        while (!s.empty() && s.back() == ',') s.pop_back();
        found = s;
    }
    return found;
}

namespace {

std::string canonical(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == ',' || c == '$') {
            continue;
        }
        out.push_back(c);
    }
    for (const std::string_view junk : {"\\!", "\\,", "\\;", "\\left", "\\right"}) {
        size_t p;
        while ((p = out.find(junk)) != std::string::npos) {
            out.erase(p, junk.size());
        }
    }
    while (!out.empty() && out.back() == '.') {
        out.pop_back();
    }
    return out;
}

std::optional<long double> parse_decimal(const std::string & s) {
    static const std::regex dec("[+-]?(\\d+(\\.\\d*)?|\\.\\d+)");
    if (!std::regex_match(s, dec)) {
        return std::nullopt;
    }
    return std::stold(s);
}

std::optional<long double> parse_number(const std::string & raw) {
    std::string s = raw;
    bool negate = false;
    if (!s.empty() && (s[0] == '-' || s[0] == '+') && s.find("frac") != std::string::npos) {
        negate = s[0] == '-';
        s.erase(0, 1);
    }
    static const std::regex frac("\\\\[dt]?frac\\{([^{}]+)\\}\\{([^{}]+)\\}");
    std::smatch m;
    if (std::regex_match(s, m, frac)) {
        const auto a = parse_decimal(m[1].str());
        const auto b = parse_decimal(m[2].str());
        if (!a || !b || *b == 0) {
            return std::nullopt;
        }
        return (negate ? -1 : 1) * (*a / *b);
    }
    if (const auto slash = s.find('/'); slash != std::string::npos) {
        const auto a = parse_decimal(s.substr(0, slash));
        const auto b = parse_decimal(s.substr(slash + 1));
        if (!a || !b || *b == 0) {
            return std::nullopt;
        }
        return *a / *b;
    }
    return parse_decimal(s);
}

} // namespace

bool grade(std::string_view extracted, std::string_view reference) {
    const std::string a = canonical(extracted);
    const std::string b = canonical(reference);
    if (a.empty() || b.empty()) {
        return false;
    }
    const auto x = parse_number(a);
    const auto y = parse_number(b);
    if (x && y) {
        const long double scale = std::max(std::fabs(*x), std::fabs(*y));
        return std::fabs(*x - *y) <= 1e-6L * scale;
    }
    return trim(extracted) == trim(reference);
}

std::string_view to_string(Method m) {
    switch (m) {
        case Method::Base: return "base";
        case Method::LogitPenalty: return "logit_penalty";
        case Method::Seal: return "seal";
    }
    return "base";
}

Method method_from_string(std::string_view s) {
    if (s == "base" || s == "baseline") return Method::Base;
    if (s == "logit_penalty" || s == "logit-penalty") return Method::LogitPenalty;
    if (s == "seal") return Method::Seal;
    throw InvalidConfig("unknown method '" + std::string(s) + "'");
}

json to_json(const EvalRecord & r) {
    json j = {
        {"item_id", r.item_id},
        {"method", r.method},
        {"trace", to_json(r.trace)},
        {"extracted", r.extracted ? json(*r.extracted) : json(nullptr)},
        {"correct", r.correct},
        {"gradable", r.gradable},
        {"tokens_generated", r.tokens_generated},
        {"wall_time", r.wall_time},
        {"difficulty", r.difficulty ? json(*r.difficulty) : json(nullptr)},
    };
    if (r.failed()) {
        j["error"] = r.error;
    }
    return j;
}

EvalRecord eval_record_from_json(const json & j) {
    EvalRecord r;
    r.item_id = j.at("item_id").get<std::string>();
    r.method = j.at("method").get<std::string>();
    r.trace = trace_from_json(j.at("trace"));
    if (j.contains("extracted") && !j["extracted"].is_null()) {
        r.extracted = j["extracted"].get<std::string>();
    }
    r.correct = j.at("correct").get<bool>();
    r.gradable = j.value("gradable", true);
    r.tokens_generated = j.at("tokens_generated").get<size_t>();
    r.wall_time = j.at("wall_time").get<double>();
    if (j.contains("difficulty") && !j["difficulty"].is_null()) {
        r.difficulty = j["difficulty"].get<int>();
    }
    r.error = j.value("error", std::string());
    return r;
}

json BenchmarkSummary::to_json() const {
    json rows = json::array();
    for (const auto & r : length_breakdown) {
        rows.push_back({{"group", r.group}, {"n", r.n}, {"mean_tokens", r.mean_tokens}});
    }
    json thoughts = json::object();
    for (size_t c = 0; c < 3; ++c) {
        thoughts[std::string(seal::to_string(static_cast<Category>(c)))] = mean_thoughts[c];
    }
    return {
        {"method", method},
        {"n_items", n_items},
        {"n_graded", n_graded},
        {"n_correct", n_correct},
        {"n_failed", n_failed},
        {"accuracy", accuracy},
        {"mean_tokens", mean_tokens},
        {"mean_wall_time", mean_wall_time},
        {"mean_thoughts", thoughts},
        {"length_breakdown", rows},
    };
}

BenchmarkSummary summarize(const std::string & method, std::span<const EvalRecord> records) {
    BenchmarkSummary s;
    s.method = method;
    s.n_items = records.size();

    // order-normalized: aggregate in item-id order
    std::vector<const EvalRecord *> sorted;
    for (const auto & r : records) {
        sorted.push_back(&r);
    }
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const EvalRecord * a, const EvalRecord * b) { return a->item_id < b->item_id; });

    double tokens = 0.0, time = 0.0;
    size_t ok = 0;
    std::array<double, 4> thoughts{};
    std::map<std::string, std::pair<size_t, double>> groups;
    for (const EvalRecord * r : sorted) {
        if (r->failed()) {
            ++s.n_failed;
            continue;
        }
        ++ok;
        tokens += static_cast<double>(r->tokens_generated);
        time += r->wall_time;
        for (const auto & t : r->trace.thoughts) {
            thoughts[static_cast<size_t>(t.category)] += 1.0;
        }
        const std::string diff = r->difficulty ? "difficulty=" + std::to_string(*r->difficulty) : "difficulty=none";
        auto & g = groups[diff];
        ++g.first;
        g.second += static_cast<double>(r->tokens_generated);
        if (r->gradable) {
            ++s.n_graded;
            s.n_correct += r->correct ? 1 : 0;
            auto & c = groups[r->correct ? "correct" : "incorrect"];
            ++c.first;
            c.second += static_cast<double>(r->tokens_generated);
        }
    }
    // failed gradable items count as wrong
    for (const EvalRecord * r : sorted) {
        if (r->failed() && r->gradable) {
            ++s.n_graded;
        }
    }
    s.accuracy = s.n_graded ? 100.0 * static_cast<double>(s.n_correct) / static_cast<double>(s.n_graded) : 0.0;
    if (ok) {
        s.mean_tokens = tokens / static_cast<double>(ok);
        s.mean_wall_time = time / static_cast<double>(ok);
        for (size_t c = 0; c < 4; ++c) {
            s.mean_thoughts[c] = thoughts[c] / static_cast<double>(ok);
        }
    }
    for (const auto & [name, g] : groups) {
        s.length_breakdown.push_back({name, g.first, g.second / static_cast<double>(g.first)});
    }
    return s;
}

BenchmarkRun run_benchmark(Backend & backend, std::span<const BenchmarkItem> items, const MethodSpec & method,
                           const GenerationConfig & config, const RunOptions & options) {
    GenerationConfig base = config;
    const auto caps = backend.capabilities();
    switch (method.method) {
        case Method::Base:
            break;
        case Method::LogitPenalty: {
            const LogitPenalty penalty = method.penalty.value_or(LogitPenalty{});
            for (const auto & [id, b] : resolve_penalty(backend, penalty).bias) {
                base.logit_bias[id] += b;
            }
            break;
        }
        case Method::Seal:
            if (!method.policy) {
                throw InvalidConfig("seal method requires a steering policy");
            }
            method.policy->validate(caps);
            base.intervention = method.policy->intervention();
            break;
    }
    base.validate(caps);

    const std::string name = method.name();
    std::vector<EvalRecord> records(items.size());
    const auto n = static_cast<std::ptrdiff_t>(items.size());
    #pragma omp parallel for schedule(dynamic, 1) num_threads(static_cast<int>(std::max<size_t>(1, options.jobs)))
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const BenchmarkItem & item = items[static_cast<size_t>(i)];
        EvalRecord & rec = records[static_cast<size_t>(i)];
        rec.item_id = item.id;
        rec.method = name;
        rec.difficulty = item.difficulty;
        rec.gradable = item.gradable();
        GenerationConfig cfg = base;
        if (options.derive_seeds) {
            cfg.sampling.seed = config.sampling.seed + static_cast<uint64_t>(i);
        }
        try {
            const auto t0 = std::chrono::steady_clock::now();
            const GenerationResult r = backend.generate(item.problem, cfg);
            const auto t1 = std::chrono::steady_clock::now();
            rec.wall_time = r.wall_time > 0.0 ? r.wall_time : std::chrono::duration<double>(t1 - t0).count();
            rec.tokens_generated = r.tokens_generated;
            rec.trace = classify_trace(trace_from_result(item.problem, r, caps.model_id), options.rules);
            rec.trace.difficulty = item.difficulty;
            rec.extracted = extract_answer(rec.trace.output, item.kind);
            rec.correct = rec.gradable && rec.extracted && grade(*rec.extracted, item.answer);
            if (rec.gradable) {
                rec.trace.correct = rec.correct;
            }
        } catch (const std::exception & e) {
            rec.error = e.what();
            rec.correct = false;
        }
    }
    for (const auto & rec : records) {
        if (rec.failed()) {
            std::cerr << "warning: item " << rec.item_id << " failed: " << rec.error << "\n";
        }
    }
    BenchmarkRun run;
    run.summary = summarize(name, records);
    run.records = std::move(records);
    return run;
}

std::string summary_csv_header() {
    return "method,n_items,n_graded,n_correct,n_failed,accuracy,mean_tokens,mean_wall_time,"
           "mean_execution,mean_reflection,mean_transition";
}

std::string summary_csv_row(const BenchmarkSummary & s) {
    std::ostringstream os;
    os << s.method << ',' << s.n_items << ',' << s.n_graded << ',' << s.n_correct << ',' << s.n_failed << ','
       << std::fixed << std::setprecision(1) << s.accuracy << ',' << s.mean_tokens << ',' << std::setprecision(4)
       << s.mean_wall_time << ',' << std::setprecision(2) << s.mean_thoughts[0] << ',' << s.mean_thoughts[1] << ','
       << s.mean_thoughts[2];
    return os.str();
}

json EfficiencyReport::to_json() const {
    return {
        {"pairs", pairs},
        {"base_throughput", base_throughput},
        {"method_throughput", method_throughput},
        {"base_avg_tokens", base_avg_tokens},
        {"method_avg_tokens", method_avg_tokens},
        {"avg_token_reduction", avg_token_reduction},
        {"max_token_reduction", max_token_reduction},
        {"base_avg_time", base_avg_time},
        {"method_avg_time", method_avg_time},
        {"avg_time_reduction", avg_time_reduction},
        {"max_time_reduction", max_time_reduction},
    };
}

double reduction_percent(double base, double method) {
    if (base == 0.0) {
        return 0.0;
    }
    return 100.0 * (base - method) / base;
}

EfficiencyReport efficiency_from_pairs(std::span<const EfficiencyPair> pairs) {
    EfficiencyReport r;
    r.pairs = pairs.size();
    if (pairs.empty()) {
        return r;
    }
    double bt = 0, mt = 0, bs = 0, ms = 0, tok_red = 0, time_red = 0;
    double tok_max = -std::numeric_limits<double>::infinity();
    double time_max = -std::numeric_limits<double>::infinity();
    for (const auto & p : pairs) {
        bt += p.base_tokens;
        mt += p.method_tokens;
        bs += p.base_time;
        ms += p.method_time;
        const double t = reduction_percent(p.base_tokens, p.method_tokens);
        const double s = reduction_percent(p.base_time, p.method_time);
        tok_red += t;
        time_red += s;
        tok_max = std::max(tok_max, t);
        time_max = std::max(time_max, s);
    }
    const double n = static_cast<double>(pairs.size());
    r.base_avg_tokens = bt / n;
    r.method_avg_tokens = mt / n;
    r.base_avg_time = bs / n;
    r.method_avg_time = ms / n;
    r.avg_token_reduction = tok_red / n;
    r.max_token_reduction = tok_max;
    r.avg_time_reduction = time_red / n;
    r.max_time_reduction = time_max;
    r.base_throughput = bs > 0 ? bt / bs : 0.0;
    r.method_throughput = ms > 0 ? mt / ms : 0.0;
    return r;
}

EfficiencyReport efficiency_report(std::span<const EvalRecord> base, std::span<const EvalRecord> method) {
    std::map<std::string, const EvalRecord *> by_id;
    for (const auto & r : base) {
        if (!r.failed()) {
            by_id[r.item_id] = &r;
        }
    }
    std::vector<const EvalRecord *> ordered;
    for (const auto & r : method) {
        if (!r.failed()) {
            ordered.push_back(&r);
        }
    }
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const EvalRecord * a, const EvalRecord * b) { return a->item_id < b->item_id; });
    std::vector<EfficiencyPair> pairs;
    for (const EvalRecord * r : ordered) {
        const auto it = by_id.find(r->item_id);
        if (it == by_id.end()) {
            throw MissingPair("no baseline record for item '" + r->item_id + "'");
        }
        pairs.push_back({static_cast<double>(it->second->tokens_generated), static_cast<double>(r->tokens_generated),
                         it->second->wall_time, r->wall_time});
    }
    return efficiency_from_pairs(pairs);
}

void write_records(const std::string & path, std::span<const EvalRecord> records) {
    std::ofstream out(path);
    if (!out) {
        throw ParseError("cannot write '" + path + "'");
    }
    for (const auto & r : records) {
        out << to_json(r).dump() << '\n';
    }
}

std::vector<EvalRecord> read_records(const std::string & path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open '" + path + "'");
    }
    std::vector<EvalRecord> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        try {
            out.push_back(eval_record_from_json(json::parse(line)));
        } catch (const json::exception & e) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

} // namespace seal
