#pragma once

// Benchmark harness: dataset loading, answer extraction and grading, method
// comparison (base / logits penalty / steering) and efficiency accounting.

#include "seal/backend.hpp"
#include "seal/classify.hpp"
#include "seal/steer.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace seal {

enum class TaskKind { Math, Code };

struct BenchmarkItem {
    std::string id;
    std::string problem;
    std::string answer;
    std::optional<int> difficulty;
    std::string domain;
    TaskKind kind = TaskKind::Math;

    bool gradable() const { return kind == TaskKind::Math && !answer.empty(); }
};

enum class DatasetFormat { Auto, Math, Gsm8k, Code };
DatasetFormat dataset_format_from_string(std::string_view s);

// JSONL with {id, problem, answer, difficulty?}. Also accepts the public
// MATH-500 field names (unique_id, level, subject) and GSM8K's
// {question, answer: "... #### 42"}. Throws ParseError with the line number.
std::vector<BenchmarkItem> load_dataset(const std::string & path, DatasetFormat format = DatasetFormat::Auto);

// difficulty 4 or 5
std::vector<BenchmarkItem> hard_subset(std::span<const BenchmarkItem> items);

// "... #### 42" -> "42"
std::string gsm8k_reference(std::string_view answer_field);

// Last \boxed{...} (balanced braces); otherwise the last number in the final
// thought. nullopt when nothing is found or the task is not math.
std::optional<std::string> extract_answer(std::string_view text, TaskKind kind = TaskKind::Math);

// Numeric equivalence (integers, decimals, a/b, \frac{a}{b}) at 1e-6 relative
// tolerance after stripping whitespace, commas and $; exact string match
// after trimming otherwise.
bool grade(std::string_view extracted, std::string_view reference);

enum class Method { Base, LogitPenalty, Seal };
std::string_view to_string(Method m);
Method method_from_string(std::string_view s);

struct MethodSpec {
    Method method = Method::Base;
    std::string label;                       // defaults to the method name
    std::optional<SteerPolicy> policy;       // Seal
    std::optional<LogitPenalty> penalty;     // LogitPenalty

    std::string name() const { return label.empty() ? std::string(to_string(method)) : label; }
};

struct EvalRecord {
    std::string item_id;
    std::string method;
    ReasoningTrace trace;
    std::optional<std::string> extracted;
    bool correct = false;
    bool gradable = true;
    size_t tokens_generated = 0;
    double wall_time = 0.0;
    std::optional<int> difficulty;
    std::string error;  // non-empty when the item failed

    bool failed() const { return !error.empty(); }
};

nlohmann::json to_json(const EvalRecord & r);
EvalRecord eval_record_from_json(const nlohmann::json & j);

struct LengthBreakdownRow {
    std::string group;   // "difficulty=3", "correct", "incorrect"
    size_t n = 0;
    double mean_tokens = 0.0;
};

struct BenchmarkSummary {
    std::string method;
    size_t n_items = 0;
    size_t n_graded = 0;
    size_t n_correct = 0;
    size_t n_failed = 0;
    double accuracy = 0.0;        // percent over graded items
    double mean_tokens = 0.0;     // over successful items
    double mean_wall_time = 0.0;
    std::array<double, 4> mean_thoughts{};  // per Category
    std::vector<LengthBreakdownRow> length_breakdown;

    nlohmann::json to_json() const;
};

struct BenchmarkRun {
    std::vector<EvalRecord> records;  // ordered by item index
    BenchmarkSummary summary;
};

struct RunOptions {
    size_t jobs = 1;
    ClassificationRules rules = ClassificationRules::defaults();
    // per-item seed = base seed + item index
    bool derive_seeds = true;
};

// Per-item failures are recorded and the run continues.
BenchmarkRun run_benchmark(Backend & backend, std::span<const BenchmarkItem> items, const MethodSpec & method,
                           const GenerationConfig & config, const RunOptions & options = {});

BenchmarkSummary summarize(const std::string & method, std::span<const EvalRecord> records);

std::string summary_csv_header();
std::string summary_csv_row(const BenchmarkSummary & s);

struct EfficiencyReport {
    double base_throughput = 0.0;      // tokens / second
    double method_throughput = 0.0;
    double base_avg_tokens = 0.0;
    double method_avg_tokens = 0.0;
    double avg_token_reduction = 0.0;  // percent, mean of per-item ratios
    double max_token_reduction = 0.0;
    double base_avg_time = 0.0;
    double method_avg_time = 0.0;
    double avg_time_reduction = 0.0;
    double max_time_reduction = 0.0;
    size_t pairs = 0;

    nlohmann::json to_json() const;
};

struct EfficiencyPair {
    double base_tokens = 0.0;
    double method_tokens = 0.0;
    double base_time = 0.0;
    double method_time = 0.0;
};

// percent reduction of `method` relative to `base`
double reduction_percent(double base, double method);

EfficiencyReport efficiency_from_pairs(std::span<const EfficiencyPair> pairs);

// Pairs records by item id; throws MissingPair when a method record has no
// baseline record. Failed records are excluded on both sides.
EfficiencyReport efficiency_report(std::span<const EvalRecord> base, std::span<const EvalRecord> method);

void write_records(const std::string & path, std::span<const EvalRecord> records);
std::vector<EvalRecord> read_records(const std::string & path);

} // namespace seal
