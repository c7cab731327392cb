#include "mock_backend.hpp"
#include "seal/errors.hpp"
#include "seal/eval.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <fstream>

using namespace seal;

namespace {

std::string write_text(const std::string & name, const std::string & body) {
    const auto path = testing::temp_path(name);
    std::ofstream(path) << body;
    return path;
}

EvalRecord rec(std::string id, size_t tokens, double time) {
    EvalRecord r;
    r.item_id = std::move(id);
    r.tokens_generated = tokens;
    r.wall_time = time;
    return r;
}

} // namespace

TEST_CASE("dataset loader accepts native, MATH-style and GSM8K fields") {
    const auto native = write_text("ds_native.jsonl",
                                   "{\"id\":\"a\",\"problem\":\"1+1\",\"answer\":\"2\",\"difficulty\":3}\n"
                                   "\n"
                                   "{\"unique_id\":\"b\",\"problem\":\"p\",\"solution\":\"x\",\"answer\":\"\\\\frac{1}{2}\","
                                   "\"level\":\"Level 5\",\"subject\":\"Algebra\"}\n");
    const auto items = load_dataset(native);
    REQUIRE(items.size() == 2);
    CHECK(items[0].id == "a");
    CHECK(items[0].difficulty == std::optional<int>(3));
    CHECK(items[1].id == "b");
    CHECK(items[1].answer == "\\frac{1}{2}");
    CHECK(items[1].difficulty == std::optional<int>(5));
    CHECK(items[1].domain == "Algebra");
    CHECK(hard_subset(items).size() == 1);

    const auto gsm = write_text("ds_gsm.jsonl", "{\"question\":\"How many?\",\"answer\":\"3 + 4 = 7\\n#### 1,007\"}\n");
    const auto g = load_dataset(gsm);
    REQUIRE(g.size() == 1);
    CHECK(g[0].problem == "How many?");
    CHECK(g[0].answer == "1007");
    CHECK(g[0].id == "0");
    CHECK(gsm8k_reference("work\n#### 42 ") == "42");

    const auto code = write_text("ds_code.jsonl", "{\"id\":\"c\",\"problem\":\"write f\",\"kind\":\"code\"}\n");
    const auto c = load_dataset(code);
    REQUIRE(c.size() == 1);
    CHECK(c[0].kind == TaskKind::Code);
    CHECK_FALSE(c[0].gradable());
}

TEST_CASE("dataset loader reports the failing line") {
    const auto bad = write_text("ds_bad.jsonl", "{\"id\":\"a\",\"problem\":\"p\",\"answer\":\"1\"}\n{oops\n");
    try {
        load_dataset(bad);
        FAIL("expected ParseError");
    } catch (const ParseError & e) {
        CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
    const auto missing = write_text("ds_missing.jsonl", "{\"id\":\"a\",\"answer\":\"1\"}\n");
    CHECK_THROWS_AS(load_dataset(missing), ParseError);
    CHECK_THROWS_AS(load_dataset(testing::temp_path("does_not_exist.jsonl")), ParseError);
    const auto empty = write_text("ds_empty.jsonl", "");
    CHECK(load_dataset(empty).empty());
}

TEST_CASE("answer extraction prefers the last boxed expression") {
    CHECK(extract_answer("so \\boxed{3} then \\boxed{\\frac{1}{2}}") == std::optional<std::string>("\\frac{1}{2}"));
    CHECK(extract_answer("nested \\boxed{a_{1}+b}") == std::optional<std::string>("a_{1}+b"));
    CHECK(extract_answer("Start.\n\nThe total is 1,234 and then 7.5") == std::optional<std::string>("7.5"));
    CHECK(extract_answer("first 9\n\nlast thought has -3/4 here") == std::optional<std::string>("-3/4"));
    CHECK(extract_answer("first 9\n\nno digits") == std::nullopt);
    CHECK(extract_answer("\\boxed{unclosed") == std::nullopt);
    CHECK(extract_answer("\\boxed{4}", TaskKind::Code) == std::nullopt);
}

TEST_CASE("grading compares numbers at relative tolerance and strings after trimming") {
    CHECK(grade("0.5", "1/2"));
    CHECK(grade("1/2", "0.5"));
    CHECK(grade("\\frac{1}{2}", "0.5"));
    CHECK(grade("\\dfrac{3}{4}", "0.75"));
    CHECK(grade("1,000", "1000"));
    CHECK(grade("$42$", "42"));
    CHECK(grade("42.", "42"));
    CHECK(grade("1000000", "1000000.0000001"));
    CHECK_FALSE(grade("1000000", "1000002"));
    CHECK_FALSE(grade("0.5", "0.6"));
    CHECK(grade(" x^2 ", "x^2"));
    CHECK_FALSE(grade("x^2", "x^3"));
    for (auto [a, b] : {std::pair{"3", "3.0"}, {"2/4", "0.5"}, {"7", "8"}, {"ab", "ab "}}) {
        CHECK(grade(a, b) == grade(b, a));
    }
}

TEST_CASE("method names round trip") {
    for (auto m : {Method::Base, Method::LogitPenalty, Method::Seal}) {
        CHECK(method_from_string(to_string(m)) == m);
    }
    CHECK_THROWS_AS(method_from_string("magic"), InvalidConfig);
}

TEST_CASE("a benchmark run grades, counts and survives per-item failures") {
    testing::ScriptedBackend be([](std::string_view prompt, const GenerationConfig &) -> std::string {
        if (prompt == "q4") return "!throw";
        if (prompt == "q3") return "Start.\n\nWait, check.\n\nSo the answer is \\boxed{8}.";
        return "Start.\n\nSo the answer is \\boxed{" + std::string(1, prompt[1]) + "}.";
    });
    std::vector<BenchmarkItem> items;
    for (int i = 0; i < 5; ++i) {
        items.push_back({"i" + std::to_string(i), "q" + std::to_string(i), std::to_string(i), i, "", TaskKind::Math});
    }
    GenerationConfig cfg;
    cfg.sampling.seed = 10;
    const auto run = run_benchmark(be, items, MethodSpec{}, cfg);
    REQUIRE(run.records.size() == 5);
    CHECK(run.records[4].failed());
    CHECK(run.records[0].correct);
    CHECK_FALSE(run.records[3].correct);
    CHECK(run.records[3].extracted == std::optional<std::string>("8"));
    CHECK(run.summary.n_items == 5);
    CHECK(run.summary.n_graded == 5);
    CHECK(run.summary.n_correct == 3);
    CHECK(run.summary.n_failed == 1);
    CHECK(run.summary.accuracy == doctest::Approx(60.0));
    CHECK(run.summary.mean_thoughts[static_cast<size_t>(Category::Reflection)] == doctest::Approx(0.25));
    CHECK(run.records[3].trace.thoughts[1].category == Category::Reflection);

    std::vector<EvalRecord> four(run.records.begin(), run.records.begin() + 4);
    CHECK(summarize("base", four).accuracy == doctest::Approx(75.0));
}

TEST_CASE("benchmark methods configure the backend") {
    testing::ScriptedBackend be([](std::string_view, const GenerationConfig &) { return std::string("\\boxed{1}"); });
    const std::vector<BenchmarkItem> items{{"a", "q", "1", 1, "", TaskKind::Math}};
    GenerationConfig cfg;
    MethodSpec pen;
    pen.method = Method::LogitPenalty;
    run_benchmark(be, items, pen, cfg);
    CHECK(be.configs.back().logit_bias.size() == 4);
    MethodSpec seal;
    seal.method = Method::Seal;
    CHECK_THROWS_AS(run_benchmark(be, items, seal, cfg), InvalidConfig);
    SteeringVector v;
    v.values.assign(8, 1.f);
    seal.policy = SteerPolicy{v, 1.0, 1};
    const auto run = run_benchmark(be, items, seal, cfg);
    CHECK(be.configs.back().intervention);
    CHECK(run.summary.method == "seal");
}

TEST_CASE("efficiency averages per-item reductions") {
    const std::vector<EfficiencyPair> pairs{{100, 50, 2.0, 1.0}, {200, 150, 4.0, 3.0}};
    const auto r = efficiency_from_pairs(pairs);
    CHECK(r.avg_token_reduction == doctest::Approx(37.5));
    CHECK(r.max_token_reduction == doctest::Approx(50.0));
    CHECK(r.base_avg_tokens == doctest::Approx(150.0));
    CHECK(r.method_avg_tokens == doctest::Approx(100.0));
    CHECK(r.base_throughput == doctest::Approx(50.0));
    CHECK(r.avg_time_reduction == doctest::Approx(37.5));
    CHECK(r.pairs == 2);
    CHECK(reduction_percent(4666.9, 3047.7) == doctest::Approx(34.696).epsilon(1e-4));
    CHECK(reduction_percent(100, 150) == doctest::Approx(-50.0));
    CHECK(reduction_percent(0, 10) == 0.0);
}

TEST_CASE("efficiency report pairs records by item id") {
    const std::vector<EvalRecord> base{rec("b", 200, 4.0), rec("a", 100, 2.0)};
    const std::vector<EvalRecord> method{rec("a", 50, 1.0), rec("b", 150, 3.0)};
    const auto r = efficiency_report(base, method);
    CHECK(r.avg_token_reduction == doctest::Approx(37.5));
    CHECK(r.max_token_reduction == doctest::Approx(50.0));
    const auto swapped = efficiency_report(method, base);
    CHECK(swapped.max_token_reduction == doctest::Approx(-100.0 / 3.0));
    const std::vector<EvalRecord> extra{rec("a", 50, 1.0), rec("z", 1, 1.0)};
    CHECK_THROWS_AS(efficiency_report(base, extra), MissingPair);
    auto failed = extra;
    failed[1].error = "boom";
    CHECK(efficiency_report(base, failed).pairs == 1);
}

TEST_CASE("eval records round trip through JSONL") {
    testing::ScriptedBackend be([](std::string_view, const GenerationConfig &) {
        return std::string("Start.\n\nAlternatively, go.\n\n\\boxed{2}");
    });
    const std::vector<BenchmarkItem> items{{"x", "q", "2", 4, "", TaskKind::Math}};
    const auto run = run_benchmark(be, items, MethodSpec{}, GenerationConfig{});
    const auto path = testing::temp_path("records_rt.jsonl");
    write_records(path, run.records);
    const auto back = read_records(path);
    REQUIRE(back.size() == 1);
    CHECK(back[0].item_id == "x");
    CHECK(back[0].correct);
    CHECK(back[0].extracted == run.records[0].extracted);
    CHECK(back[0].difficulty == std::optional<int>(4));
    CHECK(back[0].tokens_generated == run.records[0].tokens_generated);
    CHECK(back[0].trace.thoughts.size() == 3);
    CHECK(back[0].trace.thoughts[1].category == Category::Transition);
    CHECK(to_json(back[0]) == to_json(run.records[0]));
}

TEST_CASE("summary serialises to CSV with a matching header") {
    BenchmarkSummary s;
    s.method = "base";
    const auto header = summary_csv_header();
    const auto row = summary_csv_row(s);
    CHECK(std::count(header.begin(), header.end(), ',') == std::count(row.begin(), row.end(), ','));
    CHECK(s.to_json().at("method") == "base");
}
