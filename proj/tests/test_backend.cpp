#include "backend_contract.hpp"
#include "seal/steer.hpp"
#include "seal/tiny_backend.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <fstream>

using namespace seal;

TEST_CASE("tiny backend capabilities") {
    TinyBackend be(testing::trained_model());
    const auto caps = be.capabilities();
    CHECK(caps.n_layers == 4);
    CHECK(caps.d_model == 64);
    CHECK(caps.vocab_size == 156);
    CHECK(caps.max_context == 256);
    CHECK(caps.newline_token_ids == std::vector<TokenId>{WordTokenizer::kDoubleNewline, WordTokenizer::kNewline});
    CHECK(caps.model_id == "seal-tiny-seed1234");
}

TEST_CASE("tiny backend satisfies the backend contract") {
    TinyBackend be(testing::trained_model());
    testing::run_backend_contract(be);
}

TEST_CASE("the same seed loads bitwise-identical weights") {
    auto a = build_tiny_backend(1234);
    auto b = build_tiny_backend(1234);
    CHECK(a->model().params() == b->model().params());
}

TEST_CASE("greedy generation reproduces the committed golden sequence") {
    std::ifstream in(testing::data_path("golden_greedy.json"));
    REQUIRE(in);
    const auto golden = nlohmann::json::parse(in);
    TinyBackend be(testing::trained_model());
    for (const auto & g : golden) {
        GenerationConfig cfg;
        cfg.max_new_tokens = g["max_new_tokens"].get<size_t>();
        const auto r = be.generate(g["prompt"].get<std::string>(), cfg);
        CHECK(r.token_ids == g["token_ids"].get<std::vector<TokenId>>());
        CHECK(r.text == g["text"].get<std::string>());
    }
}

TEST_CASE("offsets tile the generated text") {
    TinyBackend be(testing::trained_model());
    const auto r = be.generate("Problem: add 4, 4 and 8.\n\n", GenerationConfig{});
    REQUIRE(r.offsets.size() == r.token_ids.size());
    size_t pos = 0;
    for (const auto & o : r.offsets) {
        CHECK(o.begin == pos);
        pos = o.end;
    }
    CHECK(pos == r.text.size());
    CHECK(r.finish_reason == "eos");
    const auto trace = trace_from_result("p", r, "m");
    for (size_t i = 0; i + 1 < trace.thoughts.size(); ++i) {
        REQUIRE(trace.thoughts[i].has_boundary());
        CHECK(r.token_ids[trace.thoughts[i].tap_position()] == WordTokenizer::kDoubleNewline);
    }
}

TEST_CASE("intervention is local: only the boundary state moves, by exactly alpha * S") {
    auto model = testing::trained_model();
    TinyBackend be(model);
    const auto & tok = model->tokenizer();
    const std::string prompt = "Problem: add 3 and 4.\n\n";
    const auto cont = tok.encode("Start with 3.\n\nAdd 4");
    size_t boundary = 0;
    for (size_t i = 0; i < cont.size(); ++i) {
        if (cont[i] == WordTokenizer::kDoubleNewline) boundary = i;
    }
    const size_t offset = tok.encode(prompt).size() + 1;  // BOS
    std::vector<float> S(64);
    for (size_t k = 0; k < S.size(); ++k) S[k] = 0.05f * static_cast<float>(static_cast<int>(k % 9) - 4);
    for (size_t layer = 0; layer < 4; ++layer) {
        const double alpha = 1.5;
        const auto base = be.residual_states(prompt, cont);
        const auto steered =
            be.residual_states(prompt, cont, Intervention{S, alpha, layer, BoundaryScope::AllNewlineTokens});
        REQUIRE(base.size() == offset + cont.size());
        double worst_other = 0.0, worst_boundary = 0.0;
        for (size_t pos = 0; pos < base.size(); ++pos) {
            for (size_t k = 0; k < 64; ++k) {
                const double b = base[pos][layer][k];
                const double s = steered[pos][layer][k];
                if (pos == offset + boundary) {
                    worst_boundary = std::max(worst_boundary, std::abs(s - (b + alpha * S[k])));
                } else {
                    worst_other = std::max(worst_other, std::abs(s - b));
                }
            }
        }
        CHECK(worst_boundary <= 1e-5);
        CHECK(worst_other <= 1e-6);
    }
}

TEST_CASE("first-boundary-only scope steers the first of two newline tokens") {
    auto model = testing::trained_model();
    TinyBackend be(model);
    const std::string prompt = "Problem: add 1 and 2.\n\n";
    std::vector<TokenId> cont = model->tokenizer().encode("Start with 1.");
    cont.push_back(WordTokenizer::kNewline);
    cont.push_back(WordTokenizer::kNewline);
    const size_t first = model->tokenizer().encode(prompt).size() + 1 + cont.size() - 2;
    std::vector<float> S(64, 0.25f);
    const size_t layer = 2;
    const auto base = be.residual_states(prompt, cont);
    const auto all = be.residual_states(prompt, cont, Intervention{S, 1.0, layer, BoundaryScope::AllNewlineTokens});
    const auto once =
        be.residual_states(prompt, cont, Intervention{S, 1.0, layer, BoundaryScope::FirstBoundaryTokenOnly});
    auto moved = [&](const auto & run, size_t pos) { return run[pos][layer] != base[pos][layer]; };
    CHECK(moved(all, first));
    CHECK(moved(all, first + 1));
    CHECK(moved(once, first));
    CHECK_FALSE(moved(once, first + 1));
}

TEST_CASE("steering counts one application per generated newline token") {
    TinyBackend be(testing::trained_model());
    GenerationConfig cfg;
    cfg.intervention = Intervention{std::vector<float>(64, 0.f), 1.0, 1, BoundaryScope::AllNewlineTokens};
    const auto r = be.generate("Problem: add 5, 6 and 7.\n\n", cfg);
    size_t newlines = 0;
    for (auto id : r.token_ids) newlines += id == WordTokenizer::kDoubleNewline || id == WordTokenizer::kNewline;
    CHECK(r.steered_positions == newlines);
    CHECK(newlines > 0);
}

TEST_CASE("generation stops at the context limit, on stop strings and on the token budget") {
    auto model = testing::random_model(3);
    TinyBackend be(model);
    GenerationConfig cfg;
    cfg.max_new_tokens = 1000;
    cfg.logit_bias[WordTokenizer::kEos] = -1e9;
    const std::string prompt = "Problem: add 1 and 2.\n\n";
    const auto r = be.generate(prompt, cfg);
    CHECK(r.finish_reason == "context");
    CHECK(r.tokens_generated == 256 - (model->tokenizer().encode(prompt).size() + 1));

    cfg.max_new_tokens = 7;
    const auto l = be.generate(prompt, cfg);
    CHECK(l.finish_reason == "length");
    CHECK(l.tokens_generated == 7);

    TinyBackend trained(testing::trained_model());
    GenerationConfig stop;
    stop.stop = {"\n\n"};
    const auto s = trained.generate(prompt, stop);
    CHECK(s.finish_reason == "stop");
    CHECK(s.token_ids.back() == WordTokenizer::kDoubleNewline);
}

TEST_CASE("an over-long prompt raises ContextOverflow") {
    TinyBackend be(testing::random_model(3));
    std::string prompt;
    for (int i = 0; i < 300; ++i) prompt += "add ";
    CHECK_THROWS_AS(be.generate(prompt, GenerationConfig{}), ContextOverflow);
}

TEST_CASE("replayed logits match the generation-time logits") {
    TinyBackend be(testing::trained_model());
    GenerationConfig cfg;
    cfg.max_new_tokens = 20;
    cfg.logit_probe_ids = {WordTokenizer::kDoubleNewline};
    const std::string prompt = "Problem: add 2 and 2.\n\n";
    const auto r = be.generate(prompt, cfg);
    const auto replay = be.replay_logits(prompt, r.token_ids);
    REQUIRE(replay.size() == r.token_ids.size());
    for (size_t s = 0; s < replay.size(); ++s) {
        CHECK(static_cast<double>(replay[s][WordTokenizer::kDoubleNewline]) == r.probe_raw_logits[s][0]);
    }
}

TEST_CASE("generation config and result JSON round trip") {
    GenerationConfig c;
    c.max_new_tokens = 12;
    c.sampling = {SamplingMode::Temperature, 0.7, 99};
    c.tap_layer = 2;
    c.intervention = Intervention{{0.5f, -1.25f}, 0.5, 1, BoundaryScope::FirstBoundaryTokenOnly};
    c.logit_bias = {{23, -3.0}};
    c.stop = {"\\boxed"};
    c.logit_probe_ids = {23};
    const auto back = generation_config_from_json(to_json(c));
    CHECK(back.max_new_tokens == 12);
    CHECK(back.sampling.mode == SamplingMode::Temperature);
    CHECK(back.sampling.temperature == 0.7);
    CHECK(back.sampling.seed == 99);
    CHECK(back.tap_layer == std::optional<size_t>(2));
    REQUIRE(back.intervention);
    CHECK(back.intervention->vector == c.intervention->vector);
    CHECK(back.intervention->scope == BoundaryScope::FirstBoundaryTokenOnly);
    CHECK(back.logit_bias == c.logit_bias);
    CHECK(back.stop == c.stop);

    TinyBackend be(testing::trained_model());
    GenerationConfig g;
    g.tap_layer = 1;
    g.logit_probe_ids = {3};
    const auto r = be.generate("Problem: add 1 and 8.\n\n", g);
    const auto rb = generation_result_from_json(to_json(r));
    CHECK(rb.text == r.text);
    CHECK(rb.token_ids == r.token_ids);
    CHECK(rb.offsets == r.offsets);
    REQUIRE(rb.taps.size() == r.taps.size());
    for (size_t i = 0; i < r.taps.size(); ++i) {
        CHECK(rb.taps[i].vector == r.taps[i].vector);
        CHECK(rb.taps[i].token_position == r.taps[i].token_position);
    }
    CHECK(rb.probe_raw_logits == r.probe_raw_logits);
    CHECK(rb.finish_reason == r.finish_reason);
}
