#include "mock_backend.hpp"
#include "seal/errors.hpp"
#include "seal/steer.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace seal;

namespace {

SteeringVector vec(size_t d, size_t layer) {
    SteeringVector v;
    v.values.assign(d, 0.5f);
    v.layer = layer;
    return v;
}

} // namespace

TEST_CASE("steer policy validation") {
    const BackendCapabilities caps{"x", 4, 64, 156, 256, {}};
    SteerPolicy p{vec(64, 2), 1.0, 2};
    CHECK_NOTHROW(p.validate(caps));
    p.alpha = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(p.validate(caps), InvalidConfig);
    p.alpha = -2.0;
    CHECK_NOTHROW(p.validate(caps));
    p.layer = 4;
    CHECK_THROWS_AS(p.validate(caps), LayerOutOfRange);
    p.layer = 0;
    p.vector = vec(63, 0);
    CHECK_THROWS_AS(p.validate(caps), DimensionMismatch);
}

TEST_CASE("steered generation forwards the intervention and leaves the rest of the config") {
    testing::ScriptedBackend be([](std::string_view, const GenerationConfig &) { return std::string("a\n\nb\n\nc"); });
    GenerationConfig cfg;
    cfg.max_new_tokens = 99;
    cfg.sampling = {SamplingMode::Temperature, 0.6, 5};
    SteerPolicy p{vec(8, 1), 1.5, 1, BoundaryScope::FirstBoundaryTokenOnly};
    const auto r = steered_generate(be, "q", p, cfg);
    CHECK(r.steered_positions == 2);
    REQUIRE(be.configs.size() == 1);
    const auto & seen = be.configs[0];
    REQUIRE(seen.intervention);
    CHECK(seen.intervention->alpha == 1.5);
    CHECK(seen.intervention->layer == 1);
    CHECK(seen.intervention->scope == BoundaryScope::FirstBoundaryTokenOnly);
    CHECK(seen.intervention->vector == p.vector.values);
    CHECK(seen.max_new_tokens == 99);
    CHECK(seen.sampling.temperature == 0.6);
    p.layer = 3;
    CHECK_THROWS_AS(steered_generate(be, "q", p, cfg), LayerOutOfRange);
}

TEST_CASE("logit penalty resolves single tokens and skips the rest") {
    TinyBackend be(testing::random_model());
    const auto wait = be.single_token_id("Wait");
    const auto alt = be.single_token_id("Alternatively");
    REQUIRE(wait);
    REQUIRE(alt);
    LogitPenalty pen;
    pen.tokens = {"Wait", "Alternatively", "Let me check", "zzzunknown"};
    pen.bias = -10.0;
    const auto r = resolve_penalty(be, pen);
    CHECK(r.bias == std::map<TokenId, double>{{*wait, -10.0}, {*alt, -10.0}});
    CHECK(r.skipped == std::vector<std::string>{"Let me check", "zzzunknown"});
    pen.bias = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(resolve_penalty(be, pen), InvalidConfig);
}

TEST_CASE("logit penalty adds to an existing bias") {
    testing::ScriptedBackend be([](std::string_view, const GenerationConfig &) { return std::string("x"); });
    const auto wait = be.single_token_id("Wait");
    REQUIRE(wait);
    GenerationConfig cfg;
    cfg.logit_bias[*wait] = 1.0;
    LogitPenalty pen;
    pen.tokens = {"Wait"};
    logit_penalty_generate(be, "q", pen, cfg);
    REQUIRE(be.configs.size() == 1);
    CHECK(be.configs[0].logit_bias.at(*wait) == doctest::Approx(-2.0));
    CHECK_FALSE(be.configs[0].intervention);
}

TEST_CASE("a constant vector is invisible through layer norm; a varying one is not") {
    TinyBackend be(testing::trained_model());
    const std::string prompt = "Problem: add 4, 7 and 9.\n\n";
    CHECK(steered_generate(be, prompt, SteerPolicy{vec(64, 2), -8.0, 2}, {}).text == be.generate(prompt, {}).text);
    SteeringVector alt = vec(64, 2);
    for (size_t k = 0; k < 64; k += 2) alt.values[k] = -0.5f;
    SteerPolicy p{alt, -8.0, 2};
    bool changed = false;
    for (int a = 1; a <= 9 && !changed; ++a) {
        const std::string prompt = "Problem: add " + std::to_string(a) + ", 7 and 9.\n\n";
        changed = be.generate(prompt, {}).text != steered_generate(be, prompt, p, {}).text;
    }
    CHECK(changed);
}
