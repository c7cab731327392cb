#include "seal/analyze.hpp"
#include "seal/errors.hpp"
#include "seal/random.hpp"
#include "seal/trace.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace seal;

namespace {

// two Gaussian clusters whose centers are `gap` apart along the first axis
RepresentationSet clusters(size_t n_each, double gap, uint64_t seed, size_t d = 6) {
    Rng rng(seed);
    RepresentationSet set;
    set.d_model = d;
    for (size_t i = 0; i < 2 * n_each; ++i) {
        const bool e = i < n_each;
        std::vector<float> v(d);
        for (auto & x : v) x = static_cast<float>(rng.normal());
        v[0] += static_cast<float>(e ? 0.0 : gap);
        const Category c = e ? Category::Execution : (i % 2 ? Category::Reflection : Category::Transition);
        set.entries.push_back({c, v, i, 0});
    }
    return set;
}

} // namespace

TEST_CASE("PCA recovers a planted plane with fixed signs") {
    // grid in the plane spanned by u = (0.6, 0.8, 0) and w = (0, 0, 1); the
    // grid is centred and uncorrelated, so the components are exactly u and w
    RepresentationSet set;
    set.d_model = 3;
    std::vector<std::pair<double, double>> ts;
    for (double t : {-3.0, -1.0, 1.0, 3.0}) {
        for (double s : {-0.5, 0.5}) {
            ts.push_back({t, s});
            set.entries.push_back({Category::Execution,
                                   {static_cast<float>(0.6 * t), static_cast<float>(0.8 * t), static_cast<float>(s)},
                                   ts.size() - 1, 0});
        }
    }
    const auto p = pca_project(set);
    REQUIRE(p.size() == ts.size());
    for (size_t i = 0; i < p.size(); ++i) {
        CHECK(p[i].x == doctest::Approx(ts[i].first).epsilon(1e-5));
        CHECK(p[i].y == doctest::Approx(ts[i].second).epsilon(1e-5));
        CHECK(p[i].trace_id == i);
    }
}

TEST_CASE("PCA coordinates scale with the input") {
    auto set = clusters(10, 4.0, 1);
    const auto a = pca_project(set);
    for (auto & e : set.entries)
        for (auto & x : e.vector) x *= 3.0f;
    const auto b = pca_project(set);
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(b[i].x == doctest::Approx(3.0 * a[i].x).epsilon(1e-4));
        CHECK(b[i].y == doctest::Approx(3.0 * a[i].y).epsilon(1e-4));
    }
}

TEST_CASE("well separated clusters stay apart under PCA and t-SNE") {
    const auto set = clusters(20, 20.0, 3);
    auto split = [&](const std::vector<ProjectedPoint> & pts) {
        double ce = 0, co = 0;
        for (size_t i = 0; i < pts.size(); ++i) (i < 20 ? ce : co) += pts[i].x / 20.0;
        const double mid = (ce + co) / 2;
        for (size_t i = 0; i < pts.size(); ++i) {
            const bool e_side = (pts[i].x < mid) == (ce < mid);
            if (e_side != (i < 20)) return false;
        }
        return true;
    };
    CHECK(split(project(set, ProjectionMethod::Pca)));
    const auto t = tsne_project(set, TsneOptions{10.0, 400, 5});
    double ex = 0, ey = 0, ox = 0, oy = 0;
    for (size_t i = 0; i < t.size(); ++i) {
        (i < 20 ? ex : ox) += t[i].x / 20.0;
        (i < 20 ? ey : oy) += t[i].y / 20.0;
    }
    size_t right = 0;
    for (size_t i = 0; i < t.size(); ++i) {
        const double de = std::hypot(t[i].x - ex, t[i].y - ey), dox = std::hypot(t[i].x - ox, t[i].y - oy);
        right += (de < dox) == (i < 20);
    }
    CHECK(right == 40);
}

TEST_CASE("t-SNE is deterministic for a seed") {
    const auto set = clusters(12, 3.0, 4);
    const TsneOptions opt{5.0, 200, 9};
    const auto a = tsne_project(set, opt);
    const auto b = tsne_project(set, opt);
    bool same = true;
    for (size_t i = 0; i < a.size(); ++i) same = same && a[i].x == b[i].x && a[i].y == b[i].y;
    CHECK(same);
    const auto c = tsne_project(set, TsneOptions{5.0, 200, 10});
    CHECK(c[0].x != a[0].x);
}

TEST_CASE("projection rejects fewer than three points") {
    auto set = clusters(1, 1.0, 1);
    CHECK_THROWS_AS(project(set, ProjectionMethod::Pca), TooFewPoints);
    CHECK_THROWS_AS(project(set, ProjectionMethod::Tsne), TooFewPoints);
    CHECK(projection_method_from_string("tsne") == ProjectionMethod::Tsne);
    CHECK(projection_method_from_string("pca") == ProjectionMethod::Pca);
    CHECK_THROWS_AS(projection_method_from_string("umap"), InvalidConfig);
}

TEST_CASE("separability is perfect for separated clusters and near chance for one distribution") {
    const auto far = separability(clusters(30, 30.0, 5));
    CHECK(far.centroid_accuracy == 1.0);
    CHECK(far.silhouette > 0.8);
    CHECK(far.n_execution == 30);
    CHECK(far.n_other == 30);
    const auto same = separability(clusters(100, 0.0, 6));
    CHECK(same.centroid_accuracy < 0.65);
    CHECK(std::abs(same.silhouette) < 0.1);
}

TEST_CASE("separability needs five entries per group") {
    CHECK_THROWS_AS(separability(clusters(4, 5.0, 7)), InsufficientData);
    std::vector<RepresentationSet> layers{clusters(10, 1.0, 8), clusters(10, 10.0, 9)};
    layers[0].layer = 0;
    layers[1].layer = 3;
    const auto rows = separability(layers);
    REQUIRE(rows.size() == 2);
    CHECK(rows[1].layer == 3);
    CHECK(rows[1].centroid_accuracy >= rows[0].centroid_accuracy);
    const auto csv = separability_csv(rows);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    CHECK(to_json(rows[1]).at("layer") == 3);
}

TEST_CASE("reworded counts phrase-only reflections and transitions") {
    const auto trace = make_trace("p",
                                  "Start with 2.\n\nWait, let me verify.\n\nLet me check the sum.\n\n"
                                  "Alternatively, add.\n\nTry another approach.\n\nDone.",
                                  "m", 0);
    const std::vector<ReasoningTrace> traces{trace, trace};
    const auto c = reworded_count(traces, ClassificationRules::defaults(), "base");
    CHECK(c.label == "base");
    CHECK(c.traces == 2);
    CHECK(c.reflection == 2);
    CHECK(c.transition == 2);
    CHECK(c.total_reflection == 4);
    CHECK(c.total_transition == 4);
    CHECK(c.reworded() == 4);
    const std::vector<RewordedCounts> rows{c};
    const auto csv = reworded_csv(rows);
    CHECK(csv.find("base") != std::string::npos);
}

TEST_CASE("projection CSV has one row per point") {
    const auto pts = pca_project(clusters(5, 2.0, 1));
    const auto csv = projection_csv(pts);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 11);
    CHECK(csv.rfind("trace_id,thought_index,category,x,y\n", 0) == 0);
}
