#pragma once

// Latent-space analysis of thought representations: 2D projections,
// Execution vs Reflection∪Transition separability, and counts of reflection
// or transition thoughts that only phrase rules catch ("reworded").

#include "seal/classify.hpp"
#include "seal/extract.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace seal {

enum class ProjectionMethod { Pca, Tsne };
ProjectionMethod projection_method_from_string(std::string_view s);

struct ProjectedPoint {
    double x = 0.0;
    double y = 0.0;
    Category category = Category::Execution;
    size_t trace_id = 0;
    size_t thought_index = 0;
};

struct TsneOptions {
    double perplexity = 30.0;
    size_t iterations = 1000;
    uint64_t seed = 0;
};

// PCA: top-2 components of the mean-centered vectors, each sign fixed so the
// largest-magnitude loading is positive. t-SNE: exact gradient, seeded.
// Throws TooFewPoints below 3 entries.
std::vector<ProjectedPoint> project(const RepresentationSet & set, ProjectionMethod method,
                                    const TsneOptions & tsne = {});

std::vector<ProjectedPoint> pca_project(const RepresentationSet & set);
std::vector<ProjectedPoint> tsne_project(const RepresentationSet & set, const TsneOptions & options);

std::string projection_csv(std::span<const ProjectedPoint> points);

struct SeparabilityRow {
    size_t layer = 0;
    size_t n_execution = 0;
    size_t n_other = 0;
    double centroid_accuracy = 0.0;  // leave-one-out nearest centroid
    double silhouette = 0.0;
};

// Execution vs Reflection∪Transition. Throws InsufficientData unless both
// groups have at least 5 entries.
SeparabilityRow separability(const RepresentationSet & set);
std::vector<SeparabilityRow> separability(std::span<const RepresentationSet> per_layer);

std::string separability_csv(std::span<const SeparabilityRow> rows);
nlohmann::json to_json(const SeparabilityRow & row);

struct RewordedCounts {
    std::string label;
    size_t traces = 0;
    size_t reflection = 0;         // reworded reflections
    size_t transition = 0;         // reworded transitions
    size_t total_reflection = 0;   // all reflections (prefix or phrase)
    size_t total_transition = 0;

    size_t reworded() const { return reflection + transition; }
};

// Re-runs the rules on every thought and counts Reflection/Transition thoughts
// matched by a phrase rule but not a prefix rule.
RewordedCounts reworded_count(std::span<const ReasoningTrace> traces, const ClassificationRules & rules,
                              std::string label = "");

std::string reworded_csv(std::span<const RewordedCounts> rows);

} // namespace seal
