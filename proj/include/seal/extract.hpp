#pragma once

// Offline extraction of the reasoning steering vector: collect the hidden
// state at the first boundary token of every thought, average per category,
// and take the difference of means.

#include "seal/backend.hpp"
#include "seal/classify.hpp"

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace seal {

struct RepresentationEntry {
    Category category = Category::Execution;
    std::vector<float> vector;
    size_t trace_id = 0;
    size_t thought_index = 0;
};

struct RepresentationSet {
    std::string model_id;
    size_t layer = 0;
    size_t d_model = 0;
    std::vector<RepresentationEntry> entries;

    std::array<size_t, 3> category_counts() const;  // E, R, T
};

// Binary file: "SEALREP1", u32 metadata length, JSON metadata, then per entry
// u8 category, u32 trace id, u32 thought index, d_model float32; CRC32 trailer.
void save_representations(const std::string & path, const RepresentationSet & set);
RepresentationSet load_representations(const std::string & path);

struct CollectOptions {
    GenerationConfig generation;  // sampling/limits; tap and intervention are overridden
    size_t jobs = 1;
    // per-prompt seed = generation.sampling.seed + prompt index
    bool derive_seeds = true;
};

struct CollectResult {
    std::vector<ReasoningTrace> traces;
    RepresentationSet representations;
    size_t failed_samples = 0;
    size_t boundaries_without_tap = 0;
};

// Runs unsteered generation with a tap at `layer`, segments and classifies
// every output, and stores the tap at each thought's first boundary token
// under that thought's category. Failing samples are skipped with a warning.
CollectResult collect_representations(Backend & backend, const std::vector<std::string> & prompts, size_t layer,
                                      const ClassificationRules & rules, const CollectOptions & options = {});

// First n after a seeded shuffle.
std::vector<size_t> select_samples(size_t available, size_t n, uint64_t seed);

enum class MeanGroup { Execution, Reflection, Transition, ReflectionTransition };
std::string_view to_string(MeanGroup g);

enum class Grouping {
    ExecutionVsRest,  // E and R∪T (default)
    PerCategory,      // E, R, T
    All,              // E, R, T and R∪T
};

struct CategoryMeans {
    size_t layer = 0;
    std::string model_id;
    std::map<MeanGroup, std::vector<float>> means;
    std::map<MeanGroup, size_t> counts;
    std::array<size_t, 3> category_counts{};  // E, R, T of the source set
};

// Arithmetic mean per group, accumulated in double over entries sorted by
// (trace id, thought index), stored as float. Throws EmptyCategory when a
// requested group has no entries.
CategoryMeans compute_category_means(const RepresentationSet & set, Grouping grouping = Grouping::ExecutionVsRest);

enum class SteeringFormula { EMinusRT, EMinusR, EMinusT, RTMinusE };
std::string_view to_string(SteeringFormula f);           // "E_minus_RT", ...
std::string_view cli_name(SteeringFormula f);            // "e-minus-rt", ...
SteeringFormula steering_formula_from_string(std::string_view s);  // accepts both spellings
Grouping grouping_for(SteeringFormula f);

struct SteeringVector {
    std::vector<float> values;
    size_t layer = 0;
    std::string model_id;
    SteeringFormula formula = SteeringFormula::EMinusRT;
    std::array<size_t, 3> category_counts{};  // N_E, N_R, N_T
    std::string dataset;
    std::string created;  // ISO-8601 UTC

    size_t d_model() const { return values.size(); }
};

// Throws MissingMean when the formula's operands are absent.
SteeringVector compute_steering_vector(const CategoryMeans & means, SteeringFormula formula = SteeringFormula::EMinusRT);

// "SEALVEC1", u32 metadata length, JSON metadata, d_model float32, CRC32 of
// everything before it. Load throws BadMagic / ChecksumMismatch.
std::vector<uint8_t> encode_vector(const SteeringVector & v);
SteeringVector decode_vector(std::span<const uint8_t> bytes);
void save_vector(const std::string & path, const SteeringVector & v);
SteeringVector load_vector(const std::string & path);

// Throws DimensionMismatch / LayerOutOfRange against a backend.
void check_compatible(const SteeringVector & v, const BackendCapabilities & caps);

std::string utc_timestamp();

} // namespace seal
