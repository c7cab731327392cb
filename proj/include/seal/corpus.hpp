#pragma once

// Synthetic thought corpus for the tiny backend: running-sum word problems
// whose solutions interleave execution steps with reflection and transition
// thoughts.

#include "seal/trace.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace seal {

struct CorpusConfig {
    uint64_t seed = 1234;
    size_t n_samples = 1000;
    // target shares of execution/reflection/transition over all thoughts
    std::array<double, 3> frequencies{0.70, 0.20, 0.10};
    // probability that a middle thought repeats the previous category
    double stickiness = 0.6;
    // share of reflection/transition thoughts written without the prefix keyword
    double reworded_fraction = 0.25;
    size_t min_thoughts = 3;
    size_t max_thoughts = 10;
};

struct CorpusSample {
    std::string prompt;   // ends with "\n\n"
    std::string output;   // thoughts joined by "\n\n"
    std::vector<Category> labels;
    std::vector<int> operands;
    int answer = 0;
};

// Reflection and transition thoughts only appear before the last addition.
// Throws InvalidConfig when the requested shares cannot be met with the
// opening step, the last addition and the answer all being execution.
std::vector<CorpusSample> gen_corpus(const CorpusConfig & config);

// Problem prompt for a list of operands, as it appears in the corpus.
std::string problem_prompt(const std::vector<int> & operands);

// prompt + output per sample
std::vector<std::string> corpus_texts(const std::vector<CorpusSample> & samples);

} // namespace seal
