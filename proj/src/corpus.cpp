#include "seal/corpus.hpp"

#include "seal/errors.hpp"
#include "seal/random.hpp"

#include <algorithm>
#include <numeric>

namespace seal {

namespace {

std::string reflection_text(Rng & rng, int total, bool reworded) {
    const std::string x = std::to_string(total);
    if (reworded) {
        switch (rng.uniform_int(0, 1)) {
            case 0:  return "Let me check the total " + x + " again.";
            default: return "Hold on, make sure the sum " + x + " is right.";
        }
    }
    switch (rng.uniform_int(0, 2)) {
        case 0:  return "Wait, let me verify the total " + x + ".";
        case 1:  return "Wait, is the sum " + x + " correct?";
        default: return "Wait, the total " + x + " seems right.";
    }
}

std::string transition_text(Rng & rng, int total, bool reworded) {
    const std::string x = std::to_string(total);
    if (reworded) {
        switch (rng.uniform_int(0, 1)) {
            case 0:  return "Maybe there is another way to reach " + x + ".";
            default: return "Let us try another approach from " + x + ".";
        }
    }
    switch (rng.uniform_int(0, 1)) {
        case 0:  return "Alternatively, we could add the numbers in another order.";
        default: return "Alternatively, count up from the total " + x + ".";
    }
}

size_t draw(Rng & rng, const std::array<double, 3> & p) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (size_t i = 0; i < 2; ++i) {
        acc += p[i];
        if (u < acc) {
            return i;
        }
    }
    return 2;
}

} // namespace

std::string problem_prompt(const std::vector<int> & operands) {
    std::string p = "Problem: add ";
    for (size_t i = 0; i < operands.size(); ++i) {
        if (i > 0) {
            p += (i + 1 == operands.size()) ? " and " : ", ";
        }
        p += std::to_string(operands[i]);
    }
    return p + ".\n\n";
}

std::vector<CorpusSample> gen_corpus(const CorpusConfig & config) {
    if (config.min_thoughts < 3 || config.max_thoughts < config.min_thoughts) {
        throw InvalidConfig("thought count range must satisfy 3 <= min <= max");
    }
    const double f_sum = config.frequencies[0] + config.frequencies[1] + config.frequencies[2];
    if (!(f_sum > 0.0)) {
        throw InvalidConfig("category frequencies must be positive");
    }
    // The opening step, the last addition and the answer are always
    // execution; the remaining middle thoughts use adjusted shares so the
    // overall expected shares match the request.
    const double mean_n = 0.5 * static_cast<double>(config.min_thoughts + config.max_thoughts);
    const double mean_free = mean_n - 3.0;
    std::array<double, 3> mid{};
    if (mean_free > 0.0) {
        mid[0] = (config.frequencies[0] / f_sum * mean_n - 3.0) / mean_free;
        mid[1] = config.frequencies[1] / f_sum * mean_n / mean_free;
        mid[2] = config.frequencies[2] / f_sum * mean_n / mean_free;
    } else {
        mid[0] = 1.0;
    }
    if (mid[0] < 0.0 || mid[0] > 1.0) {
        throw InvalidConfig("execution share too low for the configured thought count range");
    }

    Rng rng(config.seed);
    std::vector<CorpusSample> samples;
    samples.reserve(config.n_samples);
    for (size_t s = 0; s < config.n_samples; ++s) {
        const auto n = static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(config.min_thoughts),
                                                           static_cast<int64_t>(config.max_thoughts)));
        std::vector<size_t> middle;
        for (size_t i = 0; i + 3 < n; ++i) {
            if (i > 0 && rng.uniform() < config.stickiness) {
                middle.push_back(middle.back());
            } else {
                middle.push_back(draw(rng, mid));
            }
        }
        middle.push_back(0);
        const size_t k = 1 + static_cast<size_t>(std::count(middle.begin(), middle.end(), size_t{0}));

        CorpusSample sample;
        for (size_t i = 0; i < k; ++i) {
            sample.operands.push_back(static_cast<int>(rng.uniform_int(1, 9)));
        }
        sample.prompt = problem_prompt(sample.operands);

        std::vector<std::string> thoughts;
        int total = sample.operands[0];
        size_t next = 1;
        thoughts.push_back("Start with " + std::to_string(total) + ".");
        sample.labels.push_back(Category::Execution);
        for (size_t c : middle) {
            if (c == 0) {
                const int a = sample.operands[next++];
                total += a;
                thoughts.push_back("Add " + std::to_string(a) + " to get " + std::to_string(total) + ".");
                sample.labels.push_back(Category::Execution);
            } else {
                const bool reworded = rng.uniform() < config.reworded_fraction;
                thoughts.push_back(c == 1 ? reflection_text(rng, total, reworded)
                                          : transition_text(rng, total, reworded));
                sample.labels.push_back(c == 1 ? Category::Reflection : Category::Transition);
            }
        }
        thoughts.push_back("So the answer is \\boxed{" + std::to_string(total) + "}.");
        sample.labels.push_back(Category::Execution);
        sample.answer = total;

        for (size_t i = 0; i < thoughts.size(); ++i) {
            if (i > 0) {
                sample.output += kThoughtDelimiter;
            }
            sample.output += thoughts[i];
        }
        samples.push_back(std::move(sample));
    }
    return samples;
}

std::vector<std::string> corpus_texts(const std::vector<CorpusSample> & samples) {
    std::vector<std::string> out;
    out.reserve(samples.size());
    for (const auto & s : samples) {
        out.push_back(s.prompt + s.output);
    }
    return out;
}

} // namespace seal
