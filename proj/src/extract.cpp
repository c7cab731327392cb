#include "seal/extract.hpp"

#include "seal/bytes.hpp"
#include "seal/errors.hpp"
#include "seal/kernels.hpp"
#include "seal/random.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <ctime>
#include <iostream>
#include <numeric>

namespace seal {

namespace {

constexpr std::string_view kRepMagic = "SEALREP1";
constexpr std::string_view kVecMagic = "SEALVEC1";

size_t category_slot(Category c) {
    switch (c) {
        case Category::Execution:  return 0;
        case Category::Reflection: return 1;
        case Category::Transition: return 2;
        default: break;
    }
    throw InvalidConfig("representation entries must be execution, reflection or transition");
}

} // namespace

std::array<size_t, 3> RepresentationSet::category_counts() const {
    std::array<size_t, 3> n{};
    for (const auto & e : entries) {
        ++n[category_slot(e.category)];
    }
    return n;
}

// ---------------------------------------------------------------------------
// representation file

void save_representations(const std::string & path, const RepresentationSet & set) {
    const nlohmann::json meta = {{"model_id", set.model_id},
                                 {"layer", set.layer},
                                 {"d_model", set.d_model},
                                 {"count", set.entries.size()}};
    const std::string m = meta.dump();
    std::vector<uint8_t> out(kRepMagic.begin(), kRepMagic.end());
    bytes::put_u32(out, static_cast<uint32_t>(m.size()));
    out.insert(out.end(), m.begin(), m.end());
    for (const auto & e : set.entries) {
        if (e.vector.size() != set.d_model) {
            throw DimensionMismatch("representation entry width differs from d_model");
        }
        out.push_back(static_cast<uint8_t>(category_slot(e.category)));
        bytes::put_u32(out, static_cast<uint32_t>(e.trace_id));
        bytes::put_u32(out, static_cast<uint32_t>(e.thought_index));
        bytes::put_floats(out, e.vector);
    }
    bytes::put_u32(out, bytes::crc32(out));
    bytes::write_file(path, out);
}

RepresentationSet load_representations(const std::string & path) {
    const auto in = bytes::read_file(path);
    const size_t mlen = kRepMagic.size();
    if (in.size() < mlen + 8 || std::memcmp(in.data(), kRepMagic.data(), mlen) != 0) {
        throw BadMagic(path + " is not a SEALREP1 file");
    }
    const std::span<const uint8_t> all(in);
    if (bytes::crc32(all.first(in.size() - 4)) != bytes::get_u32(all, in.size() - 4)) {
        throw ChecksumMismatch(path + ": CRC32 mismatch");
    }
    const uint32_t hlen = bytes::get_u32(all, mlen);
    if (mlen + 4 + hlen > in.size() - 4) {
        throw ChecksumMismatch(path + ": metadata overruns file");
    }
    const auto meta = nlohmann::json::parse(in.begin() + static_cast<std::ptrdiff_t>(mlen + 4),
                                            in.begin() + static_cast<std::ptrdiff_t>(mlen + 4 + hlen));
    RepresentationSet set;
    set.model_id = meta.value("model_id", "");
    set.layer = meta.at("layer").get<size_t>();
    set.d_model = meta.at("d_model").get<size_t>();
    const size_t count = meta.at("count").get<size_t>();
    const size_t rec = 9 + 4 * set.d_model;
    size_t off = mlen + 4 + hlen;
    if (off + count * rec != in.size() - 4) {
        throw ChecksumMismatch(path + ": entry payload size mismatch");
    }
    static constexpr Category kSlots[3] = {Category::Execution, Category::Reflection, Category::Transition};
    for (size_t i = 0; i < count; ++i, off += rec) {
        RepresentationEntry e;
        if (in[off] > 2) {
            throw ParseError(path + ": bad category byte");
        }
        e.category = kSlots[in[off]];
        e.trace_id = bytes::get_u32(all, off + 1);
        e.thought_index = bytes::get_u32(all, off + 5);
        e.vector.resize(set.d_model);
        bytes::get_floats(all, off + 9, e.vector);
        set.entries.push_back(std::move(e));
    }
    return set;
}

// ---------------------------------------------------------------------------
// collection

std::vector<size_t> select_samples(size_t available, size_t n, uint64_t seed) {
    std::vector<size_t> idx(available);
    std::iota(idx.begin(), idx.end(), size_t{0});
    Rng rng(seed);
    rng.shuffle(idx.begin(), idx.end());
    idx.resize(std::min(n, available));
    return idx;
}

CollectResult collect_representations(Backend & backend, const std::vector<std::string> & prompts, size_t layer,
                                      const ClassificationRules & rules, const CollectOptions & options) {
    if (prompts.empty()) {
        throw EmptyInput("no prompts to collect from");
    }
    const auto caps = backend.capabilities();
    if (layer >= caps.n_layers) {
        throw LayerOutOfRange("layer " + std::to_string(layer) + " >= n_layers " + std::to_string(caps.n_layers));
    }

    struct Slot {
        std::optional<GenerationResult> result;
        std::string error;
    };
    std::vector<Slot> slots(prompts.size());
    const auto n = static_cast<std::ptrdiff_t>(prompts.size());
    #pragma omp parallel for schedule(dynamic, 1) num_threads(static_cast<int>(std::max<size_t>(1, options.jobs)))
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        GenerationConfig cfg = options.generation;
        cfg.tap_layer = layer;
        cfg.intervention.reset();
        if (options.derive_seeds) {
            cfg.sampling.seed = options.generation.sampling.seed + static_cast<uint64_t>(i);
        }
        try {
            slots[i].result = backend.generate(prompts[i], cfg);
        } catch (const std::exception & e) {
            slots[i].error = e.what();
        }
    }

    CollectResult out;
    out.representations.model_id = caps.model_id;
    out.representations.layer = layer;
    out.representations.d_model = caps.d_model;
    for (size_t i = 0; i < slots.size(); ++i) {
        if (!slots[i].result) {
            std::cerr << "warning: sample " << i << " skipped: " << slots[i].error << '\n';
            ++out.failed_samples;
            continue;
        }
        const GenerationResult & r = *slots[i].result;
        ReasoningTrace trace;
        try {
            trace = classify_trace(trace_from_result(prompts[i], r, caps.model_id), rules);
        } catch (const AlignmentError & e) {
            std::cerr << "warning: sample " << i << " skipped: " << e.what() << '\n';
            ++out.failed_samples;
            continue;
        }
        const size_t trace_id = out.traces.size();
        for (const auto & th : trace.thoughts) {
            if (!th.has_boundary()) {
                continue;
            }
            const auto it = std::find_if(r.taps.begin(), r.taps.end(), [&](const HiddenTap & t) {
                return t.token_position == th.tap_position() && t.layer == layer;
            });
            if (it == r.taps.end()) {
                ++out.boundaries_without_tap;
                continue;
            }
            out.representations.entries.push_back({th.category, it->vector, trace_id, th.index});
        }
        out.traces.push_back(std::move(trace));
    }
    if (out.boundaries_without_tap > 0) {
        std::cerr << "warning: " << out.boundaries_without_tap
                  << " boundaries had no newline-only tap token and were not collected\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// means and steering vector

std::string_view to_string(MeanGroup g) {
    switch (g) {
        case MeanGroup::Execution:            return "E";
        case MeanGroup::Reflection:           return "R";
        case MeanGroup::Transition:           return "T";
        case MeanGroup::ReflectionTransition: return "RT";
    }
    return "?";
}

CategoryMeans compute_category_means(const RepresentationSet & set, Grouping grouping) {
    const size_t d = set.d_model;
    std::vector<const RepresentationEntry *> sorted;
    sorted.reserve(set.entries.size());
    for (const auto & e : set.entries) {
        if (e.vector.size() != d) {
            throw DimensionMismatch("representation entry width differs from d_model");
        }
        sorted.push_back(&e);
    }
    std::sort(sorted.begin(), sorted.end(), [](const RepresentationEntry * a, const RepresentationEntry * b) {
        return std::tie(a->trace_id, a->thought_index, a->category) < std::tie(b->trace_id, b->thought_index, b->category);
    });

    std::vector<MeanGroup> groups;
    switch (grouping) {
        case Grouping::ExecutionVsRest:
            groups = {MeanGroup::Execution, MeanGroup::ReflectionTransition};
            break;
        case Grouping::PerCategory:
            groups = {MeanGroup::Execution, MeanGroup::Reflection, MeanGroup::Transition};
            break;
        case Grouping::All:
            groups = {MeanGroup::Execution, MeanGroup::Reflection, MeanGroup::Transition,
                      MeanGroup::ReflectionTransition};
            break;
    }

    auto member = [](MeanGroup g, Category c) {
        switch (g) {
            case MeanGroup::Execution:            return c == Category::Execution;
            case MeanGroup::Reflection:           return c == Category::Reflection;
            case MeanGroup::Transition:           return c == Category::Transition;
            case MeanGroup::ReflectionTransition: return c == Category::Reflection || c == Category::Transition;
        }
        return false;
    };

    CategoryMeans out;
    out.layer = set.layer;
    out.model_id = set.model_id;
    out.category_counts = set.category_counts();
    for (MeanGroup g : groups) {
        std::vector<float> rows;
        size_t count = 0;
        for (const auto * e : sorted) {
            if (member(g, e->category)) {
                rows.insert(rows.end(), e->vector.begin(), e->vector.end());
                ++count;
            }
        }
        if (count == 0) {
            throw EmptyCategory("no representations in group " + std::string(to_string(g)));
        }
        std::vector<double> sums(d);
        kernels::parallel::column_sums(rows.data(), sums.data(), count, d);
        std::vector<float> mean(d);
        for (size_t k = 0; k < d; ++k) {
            mean[k] = static_cast<float>(sums[k] / static_cast<double>(count));
        }
        out.means[g] = std::move(mean);
        out.counts[g] = count;
    }
    return out;
}

std::string_view to_string(SteeringFormula f) {
    switch (f) {
        case SteeringFormula::EMinusRT: return "E_minus_RT";
        case SteeringFormula::EMinusR:  return "E_minus_R";
        case SteeringFormula::EMinusT:  return "E_minus_T";
        case SteeringFormula::RTMinusE: return "RT_minus_E";
    }
    return "?";
}

std::string_view cli_name(SteeringFormula f) {
    switch (f) {
        case SteeringFormula::EMinusRT: return "e-minus-rt";
        case SteeringFormula::EMinusR:  return "e-minus-r";
        case SteeringFormula::EMinusT:  return "e-minus-t";
        case SteeringFormula::RTMinusE: return "rt-minus-e";
    }
    return "?";
}

SteeringFormula steering_formula_from_string(std::string_view s) {
    for (auto f : {SteeringFormula::EMinusRT, SteeringFormula::EMinusR, SteeringFormula::EMinusT,
                   SteeringFormula::RTMinusE}) {
        if (s == to_string(f) || s == cli_name(f)) {
            return f;
        }
    }
    throw InvalidConfig("unknown steering formula '" + std::string(s) + "'");
}

Grouping grouping_for(SteeringFormula f) {
    return (f == SteeringFormula::EMinusR || f == SteeringFormula::EMinusT) ? Grouping::PerCategory
                                                                            : Grouping::ExecutionVsRest;
}

SteeringVector compute_steering_vector(const CategoryMeans & means, SteeringFormula formula) {
    MeanGroup plus = MeanGroup::Execution, minus = MeanGroup::ReflectionTransition;
    switch (formula) {
        case SteeringFormula::EMinusRT: break;
        case SteeringFormula::EMinusR:  minus = MeanGroup::Reflection; break;
        case SteeringFormula::EMinusT:  minus = MeanGroup::Transition; break;
        case SteeringFormula::RTMinusE: std::swap(plus, minus); break;
    }
    const auto a = means.means.find(plus);
    const auto b = means.means.find(minus);
    if (a == means.means.end() || b == means.means.end()) {
        throw MissingMean(std::string(to_string(formula)) + " needs means for " + std::string(to_string(plus)) +
                          " and " + std::string(to_string(minus)));
    }
    if (a->second.size() != b->second.size()) {
        throw DimensionMismatch("category means differ in width");
    }
    SteeringVector v;
    v.values.resize(a->second.size());
    for (size_t k = 0; k < v.values.size(); ++k) {
        v.values[k] = a->second[k] - b->second[k];
    }
    v.layer = means.layer;
    v.model_id = means.model_id;
    v.formula = formula;
    v.category_counts = means.category_counts;
    v.created = utc_timestamp();
    return v;
}

// ---------------------------------------------------------------------------
// vector file

std::vector<uint8_t> encode_vector(const SteeringVector & v) {
    const nlohmann::json meta = {
        {"model_id", v.model_id},
        {"layer", v.layer},
        {"d_model", v.values.size()},
        {"formula", to_string(v.formula)},
        {"category_counts", {{"E", v.category_counts[0]}, {"R", v.category_counts[1]}, {"T", v.category_counts[2]}}},
        {"dataset", v.dataset},
        {"created", v.created},
    };
    const std::string m = meta.dump();
    std::vector<uint8_t> out(kVecMagic.begin(), kVecMagic.end());
    bytes::put_u32(out, static_cast<uint32_t>(m.size()));
    out.insert(out.end(), m.begin(), m.end());
    bytes::put_floats(out, v.values);
    bytes::put_u32(out, bytes::crc32(out));
    return out;
}

SteeringVector decode_vector(std::span<const uint8_t> in) {
    const size_t mlen = kVecMagic.size();
    if (in.size() < mlen || std::memcmp(in.data(), kVecMagic.data(), mlen) != 0) {
        throw BadMagic("not a SEALVEC1 file");
    }
    if (in.size() < mlen + 8) {
        throw ChecksumMismatch("SEALVEC1 file truncated");
    }
    if (bytes::crc32(in.first(in.size() - 4)) != bytes::get_u32(in, in.size() - 4)) {
        throw ChecksumMismatch("SEALVEC1 CRC32 mismatch");
    }
    const uint32_t hlen = bytes::get_u32(in, mlen);
    if (mlen + 4 + hlen > in.size() - 4) {
        throw ChecksumMismatch("SEALVEC1 metadata overruns file");
    }
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(in.begin() + static_cast<std::ptrdiff_t>(mlen + 4),
                                     in.begin() + static_cast<std::ptrdiff_t>(mlen + 4 + hlen));
    } catch (const nlohmann::json::exception & e) {
        throw ParseError(std::string("SEALVEC1 metadata: ") + e.what());
    }
    SteeringVector v;
    const size_t d = meta.at("d_model").get<size_t>();
    const size_t off = mlen + 4 + hlen;
    if (off + 4 * d != in.size() - 4) {
        throw ChecksumMismatch("SEALVEC1 payload size does not match d_model");
    }
    v.values.resize(d);
    bytes::get_floats(in, off, v.values);
    v.model_id = meta.value("model_id", "");
    v.layer = meta.at("layer").get<size_t>();
    v.formula = steering_formula_from_string(meta.value("formula", "E_minus_RT"));
    const auto & cc = meta.at("category_counts");
    v.category_counts = {cc.value("E", size_t{0}), cc.value("R", size_t{0}), cc.value("T", size_t{0})};
    v.dataset = meta.value("dataset", "");
    v.created = meta.value("created", "");
    return v;
}

void save_vector(const std::string & path, const SteeringVector & v) {
    bytes::write_file(path, encode_vector(v));
}

SteeringVector load_vector(const std::string & path) {
    return decode_vector(bytes::read_file(path));
}

void check_compatible(const SteeringVector & v, const BackendCapabilities & caps) {
    if (v.d_model() != caps.d_model) {
        throw DimensionMismatch("steering vector d_model " + std::to_string(v.d_model()) + " vs backend d_model " +
                                std::to_string(caps.d_model));
    }
    if (v.layer >= caps.n_layers) {
        throw LayerOutOfRange("steering vector layer " + std::to_string(v.layer) + " >= n_layers " +
                              std::to_string(caps.n_layers));
    }
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace seal
