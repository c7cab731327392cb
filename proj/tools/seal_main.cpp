#include "seal/analyze.hpp"
#include "seal/bytes.hpp"
#include "seal/classify.hpp"
#include "seal/corpus.hpp"
#include "seal/errors.hpp"
#include "seal/eval.hpp"
#include "seal/extract.hpp"
#include "seal/sidecar.hpp"
#include "seal/steer.hpp"
#include "seal/tiny_backend.hpp"
#include "seal/train.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace seal;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitBackend = 3;

// Flag value if given, else the command's config section, else the
// top-level config, else the built-in default.
class Settings {
public:
    void load(const std::string & path, const std::string & section) {
        if (path.empty()) {
            return;
        }
        std::ifstream in(path);
        if (!in) {
            throw InvalidConfig("cannot open config '" + path + "'");
        }
        try {
            root_ = json::parse(in);
        } catch (const json::exception & e) {
            throw ParseError("config '" + path + "': " + e.what());
        }
        if (!root_.is_object()) {
            throw InvalidConfig("config must be a JSON object");
        }
        if (root_.contains(section)) {
            section_ = root_[section];
        }
    }

    const json * find(const std::string & key) const {
        if (section_.is_object() && section_.contains(key)) {
            return &section_[key];
        }
        if (root_.is_object() && root_.contains(key)) {
            return &root_[key];
        }
        return nullptr;
    }

    template <typename T>
    void resolve(T & value, const CLI::Option * flag, const std::string & key) const {
        if (flag && flag->count() > 0) {
            return;
        }
        if (const json * v = find(key)) {
            try {
                value = v->get<T>();
            } catch (const json::exception & e) {
                throw InvalidConfig("config key '" + key + "': " + e.what());
            }
        }
    }

private:
    json root_;
    json section_;
};

struct BackendOptions {
    std::string backend = "tiny";
    uint64_t model_seed = 1234;
    std::string model_dir = default_model_dir();
    std::string sidecar = sidecar_address_from_env();
    CLI::Option * o_backend = nullptr;
    CLI::Option * o_model_seed = nullptr;
    CLI::Option * o_model_dir = nullptr;
    CLI::Option * o_sidecar = nullptr;

    void add(CLI::App * app) {
        o_backend = app->add_option("--backend", backend, "tiny | sidecar");
        o_model_seed = app->add_option("--model-seed", model_seed, "tiny checkpoint seed");
        o_model_dir = app->add_option("--model-dir", model_dir, "directory of tiny checkpoints");
        o_sidecar = app->add_option("--sidecar", sidecar, "tcp:host:port or stdio:<command> (default $SEAL_SIDECAR)");
    }
    void resolve(const Settings & s) {
        s.resolve(backend, o_backend, "backend");
        s.resolve(model_seed, o_model_seed, "model_seed");
        s.resolve(model_dir, o_model_dir, "model_dir");
        s.resolve(sidecar, o_sidecar, "sidecar");
    }
    std::unique_ptr<Backend> build() const {
        if (backend == "tiny") {
            return build_tiny_backend(model_seed, model_dir);
        }
        if (backend == "sidecar") {
            if (sidecar.empty()) {
                throw InvalidConfig("--backend sidecar needs --sidecar or SEAL_SIDECAR");
            }
            return std::make_unique<SidecarBackend>(sidecar);
        }
        throw InvalidConfig("unknown backend '" + backend + "'");
    }
};

struct SamplingOptions {
    double temperature = 0.0;  // 0 = greedy
    uint64_t seed = 0;
    size_t max_tokens = 256;
    CLI::Option * o_temperature = nullptr;
    CLI::Option * o_seed = nullptr;
    CLI::Option * o_max_tokens = nullptr;

    void add(CLI::App * app, double default_temperature) {
        temperature = default_temperature;
        o_temperature = app->add_option("--temperature", temperature, "sampling temperature, 0 for greedy");
        o_seed = app->add_option("--seed", seed, "sampling seed (per-item seed = seed + index)");
        o_max_tokens = app->add_option("--max-tokens", max_tokens, "generation budget per item");
    }
    void resolve(const Settings & s) {
        s.resolve(temperature, o_temperature, "temperature");
        s.resolve(seed, o_seed, "seed");
        s.resolve(max_tokens, o_max_tokens, "max_tokens");
    }
    GenerationConfig config() const {
        if (temperature < 0.0) {
            throw InvalidConfig("temperature must be >= 0");
        }
        GenerationConfig c;
        c.max_new_tokens = max_tokens;
        c.sampling.seed = seed;
        if (temperature > 0.0) {
            c.sampling.mode = SamplingMode::Temperature;
            c.sampling.temperature = temperature;
        }
        return c;
    }
};

std::vector<std::string> split_list(const std::string & s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ',')) {
        if (!part.empty()) {
            out.push_back(part);
        }
    }
    return out;
}

std::vector<size_t> parse_layers(const std::string & spec, size_t n_layers) {
    if (spec == "all") {
        std::vector<size_t> all(n_layers);
        for (size_t i = 0; i < n_layers; ++i) all[i] = i;
        return all;
    }
    std::vector<size_t> out;
    for (const auto & p : split_list(spec)) {
        try {
            out.push_back(static_cast<size_t>(std::stoul(p)));
        } catch (const std::exception &) {
            throw InvalidConfig("bad layer '" + p + "'");
        }
    }
    for (size_t l : out) {
        if (l >= n_layers) {
            throw LayerOutOfRange("layer " + std::to_string(l) + " >= n_layers " + std::to_string(n_layers));
        }
    }
    if (out.empty()) {
        throw InvalidConfig("no layers given");
    }
    return out;
}

std::string layer_path(const std::string & path, size_t layer, bool multi) {
    if (!multi) {
        return path;
    }
    fs::path p(path);
    return (p.parent_path() / (p.stem().string() + "_L" + std::to_string(layer) + p.extension().string())).string();
}

void ensure_parent(const std::string & path) {
    const fs::path parent = fs::path(path).parent_path();
    if (!parent.empty()) {
        fs::create_directories(parent);
    }
}

void write_text(const std::string & path, const std::string & text) {
    ensure_parent(path);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InvalidConfig("cannot write '" + path + "'");
    }
    out << text;
}

std::vector<BenchmarkItem> load_items(const std::string & path, const std::string & format, bool hard, size_t limit) {
    auto items = load_dataset(path, dataset_format_from_string(format));
    if (hard) {
        items = hard_subset(items);
    }
    if (limit > 0 && items.size() > limit) {
        items.resize(limit);
    }
    return items;
}

// ---------------------------------------------------------------------------

struct CollectCmd {
    BackendOptions backend;
    SamplingOptions sampling;
    std::string config, dataset, dataset_format = "auto", layers = "2", traces_out = "out/traces.jsonl",
                reps_out = "out/reps.bin", rules_path;
    size_t samples = 1000, jobs = 1;
    uint64_t selection_seed = 0;
    CLI::Option *o_dataset, *o_format, *o_layers, *o_traces, *o_reps, *o_rules, *o_samples, *o_jobs, *o_sel;

    void add(CLI::App & app) {
        auto * c = app.add_subcommand("collect", "generate traces and store boundary representations");
        c->add_option("--config", config, "JSON experiment config");
        backend.add(c);
        sampling.add(c, 1.0);
        o_dataset = c->add_option("--dataset", dataset, "JSONL problems");
        o_format = c->add_option("--format", dataset_format, "auto | math | gsm8k | code");
        o_layers = c->add_option("--layer", layers, "layer index, comma list or 'all'");
        o_traces = c->add_option("--traces", traces_out, "output traces JSONL");
        o_reps = c->add_option("--out", reps_out, "output representation file (suffixed _L<layer> for several)");
        o_rules = c->add_option("--rules", rules_path, "classification rules JSON");
        o_samples = c->add_option("--samples", samples, "sample cap (seeded shuffle)");
        o_jobs = c->add_option("--jobs", jobs, "parallel workers");
        o_sel = c->add_option("--selection-seed", selection_seed, "seed of the sample selection shuffle");
        c->callback([this] { run(); });
    }

    void run() {
        Settings s;
        s.load(config, "collect");
        backend.resolve(s);
        sampling.resolve(s);
        s.resolve(dataset, o_dataset, "dataset");
        s.resolve(dataset_format, o_format, "format");
        s.resolve(layers, o_layers, "layer");
        s.resolve(traces_out, o_traces, "traces");
        s.resolve(reps_out, o_reps, "out");
        s.resolve(rules_path, o_rules, "rules");
        s.resolve(samples, o_samples, "samples");
        s.resolve(jobs, o_jobs, "jobs");
        s.resolve(selection_seed, o_sel, "selection_seed");
        if (dataset.empty()) {
            throw InvalidConfig("--dataset is required");
        }
        const auto rules = load_rules(rules_path);
        const auto items = load_items(dataset, dataset_format, false, 0);
        std::vector<std::string> prompts;
        for (size_t i : select_samples(items.size(), samples, selection_seed)) {
            prompts.push_back(items[i].problem);
        }
        auto be = backend.build();
        const auto layer_list = parse_layers(layers, be->capabilities().n_layers);
        CollectOptions opts;
        opts.generation = sampling.config();
        opts.jobs = jobs;
        bool traces_written = false;
        for (size_t layer : layer_list) {
            CollectResult r = collect_representations(*be, prompts, layer, rules, opts);
            r.representations.layer = layer;
            const std::string path = layer_path(reps_out, layer, layer_list.size() > 1);
            ensure_parent(path);
            save_representations(path, r.representations);
            if (!traces_written) {
                ensure_parent(traces_out);
                write_traces(traces_out, r.traces);
                traces_written = true;
            }
            const auto c = r.representations.category_counts();
            std::cout << "layer " << layer << ": execution " << c[0] << ", reflection " << c[1] << ", transition "
                      << c[2] << " (" << r.traces.size() << " traces, " << r.failed_samples << " failed) -> " << path
                      << "\n";
        }
    }
};

struct ExtractCmd {
    std::string config, reps, out = "out/steering.vec", formula = "e-minus-rt", dataset_label;
    CLI::Option *o_reps, *o_out, *o_formula, *o_label;

    void add(CLI::App & app) {
        auto * c = app.add_subcommand("extract", "compute a steering vector from a representation file");
        c->add_option("--config", config, "JSON experiment config");
        o_reps = c->add_option("--reps", reps, "representation file from collect");
        o_out = c->add_option("--out", out, "output steering vector (SEALVEC1)");
        o_formula = c->add_option("--formula", formula, "e-minus-rt | e-minus-r | e-minus-t | rt-minus-e");
        o_label = c->add_option("--dataset-label", dataset_label, "dataset name stored in the vector metadata");
        c->callback([this] { run(); });
    }

    void run() {
        Settings s;
        s.load(config, "extract");
        s.resolve(reps, o_reps, "reps");
        s.resolve(out, o_out, "out");
        s.resolve(formula, o_formula, "formula");
        s.resolve(dataset_label, o_label, "dataset_label");
        if (reps.empty()) {
            throw InvalidConfig("--reps is required");
        }
        const auto f = steering_formula_from_string(formula);
        const auto set = load_representations(reps);
        auto v = compute_steering_vector(compute_category_means(set, grouping_for(f)), f);
        v.dataset = dataset_label.empty() ? fs::path(reps).filename().string() : dataset_label;
        v.created = utc_timestamp();
        ensure_parent(out);
        save_vector(out, v);
        double norm = 0.0;
        for (float x : v.values) norm += static_cast<double>(x) * x;
        std::cout << "formula " << to_string(f) << " layer " << v.layer << " d_model " << v.d_model() << " |S| "
                  << std::sqrt(norm) << " counts E=" << v.category_counts[0] << " R=" << v.category_counts[1]
                  << " T=" << v.category_counts[2] << " -> " << out << "\n";
    }
};

// Method arm options shared by generate and eval.
struct ArmOptions {
    std::string vector_path;
    double alpha = kDefaultAlpha;
    std::optional<size_t> layer;
    std::string scope = "all_newline_tokens";
    double bias = kDefaultPenaltyBias;
    std::string penalty_tokens = "Wait,wait,Alternatively,alternatively";
    CLI::Option *o_vector, *o_alpha, *o_layer, *o_scope, *o_bias, *o_tokens;

    void add(CLI::App * c) {
        o_vector = c->add_option("--vector", vector_path, "steering vector (SEALVEC1)");
        o_alpha = c->add_option("--alpha", alpha, "steering strength");
        o_layer = c->add_option("--layer", layer, "intervention layer (default: the vector's layer)");
        o_scope = c->add_option("--scope", scope, "all_newline_tokens | first_boundary_token_only");
        o_bias = c->add_option("--bias", bias, "logit penalty bias");
        o_tokens = c->add_option("--penalty-tokens", penalty_tokens, "comma-separated penalized strings");
    }
    void resolve(const Settings & s) {
        s.resolve(vector_path, o_vector, "vector");
        s.resolve(alpha, o_alpha, "alpha");
        if (!o_layer->count()) {
            if (const json * v = s.find("layer")) {
                layer = v->get<size_t>();
            }
        }
        s.resolve(scope, o_scope, "scope");
        s.resolve(bias, o_bias, "bias");
        s.resolve(penalty_tokens, o_tokens, "penalty_tokens");
    }
    MethodSpec spec(Method m, const SteeringVector * v) const {
        MethodSpec ms;
        ms.method = m;
        if (m == Method::Seal) {
            if (!v) {
                throw InvalidConfig("the seal method needs --vector");
            }
            SteerPolicy p;
            p.vector = *v;
            p.alpha = alpha;
            p.layer = layer.value_or(v->layer);
            p.boundary_scope = boundary_scope_from_string(scope);
            ms.policy = p;
        } else if (m == Method::LogitPenalty) {
            LogitPenalty lp;
            lp.tokens = split_list(penalty_tokens);
            lp.bias = bias;
            ms.penalty = lp;
        }
        return ms;
    }
};

struct GenerateCmd {
    BackendOptions backend;
    SamplingOptions sampling;
    ArmOptions arm;
    std::string config, prompt, method = "base", out;
    CLI::Option *o_prompt, *o_method, *o_out;

    void add(CLI::App & app) {
        auto * c = app.add_subcommand("generate", "generate one response, optionally steered or penalized");
        c->add_option("--config", config, "JSON experiment config");
        backend.add(c);
        sampling.add(c, 0.0);
        arm.add(c);
        o_prompt = c->add_option("--prompt", prompt, "prompt text");
        o_method = c->add_option("--method", method, "base | logit-penalty | seal");
        o_out = c->add_option("--out", out, "write the classified trace as JSON");
        c->callback([this] { run(); });
    }

    void run() {
        Settings s;
        s.load(config, "generate");
        backend.resolve(s);
        sampling.resolve(s);
        arm.resolve(s);
        s.resolve(prompt, o_prompt, "prompt");
        s.resolve(method, o_method, "method");
        s.resolve(out, o_out, "out");
        if (prompt.empty()) {
            throw InvalidConfig("--prompt is required");
        }
        // escaped newlines allow thought delimiters on the command line
        std::string p;
        for (size_t i = 0; i < prompt.size(); ++i) {
            if (prompt[i] == '\\' && i + 1 < prompt.size() && prompt[i + 1] == 'n') {
                p += '\n';
                ++i;
            } else {
                p += prompt[i];
            }
        }
        const Method m = method_from_string(method);
        std::optional<SteeringVector> v;
        if (!arm.vector_path.empty()) {
            v = load_vector(arm.vector_path);
        }
        auto be = backend.build();
        const MethodSpec ms = arm.spec(m, v ? &*v : nullptr);
        GenerationConfig cfg = sampling.config();
        GenerationResult r;
        if (m == Method::Seal) {
            r = steered_generate(*be, p, *ms.policy, cfg);
        } else if (m == Method::LogitPenalty) {
            r = logit_penalty_generate(*be, p, *ms.penalty, cfg);
        } else {
            r = be->generate(p, cfg);
        }
        const auto trace = classify_trace(trace_from_result(p, r, be->capabilities().model_id), ClassificationRules::defaults());
        std::cout << r.text << "\n";
        std::cerr << "[" << r.tokens_generated << " tokens, finish " << r.finish_reason << ", " << trace.thoughts.size()
                  << " thoughts";
        if (m == Method::Seal) {
            std::cerr << ", " << r.steered_positions << " steered";
        }
        std::cerr << "]\n";
        if (!out.empty()) {
            write_text(out, to_json(trace).dump(2) + "\n");
        }
    }
};

std::string fmt(double v, int prec = 1) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(prec) << v;
    return os.str();
}

void print_summary_table(const std::vector<BenchmarkSummary> & rows) {
    std::cout << std::left << std::setw(16) << "method" << std::right << std::setw(10) << "acc@1" << std::setw(12)
              << "#tokens" << std::setw(8) << "E" << std::setw(8) << "R" << std::setw(8) << "T" << std::setw(8)
              << "failed" << "\n";
    for (const auto & r : rows) {
        std::cout << std::left << std::setw(16) << r.method << std::right << std::setw(10) << fmt(r.accuracy)
                  << std::setw(12) << fmt(r.mean_tokens) << std::setw(8) << fmt(r.mean_thoughts[0], 2)
                  << std::setw(8) << fmt(r.mean_thoughts[1], 2) << std::setw(8) << fmt(r.mean_thoughts[2], 2)
                  << std::setw(8) << r.n_failed << "\n";
    }
}

struct EvalCmd {
    BackendOptions backend;
    SamplingOptions sampling;
    ArmOptions arm;
    std::string config, dataset, dataset_format = "auto", methods = "base,logit-penalty,seal", out_dir = "out/eval";
    bool hard = false;
    size_t limit = 0, jobs = 1;
    CLI::Option *o_dataset, *o_format, *o_methods, *o_out, *o_hard, *o_limit, *o_jobs;

    void add(CLI::App & app) {
        auto * c = app.add_subcommand("eval", "run base / logit-penalty / seal arms on a benchmark");
        c->add_option("--config", config, "JSON experiment config");
        backend.add(c);
        sampling.add(c, 0.0);
        arm.add(c);
        o_dataset = c->add_option("--dataset", dataset, "benchmark JSONL");
        o_format = c->add_option("--format", dataset_format, "auto | math | gsm8k | code");
        o_methods = c->add_option("--method", methods, "comma list of base, logit-penalty, seal");
        o_out = c->add_option("--out-dir", out_dir, "directory for records and summaries");
        o_hard = c->add_flag("--hard", hard, "keep difficulty 4-5 only");
        o_limit = c->add_option("--limit", limit, "first N items (0 = all)");
        o_jobs = c->add_option("--jobs", jobs, "parallel workers");
        c->callback([this] { run(); });
    }

    void run() {
        Settings s;
        s.load(config, "eval");
        backend.resolve(s);
        sampling.resolve(s);
        arm.resolve(s);
        s.resolve(dataset, o_dataset, "dataset");
        s.resolve(dataset_format, o_format, "format");
        s.resolve(methods, o_methods, "method");
        s.resolve(out_dir, o_out, "out_dir");
        s.resolve(hard, o_hard, "hard");
        s.resolve(limit, o_limit, "limit");
        s.resolve(jobs, o_jobs, "jobs");
        if (dataset.empty()) {
            throw InvalidConfig("--dataset is required");
        }
        const auto items = load_items(dataset, dataset_format, hard, limit);
        std::vector<Method> arms;
        for (const auto & m : split_list(methods)) {
            arms.push_back(method_from_string(m));
        }
        if (arms.empty()) {
            throw InvalidConfig("no methods requested");
        }
        std::optional<SteeringVector> v;
        if (!arm.vector_path.empty()) {
            v = load_vector(arm.vector_path);
        }
        auto be = backend.build();
        RunOptions ro;
        ro.jobs = jobs;
        fs::create_directories(out_dir);

        std::vector<BenchmarkSummary> rows;
        std::optional<BenchmarkRun> base_run;
        json summary = json::array();
        std::string csv = summary_csv_header() + "\n";
        size_t successes = 0;
        json efficiency = json::object();
        for (Method m : arms) {
            const MethodSpec ms = arm.spec(m, v ? &*v : nullptr);
            BenchmarkRun run = run_benchmark(*be, items, ms, sampling.config(), ro);
            write_records((fs::path(out_dir) / ("records_" + ms.name() + ".jsonl")).string(), run.records);
            successes += run.summary.n_items - run.summary.n_failed;
            summary.push_back(run.summary.to_json());
            csv += summary_csv_row(run.summary) + "\n";
            rows.push_back(run.summary);
            if (m == Method::Base) {
                base_run = std::move(run);
            } else if (base_run) {
                efficiency[ms.name()] = efficiency_report(base_run->records, run.records).to_json();
            }
        }
        write_text((fs::path(out_dir) / "summary.json").string(), summary.dump(2) + "\n");
        write_text((fs::path(out_dir) / "summary.csv").string(), csv);
        if (!efficiency.empty()) {
            write_text((fs::path(out_dir) / "efficiency.json").string(), efficiency.dump(2) + "\n");
        }
        print_summary_table(rows);
        for (const auto & r : rows) {
            for (const auto & b : r.length_breakdown) {
                std::cout << "  " << r.method << " " << b.group << ": n=" << b.n << " mean tokens "
                          << fmt(b.mean_tokens) << "\n";
            }
        }
        if (successes == 0 && !items.empty()) {
            throw BackendError("no item completed successfully");
        }
    }
};

struct AblateCmd {
    BackendOptions backend;
    SamplingOptions sampling;
    std::string config, sweep, dataset, eval_dataset, dataset_format = "auto", layers = "all",
                alphas = "0,0.5,1.0,1.5,2.0", formulas = "e-minus-rt,e-minus-r,e-minus-t,rt-minus-e", out = "out/ablate.csv";
    size_t layer = 2, samples = 1000, limit = 0, jobs = 1;
    double alpha = kDefaultAlpha, collect_temperature = 1.0;
    uint64_t collect_seed = 0;
    CLI::Option *o_sweep, *o_dataset, *o_eval_dataset, *o_format, *o_layers, *o_alphas, *o_formulas, *o_out, *o_layer,
        *o_samples, *o_limit, *o_jobs, *o_alpha, *o_ctemp, *o_cseed;

    void add(CLI::App & app) {
        auto * c = app.add_subcommand("ablate", "sweep layer, alpha, vector type or classification criteria");
        c->add_option("--config", config, "JSON experiment config");
        backend.add(c);
        sampling.add(c, 0.0);
        o_sweep = c->add_option("--sweep", sweep, "layer | alpha | type | criteria");
        o_dataset = c->add_option("--dataset", dataset, "JSONL problems used for vector extraction");
        o_eval_dataset = c->add_option("--eval-dataset", eval_dataset, "JSONL problems for evaluation (default --dataset)");
        o_format = c->add_option("--format", dataset_format, "auto | math | gsm8k | code");
        o_layers = c->add_option("--layers", layers, "layer grid, comma list or 'all'");
        o_alphas = c->add_option("--alphas", alphas, "alpha grid");
        o_formulas = c->add_option("--formulas", formulas, "formula grid");
        o_out = c->add_option("--out", out, "output CSV");
        o_layer = c->add_option("--layer", layer, "fixed layer for non-layer sweeps");
        o_alpha = c->add_option("--alpha", alpha, "fixed alpha for non-alpha sweeps");
        o_samples = c->add_option("--samples", samples, "extraction sample cap");
        o_limit = c->add_option("--limit", limit, "evaluation items (0 = all)");
        o_jobs = c->add_option("--jobs", jobs, "parallel workers");
        o_ctemp = c->add_option("--collect-temperature", collect_temperature, "sampling temperature for extraction");
        o_cseed = c->add_option("--collect-seed", collect_seed, "sampling seed for extraction");
        c->callback([this] { run(); });
    }

    struct Point {
        std::string value;
        size_t layer;
        double alpha;
        SteeringFormula formula;
        ClassificationRules rules;
        std::string rules_name;
    };

    void run() {
        Settings s;
        s.load(config, "ablate");
        backend.resolve(s);
        sampling.resolve(s);
        s.resolve(sweep, o_sweep, "sweep");
        s.resolve(dataset, o_dataset, "dataset");
        s.resolve(eval_dataset, o_eval_dataset, "eval_dataset");
        s.resolve(dataset_format, o_format, "format");
        s.resolve(layers, o_layers, "layers");
        s.resolve(alphas, o_alphas, "alphas");
        s.resolve(formulas, o_formulas, "formulas");
        s.resolve(out, o_out, "out");
        s.resolve(layer, o_layer, "layer");
        s.resolve(alpha, o_alpha, "alpha");
        s.resolve(samples, o_samples, "samples");
        s.resolve(limit, o_limit, "limit");
        s.resolve(jobs, o_jobs, "jobs");
        s.resolve(collect_temperature, o_ctemp, "collect_temperature");
        s.resolve(collect_seed, o_cseed, "collect_seed");
        if (dataset.empty()) {
            throw InvalidConfig("--dataset is required");
        }
        auto be = backend.build();
        const size_t n_layers = be->capabilities().n_layers;
        const auto defaults = ClassificationRules::defaults();

        std::vector<Point> grid;
        if (sweep == "layer") {
            for (size_t l : parse_layers(layers, n_layers)) {
                grid.push_back({std::to_string(l), l, alpha, SteeringFormula::EMinusRT, defaults, "default"});
            }
        } else if (sweep == "alpha") {
            for (const auto & a : split_list(alphas)) {
                grid.push_back({a, layer, std::stod(a), SteeringFormula::EMinusRT, defaults, "default"});
            }
        } else if (sweep == "type") {
            for (const auto & f : split_list(formulas)) {
                const auto formula = steering_formula_from_string(f);
                grid.push_back({std::string(to_string(formula)), layer, alpha, formula, defaults, "default"});
            }
        } else if (sweep == "criteria") {
            grid.push_back({"default", layer, alpha, SteeringFormula::EMinusRT, defaults, "default"});
            grid.push_back({"prefix_only", layer, alpha, SteeringFormula::EMinusRT, defaults.prefix_only(), "prefix_only"});
            grid.push_back({"phrase_only", layer, alpha, SteeringFormula::EMinusRT, defaults.phrase_only(), "phrase_only"});
        } else {
            throw InvalidConfig("--sweep must be layer, alpha, type or criteria");
        }
        if (grid.empty()) {
            throw InvalidConfig("empty ablation grid");
        }
        if (layer >= n_layers) {
            throw LayerOutOfRange("layer " + std::to_string(layer) + " >= n_layers " + std::to_string(n_layers));
        }

        const auto collect_items = load_items(dataset, dataset_format, false, 0);
        const auto eval_items = load_items(eval_dataset.empty() ? dataset : eval_dataset, dataset_format, false, limit);
        std::vector<std::string> prompts;
        for (size_t i : select_samples(collect_items.size(), samples, 0)) {
            prompts.push_back(collect_items[i].problem);
        }
        CollectOptions co;
        co.generation = sampling.config();
        co.generation.sampling = {collect_temperature > 0 ? SamplingMode::Temperature : SamplingMode::Greedy,
                                  collect_temperature > 0 ? collect_temperature : 1.0, collect_seed};
        co.jobs = jobs;
        RunOptions ro;
        ro.jobs = jobs;

        // representation sets keyed by (layer, rules)
        std::map<std::pair<size_t, std::string>, RepresentationSet> cache;
        std::string csv = "sweep,value,layer,alpha,formula,criteria,accuracy,mean_tokens,mean_execution,"
                          "mean_reflection,mean_transition,rt_fraction\n";
        std::vector<BenchmarkSummary> rows;
        for (const auto & pt : grid) {
            auto key = std::make_pair(pt.layer, pt.rules_name);
            if (!cache.count(key)) {
                cache[key] = collect_representations(*be, prompts, pt.layer, pt.rules, co).representations;
            }
            const auto & set = cache[key];
            const auto v = compute_steering_vector(compute_category_means(set, grouping_for(pt.formula)), pt.formula);
            MethodSpec ms;
            ms.method = Method::Seal;
            ms.label = sweep + "=" + pt.value;
            SteerPolicy p;
            p.vector = v;
            p.alpha = pt.alpha;
            p.layer = pt.layer;
            ms.policy = p;
            const auto run = run_benchmark(*be, eval_items, ms, sampling.config(), ro);
            const auto & sm = run.summary;
            const double total = sm.mean_thoughts[0] + sm.mean_thoughts[1] + sm.mean_thoughts[2];
            const double rt = total > 0 ? (sm.mean_thoughts[1] + sm.mean_thoughts[2]) / total : 0.0;
            std::ostringstream row;
            row << sweep << ',' << pt.value << ',' << pt.layer << ',' << pt.alpha << ',' << to_string(pt.formula) << ','
                << pt.rules_name << ',' << fmt(sm.accuracy) << ',' << fmt(sm.mean_tokens) << ','
                << fmt(sm.mean_thoughts[0], 3) << ',' << fmt(sm.mean_thoughts[1], 3) << ','
                << fmt(sm.mean_thoughts[2], 3) << ',' << fmt(rt, 4) << '\n';
            csv += row.str();
            rows.push_back(sm);
        }
        write_text(out, csv);
        print_summary_table(rows);
        std::cout << "-> " << out << "\n";
    }
};

struct AnalyzeCmd {
    std::string config, projection, projection_out = "out/projection.csv", separability_out = "out/separability.csv",
                reworded_out = "out/reworded.csv", stats_out, rules_path;
    std::vector<std::string> reps, traces;
    uint64_t seed = 0;
    CLI::Option *o_reps, *o_traces, *o_projection, *o_proj_out, *o_sep_out, *o_rew_out, *o_stats, *o_rules, *o_seed;

    void add(CLI::App & app) {
        auto * c = app.add_subcommand("analyze", "projections, separability and reworded-thought counts");
        c->add_option("--config", config, "JSON experiment config");
        o_reps = c->add_option("--reps", reps, "representation files (one per layer)");
        o_traces = c->add_option("--traces", traces, "trace or eval-record JSONL files, label=path allowed");
        o_projection = c->add_option("--project", projection, "pca | tsne (projects the first --reps file)");
        o_proj_out = c->add_option("--projection-out", projection_out, "projection CSV");
        o_sep_out = c->add_option("--separability-out", separability_out, "separability CSV");
        o_rew_out = c->add_option("--reworded-out", reworded_out, "reworded-count CSV");
        o_stats = c->add_option("--stats-out", stats_out, "thought statistics CSV of the first --traces file");
        o_rules = c->add_option("--rules", rules_path, "classification rules JSON");
        o_seed = c->add_option("--seed", seed, "t-SNE seed");
        c->callback([this] { run(); });
    }

    static std::vector<ReasoningTrace> read_any_traces(const std::string & path) {
        std::ifstream in(path);
        std::string first;
        std::getline(in, first);
        if (first.find("\"item_id\"") != std::string::npos) {
            std::vector<ReasoningTrace> out;
            for (auto & r : read_records(path)) {
                if (!r.failed()) {
                    out.push_back(std::move(r.trace));
                }
            }
            return out;
        }
        return read_traces(path);
    }

    void run() {
        Settings s;
        s.load(config, "analyze");
        s.resolve(reps, o_reps, "reps");
        s.resolve(traces, o_traces, "traces");
        s.resolve(projection, o_projection, "project");
        s.resolve(projection_out, o_proj_out, "projection_out");
        s.resolve(separability_out, o_sep_out, "separability_out");
        s.resolve(reworded_out, o_rew_out, "reworded_out");
        s.resolve(stats_out, o_stats, "stats_out");
        s.resolve(rules_path, o_rules, "rules");
        s.resolve(seed, o_seed, "seed");
        if (reps.empty() && traces.empty()) {
            throw InvalidConfig("nothing to analyze: give --reps and/or --traces");
        }
        if (!reps.empty()) {
            std::vector<RepresentationSet> sets;
            for (const auto & p : reps) {
                sets.push_back(load_representations(p));
            }
            const auto rows = separability(sets);
            write_text(separability_out, separability_csv(rows));
            for (const auto & r : rows) {
                std::cout << "layer " << r.layer << ": centroid accuracy " << fmt(r.centroid_accuracy, 4)
                          << ", silhouette " << fmt(r.silhouette, 4) << " (E " << r.n_execution << ", R+T " << r.n_other
                          << ")\n";
            }
            if (!projection.empty()) {
                TsneOptions t;
                t.seed = seed;
                const auto pts = project(sets.front(), projection_method_from_string(projection), t);
                write_text(projection_out, projection_csv(pts));
                std::cout << projection << " projection of " << pts.size() << " points -> " << projection_out << "\n";
            }
        }
        if (!traces.empty()) {
            const auto rules = load_rules(rules_path);
            std::vector<RewordedCounts> rows;
            std::vector<ReasoningTrace> first;
            for (const auto & spec : traces) {
                const auto eq = spec.find('=');
                const std::string label = eq == std::string::npos ? fs::path(spec).stem().string() : spec.substr(0, eq);
                const std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
                auto ts = read_any_traces(path);
                for (auto & t : ts) {
                    t = classify_trace(std::move(t), rules);
                }
                rows.push_back(reworded_count(ts, rules, label));
                if (first.empty()) {
                    first = std::move(ts);
                }
            }
            write_text(reworded_out, reworded_csv(rows));
            for (const auto & r : rows) {
                std::cout << r.label << ": reworded reflection " << r.reflection << ", reworded transition "
                          << r.transition << " (of " << r.total_reflection << " / " << r.total_transition << ")\n";
            }
            if (!stats_out.empty()) {
                write_text(stats_out, thought_statistics(first).to_csv());
            }
        }
    }
};

struct TrainCmd {
    std::string config, out, log_out;
    size_t samples = 3000, epochs = 8;
    uint64_t seed = 1234, corpus_seed = 1234;
    double lr = 3e-3;
    CLI::Option *o_out, *o_log, *o_samples, *o_epochs, *o_seed, *o_cseed, *o_lr;

    void add(CLI::App & app) {
        auto * c = app.add_subcommand("train", "train the tiny reference transformer on the synthetic corpus");
        c->add_option("--config", config, "JSON experiment config");
        o_out = c->add_option("--out", out, "checkpoint path (default <model-dir>/tiny_seed<seed>.ckpt)");
        o_log = c->add_option("--log", log_out, "training log JSON");
        o_samples = c->add_option("--samples", samples, "corpus size");
        o_epochs = c->add_option("--epochs", epochs, "epoch budget");
        o_seed = c->add_option("--seed", seed, "initialization and batch-order seed");
        o_cseed = c->add_option("--corpus-seed", corpus_seed, "corpus seed");
        o_lr = c->add_option("--lr", lr, "peak learning rate");
        c->callback([this] { run(); });
    }

    void run() {
        Settings s;
        s.load(config, "train");
        s.resolve(out, o_out, "out");
        s.resolve(log_out, o_log, "log");
        s.resolve(samples, o_samples, "samples");
        s.resolve(epochs, o_epochs, "epochs");
        s.resolve(seed, o_seed, "seed");
        s.resolve(corpus_seed, o_cseed, "corpus_seed");
        s.resolve(lr, o_lr, "lr");
        CorpusConfig cc;
        cc.seed = corpus_seed;
        cc.n_samples = samples;
        const auto corpus = gen_corpus(cc);
        tiny::TrainConfig tc;
        tc.seed = seed;
        tc.max_epochs = epochs;
        tc.lr = lr;
        json log = json::array();
        auto result = tiny::train_tiny(corpus, tc, [&](const tiny::TrainLogEntry & e) {
            std::cout << "epoch " << e.epoch << " loss " << fmt(e.mean_loss, 4) << " lr " << e.lr << " "
                      << fmt(e.seconds, 1) << "s" << std::endl;
            log.push_back({{"epoch", e.epoch}, {"steps", e.steps}, {"loss", e.mean_loss}, {"lr", e.lr}, {"seconds", e.seconds}});
        });
        const std::string path = out.empty() ? tiny_checkpoint_path(seed) : out;
        ensure_parent(path);
        tiny::save_checkpoint(path, result.model);
        std::cout << "initial loss " << fmt(result.initial_loss, 4) << ", final loss " << fmt(result.final_loss, 4)
                  << " -> " << path << "\n";
        if (!log_out.empty()) {
            json doc = {{"train_config", tc.to_json()},
                        {"corpus", {{"seed", corpus_seed}, {"n_samples", samples}}},
                        {"training_hash", result.model.training_hash()},
                        {"initial_loss", result.initial_loss},
                        {"final_loss", result.final_loss},
                        {"epochs", log}};
            write_text(log_out, doc.dump(2) + "\n");
        }
    }
};

struct CorpusCmd {
    std::string out = "data/synth.jsonl";
    size_t samples = 1000;
    uint64_t seed = 20240;

    void add(CLI::App & app) {
        auto * c = app.add_subcommand("corpus", "write synthetic problems as a benchmark JSONL");
        c->add_option("--out", out, "output JSONL");
        c->add_option("--samples", samples, "number of problems");
        c->add_option("--seed", seed, "corpus seed");
        c->callback([this] { run(); });
    }

    void run() {
        CorpusConfig cc;
        cc.seed = seed;
        cc.n_samples = samples;
        std::string text;
        const auto corpus = gen_corpus(cc);
        for (size_t i = 0; i < corpus.size(); ++i) {
            const auto & smp = corpus[i];
            // difficulty grows with the number of operands: 2 -> 1, ..., 6+ -> 5
            const int difficulty = std::min<int>(5, static_cast<int>(smp.operands.size()) - 1);
            json j = {{"id", "synth-" + std::to_string(i)},
                      {"problem", smp.prompt},
                      {"answer", std::to_string(smp.answer)},
                      {"difficulty", difficulty},
                      {"domain", "synthetic-sum"}};
            text += j.dump() + "\n";
        }
        write_text(out, text);
        std::cout << corpus.size() << " problems -> " << out << "\n";
    }
};

struct ServeCmd {
    BackendOptions backend;
    std::optional<uint16_t> tcp;

    void add(CLI::App & app) {
        auto * c = app.add_subcommand("serve", "serve a backend over the sidecar wire protocol");
        backend.add(c);
        c->add_option("--tcp", tcp, "listen on 127.0.0.1:<port> instead of stdio");
        c->callback([this] { run(); });
    }

    void run() {
        auto be = backend.build();
        if (tcp) {
            serve_tcp(*be, *tcp, [](uint16_t port) { std::cerr << "listening on 127.0.0.1:" << port << std::endl; });
        } else {
            serve_stdio(*be);
        }
    }
};

int exit_code_for(const Error & e) {
    const std::string & k = e.kind();
    if (k == "BackendError" || k == "ProtocolError" || k == "DivergedTraining" || k == "ContextOverflow") {
        return kExitBackend;
    }
    return kExitConfig;
}

} // namespace

int main(int argc, char ** argv) {
    CLI::App app{"seal: reasoning-trace steering toolkit"};
    app.require_subcommand(1);
    CollectCmd collect;
    ExtractCmd extract;
    GenerateCmd generate;
    EvalCmd eval;
    AblateCmd ablate;
    AnalyzeCmd analyze;
    TrainCmd train;
    CorpusCmd corpus;
    ServeCmd serve;
    collect.add(app);
    extract.add(app);
    generate.add(app);
    eval.add(app);
    ablate.add(app);
    analyze.add(app);
    train.add(app);
    corpus.add(app);
    serve.add(app);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError & e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    } catch (const Error & e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception & e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return 0;
}
