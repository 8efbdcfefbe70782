#include "commands.hpp"

#include "psychsteer/backends.hpp"
#include "psychsteer/io.hpp"

#include <iostream>

namespace psychsteer::cli {

namespace {

const std::set<std::string> kGenerateKeys = {
    "gamma",       "prefix_words", "max_new_tokens", "stop_sequence", "worker_count",
    "seed",        "base",         "expert.",        "sampler",       "temperature",
    "traits",
};

std::vector<Trait> parse_trait_list(const std::string& csv) {
    std::vector<Trait> traits;
    std::size_t start = 0;
    while (start <= csv.size()) {
        std::size_t comma = csv.find(',', start);
        std::string name = csv.substr(
            start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!name.empty()) {
            traits.push_back(parse_trait(name));
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (traits.empty()) {
        raise(errc::config_error, "empty trait list");
    }
    return traits;
}

struct GenerateOptions {
    std::string scenarios_path;
    std::string out_path;
    std::optional<std::string> config_path;
    std::optional<std::string> base_spec;
    std::optional<double> gamma;
    std::optional<std::uint64_t> prefix_words;
    std::optional<std::uint64_t> max_new_tokens;
    std::vector<std::string> stops;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> workers;
    std::optional<std::string> traits_csv;
    std::optional<std::string> sampler_mode;
    std::optional<double> temperature;
};

void run_generate(const GenerateOptions& options) {
    RunConfig config = load_config(options.config_path, kGenerateKeys);

    PipelineOptions pipeline;
    pipeline.policy = build_policy(config, options.gamma, options.prefix_words,
                                   options.max_new_tokens, options.stops);
    pipeline.master_seed = require_seed(options.seed, config);
    pipeline.worker_count =
        static_cast<std::size_t>(pick_uint(options.workers, config, "worker_count", 1));

    std::string sampler_mode = options.sampler_mode.value_or(
        config.get("sampler").value_or("greedy"));
    if (sampler_mode == "greedy") {
        pipeline.sampler_mode = SamplerMode::Greedy;
    } else if (sampler_mode == "temperature") {
        pipeline.sampler_mode = SamplerMode::Temperature;
        pipeline.temperature = pick_double(options.temperature, config, "temperature", 1.0);
    } else {
        raise(errc::config_error, "sampler must be \"greedy\" or \"temperature\"");
    }

    std::string traits_csv = options.traits_csv.value_or(config.get("traits").value_or(""));
    if (!traits_csv.empty()) {
        pipeline.traits = parse_trait_list(traits_csv);
    }

    PipelineBackends backends;
    backends.base = open_base(config, options.base_spec);
    for (Trait trait : pipeline.traits) {
        for (Level level : {Level::High, Level::Low}) {
            backends.experts[{trait, level}] = open_expert(config, trait, level);
        }
    }

    std::vector<Scenario> scenarios = ingest_scenarios(options.scenarios_path);
    std::cerr << "generate: " << scenarios.size() << " scenarios x " << pipeline.traits.size()
              << " traits x 2 levels\n";

    std::vector<DialogueRecord> records = run_pipeline(scenarios, backends, pipeline);
    atomic_write_file(options.out_path, render_dataset(records));

    ValidationReport report = validate_dataset(records);
    std::cerr << "generate: wrote " << records.size() << " records to " << options.out_path
              << (report.valid ? " (valid)" : " (VALIDATION FINDINGS PRESENT)") << "\n";
}

} // namespace

void register_generate(CLI::App& app) {
    auto options = std::make_shared<GenerateOptions>();
    CLI::App* cmd =
        app.add_subcommand("generate", "Generate a trait-conditioned dialogue dataset");
    cmd->add_option("--scenarios", options->scenarios_path, "Scenario JSONL input")->required();
    cmd->add_option("--out", options->out_path, "Dataset JSONL output")->required();
    cmd->add_option("--config", options->config_path, "Run config file");
    cmd->add_option("--base", options->base_spec, "Base backend spec (toy:... or remote:...)");
    cmd->add_option("--gamma", options->gamma, "Expert steering strength (default 0.5)");
    cmd->add_option("--prefix-words", options->prefix_words,
                    "Base-only prefix length in words (default 5)");
    cmd->add_option("--max-new-tokens", options->max_new_tokens, "Token budget (default 64)");
    cmd->add_option("--stop", options->stops, "Stop sequence (repeatable)");
    cmd->add_option("--seed", options->seed, "Master seed (required here or in config)");
    cmd->add_option("--workers", options->workers, "Worker thread count (default 1)");
    cmd->add_option("--traits", options->traits_csv, "Comma-separated trait subset");
    cmd->add_option("--sampler", options->sampler_mode, "greedy | temperature (default greedy)");
    cmd->add_option("--temperature", options->temperature, "Sampling temperature");
    cmd->callback([options]() { run_generate(*options); });
}

} // namespace psychsteer::cli
