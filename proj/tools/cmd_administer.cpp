#include "commands.hpp"

#include "psychsteer/backends.hpp"
#include "psychsteer/io.hpp"
#include "psychsteer/psychometrics.hpp"

#include <iostream>

namespace psychsteer::cli {

namespace {

const std::set<std::string> kAdministerKeys = {
    "base",   "expert.",     "gamma", "prefix_words", "max_new_tokens", "stop_sequence",
    "seed",   "temperature", "runs",  "persona",      "questionnaire",
};

struct AdministerCliOptions {
    std::string questionnaire_path;
    std::string out_path;
    std::optional<std::string> config_path;
    std::optional<std::string> base_spec;
    std::string persona_id = "instruction";
    std::string trait;
    std::string level;
    std::optional<std::uint64_t> runs;
    std::optional<double> temperature;
    std::optional<std::uint64_t> seed;
    std::optional<double> gamma;
    std::optional<std::uint64_t> max_new_tokens;
    std::optional<std::string> transcript_path;
    std::optional<std::string> demos_path;
    std::uint64_t demo_count = 10;
    bool steer = false;
};

// Deterministic sample of demo exchanges matching the trait spec.
std::vector<std::pair<std::string, std::string>>
sample_demos(const std::string& dataset_path, const TraitSpec& spec, std::size_t count,
             std::uint64_t seed) {
    std::vector<std::pair<std::string, std::string>> matching;
    for (const DialogueRecord& record : read_dataset(dataset_path)) {
        if (record.trait_spec == spec) {
            matching.emplace_back(record.speaker_x, record.speaker_y);
        }
    }
    if (matching.size() <= count) {
        return matching;
    }
    // partial Fisher-Yates with an explicit generator, stable across platforms
    std::uint64_t state = mix_seed(seed);
    for (std::size_t i = 0; i < count; ++i) {
        state = mix_seed(state);
        std::size_t j = i + static_cast<std::size_t>(state % (matching.size() - i));
        std::swap(matching[i], matching[j]);
    }
    matching.resize(count);
    return matching;
}

void run_administer(const AdministerCliOptions& options) {
    RunConfig config = load_config(options.config_path, kAdministerKeys);

    TraitSpec spec{parse_trait(options.trait), parse_level(options.level)};
    Questionnaire questionnaire = load_questionnaire(options.questionnaire_path);

    SteeringPolicy policy;
    policy.gamma = pick_double(options.gamma, config, "gamma", 0.5);
    policy.prefix_words = 0; // questionnaire answers are steered from the first token
    policy.max_new_tokens =
        static_cast<std::size_t>(pick_uint(options.max_new_tokens, config, "max_new_tokens", 32));
    for (const std::string& stop : config.get_all("stop_sequence")) {
        policy.stop_sequences.push_back(unescape_config_value(stop));
    }

    std::shared_ptr<LogitSource> base = open_base(config, options.base_spec);
    std::shared_ptr<LogitSource> expert;
    if (options.steer) {
        expert = open_expert(config, spec.trait, spec.level);
    }
    GenerationResponder responder(base, expert, policy);

    AdministerOptions admin;
    std::string persona = render_persona(persona_template(options.persona_id), spec);
    if (options.demos_path.has_value()) {
        auto demos = sample_demos(*options.demos_path, spec,
                                  static_cast<std::size_t>(options.demo_count),
                                  require_seed(options.seed, config));
        admin.persona = render_demonstrations(demos) + persona;
    } else {
        admin.persona = persona;
    }
    admin.runs = static_cast<std::size_t>(pick_uint(options.runs, config, "runs", 5));
    admin.sampler = SamplerConfig::with_temperature(
        pick_double(options.temperature, config, "temperature", 0.6),
        require_seed(options.seed, config));

    std::vector<TranscriptEntry> transcript;
    TraitScoreReport report = administer(responder, questionnaire, admin,
                                         options.transcript_path.has_value() ? &transcript
                                                                             : nullptr);
    atomic_write_file(options.out_path, render_score_report(report));
    if (options.transcript_path.has_value()) {
        atomic_write_file(*options.transcript_path, render_transcript(transcript));
    }
    std::cerr << "administer: " << questionnaire.name << " x " << admin.runs << " runs -> "
              << options.out_path << "\n";
}

} // namespace

void register_administer(CLI::App& app) {
    auto options = std::make_shared<AdministerCliOptions>();
    CLI::App* cmd = app.add_subcommand(
        "administer", "Administer a questionnaire to a generation-backed responder");
    cmd->add_option("--questionnaire", options->questionnaire_path, "Questionnaire JSONL file")
        ->required();
    cmd->add_option("--out", options->out_path, "Score report output")->required();
    cmd->add_option("--config", options->config_path, "Run config file");
    cmd->add_option("--base", options->base_spec, "Base backend spec");
    cmd->add_option("--persona", options->persona_id,
                    "Persona template: instruction | alignment (default instruction)");
    cmd->add_option("--trait", options->trait, "Target trait")->required();
    cmd->add_option("--level", options->level, "Target level: high | low")->required();
    cmd->add_option("--runs", options->runs, "Repeated runs (default 5)");
    cmd->add_option("--temperature", options->temperature, "Sampling temperature (default 0.6)");
    cmd->add_option("--seed", options->seed, "Seed (required here or in config)");
    cmd->add_option("--gamma", options->gamma, "Steering strength when --steer is set");
    cmd->add_option("--max-new-tokens", options->max_new_tokens,
                    "Per-answer token budget (default 32)");
    cmd->add_option("--transcript", options->transcript_path, "Transcript JSONL output");
    cmd->add_option("--demos", options->demos_path,
                    "Dataset JSONL to sample demonstration exchanges from");
    cmd->add_option("--demo-count", options->demo_count, "Demonstrations to prepend (default 10)");
    cmd->add_flag("--steer", options->steer,
                  "Steer the responder with the expert configured for the trait/level");
    cmd->callback([options]() { run_administer(*options); });
}

} // namespace psychsteer::cli
