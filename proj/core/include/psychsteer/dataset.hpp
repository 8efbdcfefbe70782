#pragma once

/**
 * Scenario ingestion, pairwise high/low steered generation, and export to
 * training formats.
 *
 * A full run over S scenarios emits 10*S dialogue records: for every
 * scenario and every trait, one record at each level, both sharing the
 * exact Speaker X context. Records are sorted by (scenario_id, trait,
 * level) before writing so identical runs produce byte-identical files.
 */

#include "psychsteer/errors.hpp"
#include "psychsteer/steering.hpp"
#include "psychsteer/traits.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace psychsteer {

inline constexpr std::string_view kDatasetSchemaVersion = "big5chat/1";

struct Scenario {
    std::string scenario_id;
    std::string narrative;
    std::string speaker_x_utterance;
    std::optional<std::string> original_y_response;
};

struct RecordMeta {
    double gamma = 0.0;
    std::uint64_t seed = 0;
    std::string base_model_id;
    std::string expert_model_id;
    StopReason stop_reason = StopReason::MaxTokens;
};

struct DialogueRecord {
    std::string scenario_id;
    TraitSpec trait_spec;
    std::string speaker_x;
    std::string speaker_y;
    RecordMeta meta;
};

struct PreferencePair {
    std::string prompt;
    std::string chosen;
    std::string rejected;
    TraitSpec trait_spec; // level = the chosen side
};

struct SftExample {
    std::string instruction;
    std::string input;
    std::string output;
};

// "You are a person with the following Big Five personality trait:
//  {Trait} - {level}."
std::string sft_instruction(const TraitSpec& spec);

// --- scenario ingestion -----------------------------------------------------

Scenario parse_scenario_line(const std::string& line, std::size_t line_number);

// One Scenario per JSONL line, input order preserved. Raises ParseError with
// the line number, DuplicateScenarioId on repeated ids.
std::vector<Scenario> ingest_scenarios(const std::filesystem::path& path);

// --- record serialization ---------------------------------------------------

std::string dialogue_record_to_json(const DialogueRecord& record);
DialogueRecord dialogue_record_from_json(const std::string& line, std::size_t line_number);

std::vector<DialogueRecord> read_dataset(const std::filesystem::path& path);
std::string render_dataset(const std::vector<DialogueRecord>& records);

// --- pairwise generation ----------------------------------------------------

// One steered generation per level over the same scenario context.
// Engine errors are re-raised tagged with (scenario_id, level).
std::pair<DialogueRecord, DialogueRecord>
generate_pairwise(const Scenario& scenario, Trait trait, LogitSource& base,
                  LogitSource& expert_high, LogitSource& expert_low,
                  const SteeringPolicy& policy, const SamplerConfig& sampler);

// Deterministic per-job seed: master seed mixed with the (scenario, trait,
// level) key, so any subset of jobs reproduces identically.
std::uint64_t job_seed(std::uint64_t master_seed, std::string_view scenario_id,
                       Trait trait, Level level);

struct PipelineBackends {
    std::shared_ptr<LogitSource> base;
    // one expert per (trait, level)
    std::map<std::pair<Trait, Level>, std::shared_ptr<LogitSource>> experts;
};

struct PipelineOptions {
    SteeringPolicy policy;
    std::uint64_t master_seed = 0;
    SamplerMode sampler_mode = SamplerMode::Greedy;
    double temperature = 1.0;
    std::size_t worker_count = 1;
    std::vector<Trait> traits{kAllTraits.begin(), kAllTraits.end()};
    int max_retries = 2; // extra attempts after a BackendFailure, same seed
};

// Runs scenario x trait x level jobs (optionally in parallel) and returns
// records sorted by (scenario_id, trait, level).
std::vector<DialogueRecord> run_pipeline(const std::vector<Scenario>& scenarios,
                                         const PipelineBackends& backends,
                                         const PipelineOptions& options);

// --- exports ----------------------------------------------------------------

std::vector<SftExample> export_sft(const std::vector<DialogueRecord>& records);

// chosen = response at target_level, rejected = the opposite level of the
// same (scenario, trait); prompt = SFT instruction + "\n" + speaker_x.
std::vector<PreferencePair> export_dpo(const std::vector<DialogueRecord>& records,
                                       Level target_level);

std::string render_sft(const std::vector<SftExample>& examples);
std::string render_dpo(const std::vector<PreferencePair>& pairs);

// --- validation -------------------------------------------------------------

struct ValidationFinding {
    // duplicate_key | missing_counterpart | empty_text | context_mismatch | identical_pair
    std::string kind;
    std::string scenario_id;
    Trait trait = Trait::Openness;
    std::string detail;
};

struct ValidationReport {
    bool valid = false;
    std::vector<ValidationFinding> findings;
    // (trait, level) -> record count
    std::map<std::pair<Trait, Level>, std::size_t> counts;
    std::size_t total = 0;
};

ValidationReport validate_dataset(const std::vector<DialogueRecord>& records);

std::string render_validation_report(const ValidationReport& report);

} // namespace psychsteer
