#include "psychsteer/dataset.hpp"
#include "psychsteer/io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

namespace psychsteer {

using ordered_json = nlohmann::ordered_json;
using json = nlohmann::json;

namespace {

std::string_view stop_reason_name(StopReason reason) {
    return reason == StopReason::StopSequence ? "stop_sequence" : "max_tokens";
}

StopReason parse_stop_reason(std::string_view name) {
    if (name == "stop_sequence") return StopReason::StopSequence;
    if (name == "max_tokens") return StopReason::MaxTokens;
    raise(errc::parse_error, "unknown stop reason: " + std::string(name));
}

auto record_key(const DialogueRecord& r) {
    return std::make_tuple(r.scenario_id, static_cast<int>(r.trait_spec.trait),
                           static_cast<int>(r.trait_spec.level));
}

} // namespace

std::string sft_instruction(const TraitSpec& spec) {
    std::string out = "You are a person with the following Big Five personality trait: ";
    out += trait_display_name(spec.trait);
    out += " - ";
    out += level_name(spec.level);
    out += ".";
    return out;
}

Scenario parse_scenario_line(const std::string& line, std::size_t line_number) {
    json doc = json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        raise(errc::parse_error, "line " + std::to_string(line_number) + ": not a JSON object");
    }
    Scenario scenario;
    try {
        scenario.scenario_id = doc.at("scenario_id").get<std::string>();
        scenario.narrative = doc.value("narrative", std::string{});
        scenario.speaker_x_utterance = doc.at("speaker_x_utterance").get<std::string>();
        if (doc.contains("original_y_response") && !doc["original_y_response"].is_null()) {
            scenario.original_y_response = doc["original_y_response"].get<std::string>();
        }
    } catch (const json::exception& e) {
        raise(errc::parse_error, "line " + std::to_string(line_number) + ": " + e.what());
    }
    if (scenario.scenario_id.empty()) {
        raise(errc::parse_error, "line " + std::to_string(line_number) + ": empty scenario_id");
    }
    if (scenario.speaker_x_utterance.empty()) {
        raise(errc::parse_error,
              "line " + std::to_string(line_number) + ": empty speaker_x_utterance");
    }
    return scenario;
}

std::vector<Scenario> ingest_scenarios(const std::filesystem::path& path) {
    std::vector<Scenario> scenarios;
    std::set<std::string> seen;
    for_each_line(path, [&](std::size_t line_no, const std::string& line) {
        Scenario scenario = parse_scenario_line(line, line_no);
        if (!seen.insert(scenario.scenario_id).second) {
            raise(errc::duplicate_scenario_id, "line " + std::to_string(line_no) +
                                                   ": duplicate scenario_id \"" +
                                                   scenario.scenario_id + "\"");
        }
        scenarios.push_back(std::move(scenario));
    });
    return scenarios;
}

std::string dialogue_record_to_json(const DialogueRecord& record) {
    ordered_json meta;
    meta["gamma"] = record.meta.gamma;
    meta["seed"] = record.meta.seed;
    meta["base_model_id"] = record.meta.base_model_id;
    meta["expert_model_id"] = record.meta.expert_model_id;
    meta["stop_reason"] = stop_reason_name(record.meta.stop_reason);

    ordered_json doc;
    doc["schema_version"] = kDatasetSchemaVersion;
    doc["scenario_id"] = record.scenario_id;
    doc["trait"] = trait_name(record.trait_spec.trait);
    doc["level"] = level_name(record.trait_spec.level);
    doc["speaker_x"] = record.speaker_x;
    doc["speaker_y"] = record.speaker_y;
    doc["meta"] = std::move(meta);
    return doc.dump();
}

DialogueRecord dialogue_record_from_json(const std::string& line, std::size_t line_number) {
    json doc = json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        raise(errc::parse_error, "line " + std::to_string(line_number) + ": not a JSON object");
    }
    try {
        std::string schema = doc.at("schema_version").get<std::string>();
        if (schema != kDatasetSchemaVersion) {
            raise(errc::parse_error, "line " + std::to_string(line_number) +
                                         ": unsupported schema_version \"" + schema + "\"");
        }
        DialogueRecord record;
        record.scenario_id = doc.at("scenario_id").get<std::string>();
        record.trait_spec.trait = parse_trait(doc.at("trait").get<std::string>());
        record.trait_spec.level = parse_level(doc.at("level").get<std::string>());
        record.speaker_x = doc.at("speaker_x").get<std::string>();
        record.speaker_y = doc.at("speaker_y").get<std::string>();
        const json& meta = doc.at("meta");
        record.meta.gamma = meta.at("gamma").get<double>();
        record.meta.seed = meta.at("seed").get<std::uint64_t>();
        record.meta.base_model_id = meta.at("base_model_id").get<std::string>();
        record.meta.expert_model_id = meta.at("expert_model_id").get<std::string>();
        record.meta.stop_reason = parse_stop_reason(meta.at("stop_reason").get<std::string>());
        return record;
    } catch (const json::exception& e) {
        raise(errc::parse_error, "line " + std::to_string(line_number) + ": " + e.what());
    }
}

std::vector<DialogueRecord> read_dataset(const std::filesystem::path& path) {
    std::vector<DialogueRecord> records;
    for_each_line(path, [&](std::size_t line_no, const std::string& line) {
        records.push_back(dialogue_record_from_json(line, line_no));
    });
    return records;
}

std::string render_dataset(const std::vector<DialogueRecord>& records) {
    std::string out;
    for (const DialogueRecord& record : records) {
        out += dialogue_record_to_json(record);
        out += '\n';
    }
    return out;
}

std::uint64_t job_seed(std::uint64_t master_seed, std::string_view scenario_id, Trait trait,
                       Level level) {
    std::string key;
    key += scenario_id;
    key += '/';
    key += trait_name(trait);
    key += '/';
    key += level_name(level);
    return mix_seed(mix_seed(master_seed) ^ fnv1a64(key));
}

namespace {

DialogueRecord generate_one(const Scenario& scenario, const TraitSpec& spec, LogitSource& base,
                            LogitSource& expert, const SteeringPolicy& policy,
                            const SamplerConfig& sampler) {
    GenerationResult result;
    try {
        result = generate_steered(base, expert, scenario.speaker_x_utterance, policy, sampler);
    } catch (const Error& e) {
        raise(e.code(), "scenario \"" + scenario.scenario_id + "\", level " +
                            std::string(level_name(spec.level)) + ": " + e.what());
    }
    if (result.text.empty()) {
        raise(errc::invalid_record, "scenario \"" + scenario.scenario_id + "\", level " +
                                        std::string(level_name(spec.level)) +
                                        ": generation produced empty speaker_y");
    }
    DialogueRecord record;
    record.scenario_id = scenario.scenario_id;
    record.trait_spec = spec;
    record.speaker_x = scenario.speaker_x_utterance;
    record.speaker_y = result.text;
    record.meta.gamma = result.gamma_used;
    record.meta.seed = result.seed;
    record.meta.base_model_id = base.model_id();
    record.meta.expert_model_id = expert.model_id();
    record.meta.stop_reason = result.stop_reason;
    return record;
}

} // namespace

std::pair<DialogueRecord, DialogueRecord>
generate_pairwise(const Scenario& scenario, Trait trait, LogitSource& base,
                  LogitSource& expert_high, LogitSource& expert_low,
                  const SteeringPolicy& policy, const SamplerConfig& sampler) {
    DialogueRecord high = generate_one(scenario, {trait, Level::High}, base, expert_high, policy,
                                       sampler);
    DialogueRecord low =
        generate_one(scenario, {trait, Level::Low}, base, expert_low, policy, sampler);
    return {std::move(high), std::move(low)};
}

std::vector<DialogueRecord> run_pipeline(const std::vector<Scenario>& scenarios,
                                         const PipelineBackends& backends,
                                         const PipelineOptions& options) {
    if (backends.base == nullptr) {
        raise(errc::config_error, "pipeline needs a base source");
    }
    struct Job {
        const Scenario* scenario;
        TraitSpec spec;
        LogitSource* expert;
    };

    std::vector<Job> jobs;
    jobs.reserve(scenarios.size() * options.traits.size() * 2);
    for (const Scenario& scenario : scenarios) {
        for (Trait trait : options.traits) {
            for (Level level : {Level::High, Level::Low}) {
                auto it = backends.experts.find({trait, level});
                if (it == backends.experts.end() || it->second == nullptr) {
                    raise(errc::config_error,
                          "no expert configured for " + std::string(trait_name(trait)) + "/" +
                              std::string(level_name(level)));
                }
                jobs.push_back({&scenario, {trait, level}, it->second.get()});
            }
        }
    }

    std::vector<DialogueRecord> records(jobs.size());
    std::vector<std::exception_ptr> failures(jobs.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&]() {
        for (;;) {
            std::size_t index = next.fetch_add(1);
            if (index >= jobs.size()) {
                return;
            }
            const Job& job = jobs[index];
            SamplerConfig sampler;
            sampler.mode = options.sampler_mode;
            sampler.temperature = options.temperature;
            sampler.seed = job_seed(options.master_seed, job.scenario->scenario_id,
                                    job.spec.trait, job.spec.level);
            int attempts_left = options.max_retries;
            for (;;) {
                try {
                    records[index] = generate_one(*job.scenario, job.spec, *backends.base,
                                                  *job.expert, options.policy, sampler);
                    break;
                } catch (const Error& e) {
                    if (e.code() == errc::backend_failure && attempts_left-- > 0) {
                        continue; // same seed, so a flaky backend cannot change the output
                    }
                    failures[index] = std::current_exception();
                    break;
                } catch (...) {
                    failures[index] = std::current_exception();
                    break;
                }
            }
        }
    };

    std::size_t worker_count = std::max<std::size_t>(1, options.worker_count);
    if (worker_count == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(worker_count);
        for (std::size_t i = 0; i < worker_count; ++i) {
            threads.emplace_back(worker);
        }
        for (std::thread& t : threads) {
            t.join();
        }
    }

    for (const std::exception_ptr& failure : failures) {
        if (failure) {
            std::rethrow_exception(failure);
        }
    }

    std::sort(records.begin(), records.end(),
              [](const DialogueRecord& a, const DialogueRecord& b) {
                  return record_key(a) < record_key(b);
              });
    return records;
}

std::vector<SftExample> export_sft(const std::vector<DialogueRecord>& records) {
    std::vector<SftExample> examples;
    examples.reserve(records.size());
    for (const DialogueRecord& record : records) {
        if (record.speaker_y.empty()) {
            raise(errc::invalid_record,
                  "record " + record.scenario_id + " has empty speaker_y");
        }
        SftExample example;
        example.instruction = sft_instruction(record.trait_spec);
        example.input = record.speaker_x;
        example.output = record.speaker_y;
        examples.push_back(std::move(example));
    }
    return examples;
}

std::vector<PreferencePair> export_dpo(const std::vector<DialogueRecord>& records,
                                       Level target_level) {
    std::map<std::tuple<std::string, int>, std::array<const DialogueRecord*, 2>> by_key;
    for (const DialogueRecord& record : records) {
        auto key = std::make_tuple(record.scenario_id, static_cast<int>(record.trait_spec.trait));
        auto& slots = by_key[key];
        std::size_t slot = record.trait_spec.level == Level::High ? 0 : 1;
        if (slots[slot] != nullptr) {
            raise(errc::invalid_record, "duplicate record for scenario \"" + record.scenario_id +
                                            "\", trait " +
                                            std::string(trait_name(record.trait_spec.trait)) +
                                            ", level " +
                                            std::string(level_name(record.trait_spec.level)));
        }
        slots[slot] = &record;
    }

    std::vector<PreferencePair> pairs;
    pairs.reserve(by_key.size());
    for (const auto& [key, slots] : by_key) {
        const auto& [scenario_id, trait_int] = key;
        Trait trait = static_cast<Trait>(trait_int);
        if (slots[0] == nullptr || slots[1] == nullptr) {
            raise(errc::missing_counterpart,
                  "scenario \"" + scenario_id + "\", trait " + std::string(trait_name(trait)) +
                      ": missing " + (slots[0] == nullptr ? "high" : "low") + " record");
        }
        const DialogueRecord* chosen = target_level == Level::High ? slots[0] : slots[1];
        const DialogueRecord* rejected = target_level == Level::High ? slots[1] : slots[0];
        if (chosen->speaker_y == rejected->speaker_y) {
            raise(errc::identical_pair, "scenario \"" + scenario_id + "\", trait " +
                                            std::string(trait_name(trait)) +
                                            ": high and low responses are identical");
        }
        PreferencePair pair;
        pair.prompt = sft_instruction({trait, target_level}) + "\n" + chosen->speaker_x;
        pair.chosen = chosen->speaker_y;
        pair.rejected = rejected->speaker_y;
        pair.trait_spec = {trait, target_level};
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

std::string render_sft(const std::vector<SftExample>& examples) {
    std::string out;
    for (const SftExample& example : examples) {
        ordered_json doc;
        doc["instruction"] = example.instruction;
        doc["input"] = example.input;
        doc["output"] = example.output;
        out += doc.dump();
        out += '\n';
    }
    return out;
}

std::string render_dpo(const std::vector<PreferencePair>& pairs) {
    std::string out;
    for (const PreferencePair& pair : pairs) {
        ordered_json doc;
        doc["prompt"] = pair.prompt;
        doc["chosen"] = pair.chosen;
        doc["rejected"] = pair.rejected;
        doc["trait"] = trait_name(pair.trait_spec.trait);
        doc["level"] = level_name(pair.trait_spec.level);
        out += doc.dump();
        out += '\n';
    }
    return out;
}

ValidationReport validate_dataset(const std::vector<DialogueRecord>& records) {
    ValidationReport report;
    report.total = records.size();

    std::map<std::tuple<std::string, int, int>, std::size_t> key_counts;
    std::map<std::tuple<std::string, int>, std::array<const DialogueRecord*, 2>> pair_slots;

    for (const DialogueRecord& record : records) {
        ++report.counts[{record.trait_spec.trait, record.trait_spec.level}];
        ++key_counts[record_key(record)];
        auto& slots = pair_slots[{record.scenario_id, static_cast<int>(record.trait_spec.trait)}];
        std::size_t slot = record.trait_spec.level == Level::High ? 0 : 1;
        if (slots[slot] == nullptr) {
            slots[slot] = &record;
        }
        if (record.speaker_y.empty()) {
            report.findings.push_back({"empty_text", record.scenario_id, record.trait_spec.trait,
                                       "empty speaker_y at level " +
                                           std::string(level_name(record.trait_spec.level))});
        }
    }

    for (const auto& [key, count] : key_counts) {
        if (count > 1) {
            const auto& [scenario_id, trait_int, level_int] = key;
            report.findings.push_back(
                {"duplicate_key", scenario_id, static_cast<Trait>(trait_int),
                 std::to_string(count) + " records at level " +
                     std::string(level_name(static_cast<Level>(level_int)))});
        }
    }

    for (const auto& [key, slots] : pair_slots) {
        const auto& [scenario_id, trait_int] = key;
        Trait trait = static_cast<Trait>(trait_int);
        if (slots[0] == nullptr || slots[1] == nullptr) {
            report.findings.push_back({"missing_counterpart", scenario_id, trait,
                                       std::string("missing ") +
                                           (slots[0] == nullptr ? "high" : "low") + " record"});
        } else {
            if (slots[0]->speaker_x != slots[1]->speaker_x) {
                report.findings.push_back({"context_mismatch", scenario_id, trait,
                                           "speaker_x differs between levels"});
            }
            if (slots[0]->speaker_y == slots[1]->speaker_y) {
                report.findings.push_back({"identical_pair", scenario_id, trait,
                                           "high and low responses are identical"});
            }
        }
    }

    report.valid = report.findings.empty();
    return report;
}

std::string render_validation_report(const ValidationReport& report) {
    ordered_json doc;
    doc["valid"] = report.valid;
    doc["total_records"] = report.total;
    ordered_json counts = ordered_json::object();
    for (Trait trait : kAllTraits) {
        for (Level level : {Level::High, Level::Low}) {
            auto it = report.counts.find({trait, level});
            std::string key =
                std::string(trait_name(trait)) + "/" + std::string(level_name(level));
            counts[key] = it != report.counts.end() ? it->second : 0;
        }
    }
    doc["counts"] = std::move(counts);
    ordered_json findings = ordered_json::array();
    for (const ValidationFinding& finding : report.findings) {
        ordered_json f;
        f["kind"] = finding.kind;
        f["scenario_id"] = finding.scenario_id;
        f["trait"] = trait_name(finding.trait);
        f["detail"] = finding.detail;
        findings.push_back(std::move(f));
    }
    doc["findings"] = std::move(findings);
    return doc.dump(2) + "\n";
}

} // namespace psychsteer
