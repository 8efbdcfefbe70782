#pragma once

/**
 * Questionnaire definition, administration, rating extraction, and scoring.
 *
 * Items are Likert statements keyed to one trait each; reverse-keyed items
 * score as (scale_min + scale_max) - rating. A trait's score is the mean of
 * its keyed item scores. Administration repeats the full questionnaire over
 * several runs and reports per-trait mean and population std across runs.
 */

#include "psychsteer/errors.hpp"
#include "psychsteer/logits.hpp"
#include "psychsteer/steering.hpp"
#include "psychsteer/traits.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace psychsteer {

struct QuestionnaireItem {
    std::string item_id;
    std::string text;
    Trait trait = Trait::Openness;
    bool reverse_keyed = false;
};

struct Questionnaire {
    std::string name;
    std::vector<QuestionnaireItem> items;
    int scale_min = 1;
    int scale_max = 5;
};

struct ItemResponse {
    std::string item_id;
    int rating = 0;
    std::string raw_text;
};

struct TraitScoreReport {
    std::string questionnaire;
    int scale_min = 1;
    int scale_max = 5;
    std::size_t runs = 0;
    // per_run_scores[run][trait]
    std::vector<std::array<double, kTraitCount>> per_run_scores;
    std::array<double, kTraitCount> mean{};
    std::array<double, kTraitCount> stddev{}; // population std across runs
};

// rating if not reverse keyed, else (min+max) - rating.
double score_item(int rating, const QuestionnaireItem& item, int scale_min, int scale_max);

// Per-trait arithmetic mean of keyed item scores, items taken in
// questionnaire order. Every item must be answered exactly once.
std::array<double, kTraitCount> score_questionnaire(const std::vector<ItemResponse>& responses,
                                                    const Questionnaire& questionnaire);

// First standalone in-scale integer in the text. Integers that merely echo
// the question number ("Question 3", "Q3", "Item 2:") are skipped.
int parse_rating(std::string_view raw, int scale_min, int scale_max);

// Anything that can answer an item prompt with text.
class Responder {
public:
    virtual ~Responder() = default;
    virtual std::string respond(const std::string& prompt, const SamplerConfig& sampler) = 0;
};

// Scripted responder for tests and dry runs: answers item k with script[k]
// (cycling), ignoring the prompt.
class ScriptedResponder : public Responder {
public:
    explicit ScriptedResponder(std::vector<std::string> script);
    std::string respond(const std::string& prompt, const SamplerConfig& sampler) override;

private:
    std::vector<std::string> script_;
    std::size_t cursor_ = 0;
};

// Responder backed by a LogitSource pair: unsteered when expert is null,
// otherwise steered by the expert at policy.gamma.
class GenerationResponder : public Responder {
public:
    GenerationResponder(std::shared_ptr<LogitSource> base, std::shared_ptr<LogitSource> expert,
                        SteeringPolicy policy);
    std::string respond(const std::string& prompt, const SamplerConfig& sampler) override;

private:
    std::shared_ptr<LogitSource> base_;
    std::shared_ptr<LogitSource> expert_;
    SteeringPolicy policy_;
};

struct PersonaTemplate {
    std::string id;
    std::string pattern; // {trait}/{Trait}/{level}/{Level} placeholders
};

// Shipped templates: "instruction" ("You are a person with {level} {trait}.")
// and "alignment" (the training-format instruction).
const PersonaTemplate& persona_template(std::string_view id);

std::string render_persona(const PersonaTemplate& tmpl, const TraitSpec& spec);

// Demonstration block prepended to the persona: sampled dialogue exchanges
// exhibiting the same trait and level.
std::string render_demonstrations(const std::vector<std::pair<std::string, std::string>>& demos);

struct TranscriptEntry {
    std::size_t run = 0;
    std::string item_id;
    std::string prompt;
    std::string raw_response;
    int rating = 0;
    int attempts = 1;
};

struct AdministerOptions {
    std::string persona; // already rendered; prepended to every item prompt
    std::size_t runs = 5;
    SamplerConfig sampler = SamplerConfig::with_temperature(0.6, 0);
    int max_retries = 2; // extra attempts when a response fails to parse
};

// Queries every item per run, parses ratings, scores each run, and
// aggregates mean +- population std per trait. Transcript entries are
// appended for every attempt when a sink is given.
TraitScoreReport administer(Responder& responder, const Questionnaire& questionnaire,
                            const AdministerOptions& options,
                            std::vector<TranscriptEntry>* transcript = nullptr);

// The prompt sent for one item.
std::string item_prompt(const std::string& persona, const Questionnaire& questionnaire,
                        const QuestionnaireItem& item);

// Questionnaire definition file: JSONL with a header record
// {"name", "scale_min", "scale_max"} followed by item records
// {"item_id", "text", "trait", "reverse_keyed"}.
Questionnaire load_questionnaire(const std::filesystem::path& path);

std::string render_score_report(const TraitScoreReport& report);
std::string render_transcript(const std::vector<TranscriptEntry>& transcript);

} // namespace psychsteer
