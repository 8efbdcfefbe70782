#include "psychsteer/psychometrics.hpp"
#include "psychsteer/io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>

namespace psychsteer {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

double score_item(int rating, const QuestionnaireItem& item, int scale_min, int scale_max) {
    if (rating < scale_min || rating > scale_max) {
        raise(errc::out_of_scale, "item " + item.item_id + ": rating " + std::to_string(rating) +
                                      " outside [" + std::to_string(scale_min) + ", " +
                                      std::to_string(scale_max) + "]");
    }
    return item.reverse_keyed ? static_cast<double>(scale_min + scale_max - rating)
                              : static_cast<double>(rating);
}

std::array<double, kTraitCount> score_questionnaire(const std::vector<ItemResponse>& responses,
                                                    const Questionnaire& questionnaire) {
    std::map<std::string, const ItemResponse*> by_id;
    std::set<std::string> known_ids;
    for (const QuestionnaireItem& item : questionnaire.items) {
        known_ids.insert(item.item_id);
    }
    for (const ItemResponse& response : responses) {
        if (!known_ids.contains(response.item_id)) {
            raise(errc::unknown_item, "response for unknown item \"" + response.item_id + "\"");
        }
        if (!by_id.emplace(response.item_id, &response).second) {
            raise(errc::duplicate_response, "item \"" + response.item_id + "\" answered twice");
        }
    }

    std::array<double, kTraitCount> sums{};
    std::array<std::size_t, kTraitCount> counts{};
    for (const QuestionnaireItem& item : questionnaire.items) {
        auto it = by_id.find(item.item_id);
        if (it == by_id.end()) {
            raise(errc::missing_item, "item \"" + item.item_id + "\" unanswered");
        }
        double keyed = score_item(it->second->rating, item, questionnaire.scale_min,
                                  questionnaire.scale_max);
        std::size_t index = static_cast<std::size_t>(item.trait);
        sums[index] += keyed;
        counts[index] += 1;
    }

    std::array<double, kTraitCount> means{};
    for (std::size_t i = 0; i < kTraitCount; ++i) {
        means[i] = counts[i] > 0 ? sums[i] / static_cast<double>(counts[i]) : 0.0;
    }
    return means;
}

namespace {

bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

// The word immediately preceding position `pos`, skipping separators like
// ':', '#', '.', ')' and whitespace between the word and the digits.
std::string preceding_word(std::string_view text, std::size_t pos) {
    std::size_t i = pos;
    while (i > 0) {
        char c = text[i - 1];
        if (std::isspace(static_cast<unsigned char>(c)) || c == ':' || c == '#' || c == '.' ||
            c == ')' || c == '-') {
            --i;
        } else {
            break;
        }
    }
    std::size_t end = i;
    while (i > 0 && std::isalpha(static_cast<unsigned char>(text[i - 1]))) {
        --i;
    }
    std::string word(text.substr(i, end - i));
    std::transform(word.begin(), word.end(), word.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return word;
}

bool is_question_prefix(const std::string& word) {
    return word == "question" || word == "item" || word == "q";
}

} // namespace

int parse_rating(std::string_view raw, int scale_min, int scale_max) {
    std::size_t i = 0;
    while (i < raw.size()) {
        if (!std::isdigit(static_cast<unsigned char>(raw[i]))) {
            ++i;
            continue;
        }
        std::size_t start = i;
        while (i < raw.size() && std::isdigit(static_cast<unsigned char>(raw[i]))) {
            ++i;
        }
        // standalone: not embedded in a word on either side
        bool left_ok = start == 0 || !is_word_char(raw[start - 1]);
        bool right_ok = i == raw.size() || !is_word_char(raw[i]);
        if (!left_ok || !right_ok) {
            continue;
        }
        if (is_question_prefix(preceding_word(raw, start))) {
            continue; // echoes the question number, not an answer
        }
        int value = 0;
        for (std::size_t k = start; k < i; ++k) {
            value = value * 10 + (raw[k] - '0');
            if (value > scale_max + 1000) break; // overflow guard on long digit runs
        }
        if (value >= scale_min && value <= scale_max) {
            return value;
        }
    }
    raise(errc::unparseable_response, "no in-scale integer in response: \"" + std::string(raw) +
                                          "\" (scale " + std::to_string(scale_min) + ".." +
                                          std::to_string(scale_max) + ")");
}

ScriptedResponder::ScriptedResponder(std::vector<std::string> script)
    : script_(std::move(script)) {
    if (script_.empty()) {
        raise(errc::responder_failure, "scripted responder needs at least one line");
    }
}

std::string ScriptedResponder::respond(const std::string&, const SamplerConfig&) {
    std::string out = script_[cursor_ % script_.size()];
    ++cursor_;
    return out;
}

GenerationResponder::GenerationResponder(std::shared_ptr<LogitSource> base,
                                         std::shared_ptr<LogitSource> expert,
                                         SteeringPolicy policy)
    : base_(std::move(base)), expert_(std::move(expert)), policy_(std::move(policy)) {
    if (base_ == nullptr) {
        raise(errc::config_error, "generation responder needs a base source");
    }
}

std::string GenerationResponder::respond(const std::string& prompt,
                                         const SamplerConfig& sampler) {
    GenerationResult result =
        expert_ != nullptr ? generate_steered(*base_, *expert_, prompt, policy_, sampler)
                           : generate_unsteered(*base_, prompt, policy_, sampler);
    return result.text;
}

const PersonaTemplate& persona_template(std::string_view id) {
    static const PersonaTemplate instruction{"instruction",
                                             "You are a person with {level} {trait}."};
    static const PersonaTemplate alignment{
        "alignment",
        "You are a person with the following Big Five personality trait: {Trait} - {level}."};
    if (id == instruction.id) return instruction;
    if (id == alignment.id) return alignment;
    raise(errc::config_error, "unknown persona template \"" + std::string(id) +
                                  "\" (known: instruction, alignment)");
}

std::string render_persona(const PersonaTemplate& tmpl, const TraitSpec& spec) {
    std::string out = tmpl.pattern;
    auto replace_all = [&](std::string_view placeholder, std::string_view value) {
        std::size_t pos = 0;
        while ((pos = out.find(placeholder, pos)) != std::string::npos) {
            out.replace(pos, placeholder.size(), value);
            pos += value.size();
        }
    };
    replace_all("{trait}", trait_name(spec.trait));
    replace_all("{Trait}", trait_display_name(spec.trait));
    replace_all("{level}", level_name(spec.level));
    replace_all("{Level}", spec.level == Level::High ? "High" : "Low");
    return out;
}

std::string render_demonstrations(const std::vector<std::pair<std::string, std::string>>& demos) {
    if (demos.empty()) {
        return "";
    }
    std::string out =
        "Here are " + std::to_string(demos.size()) +
        " examples of how people like you have responded in different situations. "
        "Pay attention to how they approach communication and problem-solving.\n\n";
    for (const auto& [speaker_x, speaker_y] : demos) {
        out += "Speaker X: " + speaker_x + "\n";
        out += "Speaker Y: " + speaker_y + "\n\n";
    }
    return out;
}

std::string item_prompt(const std::string& persona, const Questionnaire& questionnaire,
                        const QuestionnaireItem& item) {
    std::string prompt;
    if (!persona.empty()) {
        prompt += persona;
        prompt += "\n\n";
    }
    prompt += "Statement: " + item.text + "\n";
    prompt += "Rate how accurately this statement describes you on a scale from " +
              std::to_string(questionnaire.scale_min) + " (strongly disagree) to " +
              std::to_string(questionnaire.scale_max) +
              " (strongly agree). Answer with a single number.";
    return prompt;
}

TraitScoreReport administer(Responder& responder, const Questionnaire& questionnaire,
                            const AdministerOptions& options,
                            std::vector<TranscriptEntry>* transcript) {
    if (options.runs < 1) {
        raise(errc::usage_error, "administer needs runs >= 1");
    }

    TraitScoreReport report;
    report.questionnaire = questionnaire.name;
    report.scale_min = questionnaire.scale_min;
    report.scale_max = questionnaire.scale_max;
    report.runs = options.runs;

    for (std::size_t run = 0; run < options.runs; ++run) {
        std::vector<ItemResponse> responses;
        responses.reserve(questionnaire.items.size());
        for (std::size_t item_index = 0; item_index < questionnaire.items.size(); ++item_index) {
            const QuestionnaireItem& item = questionnaire.items[item_index];
            std::string prompt = item_prompt(options.persona, questionnaire, item);

            std::optional<int> rating;
            std::string raw;
            int attempts = 0;
            std::string parse_detail;
            while (attempts <= options.max_retries && !rating.has_value()) {
                ++attempts;
                SamplerConfig sampler = options.sampler;
                sampler.seed = derive_step_seed(
                    options.sampler.seed,
                    (run << 24) ^ (item_index << 4) ^ static_cast<std::uint64_t>(attempts));
                try {
                    raw = responder.respond(prompt, sampler);
                } catch (const std::exception& e) {
                    raise(errc::responder_failure,
                          "item " + item.item_id + ": " + e.what());
                }
                try {
                    rating = parse_rating(raw, questionnaire.scale_min, questionnaire.scale_max);
                } catch (const Error& e) {
                    parse_detail = e.what();
                }
                if (transcript != nullptr) {
                    transcript->push_back({run, item.item_id, prompt, raw,
                                           rating.value_or(0), attempts});
                }
            }
            if (!rating.has_value()) {
                raise(errc::unparseable_response,
                      "item " + item.item_id + " after " + std::to_string(attempts) +
                          " attempts: " + parse_detail);
            }
            responses.push_back({item.item_id, *rating, raw});
        }
        report.per_run_scores.push_back(score_questionnaire(responses, questionnaire));
    }

    for (std::size_t t = 0; t < kTraitCount; ++t) {
        double mean = 0.0;
        for (const auto& run_scores : report.per_run_scores) {
            mean += run_scores[t];
        }
        mean /= static_cast<double>(report.runs);
        double var = 0.0;
        for (const auto& run_scores : report.per_run_scores) {
            var += (run_scores[t] - mean) * (run_scores[t] - mean);
        }
        var /= static_cast<double>(report.runs);
        report.mean[t] = mean;
        report.stddev[t] = std::sqrt(var);
    }
    return report;
}

Questionnaire load_questionnaire(const std::filesystem::path& path) {
    Questionnaire questionnaire;
    bool header_seen = false;
    std::set<std::string> ids;
    for_each_line(path, [&](std::size_t line_no, const std::string& line) {
        json doc = json::parse(line, nullptr, false);
        if (doc.is_discarded() || !doc.is_object()) {
            raise(errc::parse_error,
                  path.string() + ":" + std::to_string(line_no) + ": not a JSON object");
        }
        try {
            if (!header_seen) {
                questionnaire.name = doc.at("name").get<std::string>();
                questionnaire.scale_min = doc.at("scale_min").get<int>();
                questionnaire.scale_max = doc.at("scale_max").get<int>();
                if (questionnaire.scale_min >= questionnaire.scale_max) {
                    raise(errc::parse_error, path.string() + ":" + std::to_string(line_no) +
                                                 ": scale_min must be < scale_max");
                }
                header_seen = true;
                return;
            }
            QuestionnaireItem item;
            item.item_id = doc.at("item_id").get<std::string>();
            item.text = doc.at("text").get<std::string>();
            item.trait = parse_trait(doc.at("trait").get<std::string>());
            item.reverse_keyed = doc.at("reverse_keyed").get<bool>();
            if (!ids.insert(item.item_id).second) {
                raise(errc::parse_error, path.string() + ":" + std::to_string(line_no) +
                                             ": duplicate item_id \"" + item.item_id + "\"");
            }
            questionnaire.items.push_back(std::move(item));
        } catch (const json::exception& e) {
            raise(errc::parse_error,
                  path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    });
    if (!header_seen) {
        raise(errc::parse_error, path.string() + ": missing header record");
    }
    std::array<bool, kTraitCount> covered{};
    for (const QuestionnaireItem& item : questionnaire.items) {
        covered[static_cast<std::size_t>(item.trait)] = true;
    }
    for (Trait trait : kAllTraits) {
        if (!covered[static_cast<std::size_t>(trait)]) {
            raise(errc::parse_error, path.string() + ": no items for trait " +
                                         std::string(trait_name(trait)));
        }
    }
    return questionnaire;
}

std::string render_score_report(const TraitScoreReport& report) {
    ordered_json doc;
    doc["questionnaire"] = report.questionnaire;
    doc["scale_min"] = report.scale_min;
    doc["scale_max"] = report.scale_max;
    doc["runs"] = report.runs;
    ordered_json traits = ordered_json::object();
    for (Trait trait : kAllTraits) {
        std::size_t index = static_cast<std::size_t>(trait);
        ordered_json entry;
        entry["mean"] = report.mean[index];
        entry["stddev"] = report.stddev[index];
        ordered_json runs = ordered_json::array();
        for (const auto& run_scores : report.per_run_scores) {
            runs.push_back(run_scores[index]);
        }
        entry["per_run"] = std::move(runs);
        traits[std::string(trait_name(trait))] = std::move(entry);
    }
    doc["traits"] = std::move(traits);
    return doc.dump(2) + "\n";
}

std::string render_transcript(const std::vector<TranscriptEntry>& transcript) {
    std::string out;
    for (const TranscriptEntry& entry : transcript) {
        ordered_json doc;
        doc["run"] = entry.run;
        doc["item_id"] = entry.item_id;
        doc["prompt"] = entry.prompt;
        doc["raw_response"] = entry.raw_response;
        doc["rating"] = entry.rating;
        doc["attempts"] = entry.attempts;
        out += doc.dump();
        out += '\n';
    }
    return out;
}

} // namespace psychsteer
