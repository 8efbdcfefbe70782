#include "commands.hpp"

#include "psychsteer/analysis.hpp"
#include "psychsteer/io.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <iostream>
#include <map>

namespace psychsteer::cli {

namespace {

using ordered_json = nlohmann::ordered_json;

// CSV of five numeric columns, optional trait-name header row.
ScoreMatrix read_score_matrix(const std::string& path) {
    ScoreMatrix scores;
    for_each_line(path, [&](std::size_t line_no, const std::string& line) {
        std::vector<std::string> cells;
        std::size_t start = 0;
        for (;;) {
            std::size_t comma = line.find(',', start);
            cells.push_back(line.substr(
                start, comma == std::string::npos ? std::string::npos : comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (cells.size() != kTraitCount) {
            raise(errc::parse_error, path + ":" + std::to_string(line_no) + ": expected " +
                                         std::to_string(kTraitCount) + " columns, got " +
                                         std::to_string(cells.size()));
        }
        std::array<double, kTraitCount> row{};
        for (std::size_t c = 0; c < kTraitCount; ++c) {
            try {
                std::size_t used = 0;
                row[c] = std::stod(cells[c], &used);
                while (used < cells[c].size() &&
                       std::isspace(static_cast<unsigned char>(cells[c][used]))) {
                    ++used;
                }
                if (used != cells[c].size()) throw std::invalid_argument("trailing characters");
            } catch (const std::exception&) {
                if (line_no == 1) {
                    return; // header row
                }
                raise(errc::parse_error, path + ":" + std::to_string(line_no) +
                                             ": non-numeric cell \"" + cells[c] + "\"");
            }
        }
        scores.rows.push_back(row);
    });
    return scores;
}

std::vector<double> read_sample(const std::string& path) {
    std::vector<double> values;
    for_each_line(path, [&](std::size_t line_no, const std::string& line) {
        try {
            std::size_t used = 0;
            double v = std::stod(line, &used);
            values.push_back(v);
        } catch (const std::exception&) {
            raise(errc::parse_error,
                  path + ":" + std::to_string(line_no) + ": not a number: \"" + line + "\"");
        }
    });
    return values;
}

// name=path pairs from --group, or trait/level groups from a dataset file.
std::vector<std::pair<std::string, std::vector<std::string>>>
collect_groups(const std::vector<std::string>& group_specs,
               const std::optional<std::string>& dataset_path) {
    std::vector<std::pair<std::string, std::vector<std::string>>> groups;
    if (dataset_path.has_value()) {
        std::map<std::string, std::vector<std::string>> by_key;
        for (const DialogueRecord& record : read_dataset(*dataset_path)) {
            std::string key = std::string(trait_name(record.trait_spec.trait)) + "/" +
                              std::string(level_name(record.trait_spec.level));
            by_key[key].push_back(record.speaker_y);
        }
        for (auto& [name, texts] : by_key) {
            groups.emplace_back(name, std::move(texts));
        }
    }
    for (const std::string& spec : group_specs) {
        std::size_t eq = spec.find('=');
        if (eq == std::string::npos) {
            raise(errc::usage_error, "--group expects name=path, got \"" + spec + "\"");
        }
        groups.emplace_back(spec.substr(0, eq), read_lines(spec.substr(eq + 1)));
    }
    if (groups.empty()) {
        raise(errc::usage_error, "no input: give --dataset and/or --group name=path");
    }
    return groups;
}

struct AnalyzeOptions {
    // correlate
    std::string scores_path;
    std::string out_path;
    // frobenius
    std::string a_path;
    std::string b_path;
    // corpus/categories
    std::vector<std::string> group_specs;
    std::optional<std::string> dataset_path;
    std::string lexicon_path;
    std::uint64_t per_tokens = 10000;
};

} // namespace

void register_analyze(CLI::App& app) {
    CLI::App* cmd = app.add_subcommand("analyze", "Statistical analysis over scores and text");
    cmd->require_subcommand(1);

    auto correlate = std::make_shared<AnalyzeOptions>();
    CLI::App* correlate_cmd =
        cmd->add_subcommand("correlate", "Pearson 5x5 trait correlation matrix");
    correlate_cmd->add_option("--scores", correlate->scores_path, "Score matrix CSV (5 columns)")
        ->required();
    correlate_cmd->add_option("--out", correlate->out_path, "Correlation JSON output")
        ->required();
    correlate_cmd->callback([correlate]() {
        ScoreMatrix scores = read_score_matrix(correlate->scores_path);
        CorrelationMatrix matrix = pearson_matrix(scores);
        atomic_write_file(correlate->out_path, render_correlation(matrix));
        std::cerr << "analyze correlate: " << scores.rows.size() << " rows -> "
                  << correlate->out_path << "\n";
    });

    auto frobenius = std::make_shared<AnalyzeOptions>();
    CLI::App* frobenius_cmd =
        cmd->add_subcommand("frobenius", "Frobenius distance between two matrices");
    frobenius_cmd->add_option("--a", frobenius->a_path, "First correlation JSON")->required();
    frobenius_cmd->add_option("--b", frobenius->b_path, "Second correlation JSON")->required();
    frobenius_cmd->add_option("--out", frobenius->out_path, "Distance JSON output")->required();
    frobenius_cmd->callback([frobenius]() {
        Matrix a = parse_correlation(read_file(frobenius->a_path));
        Matrix b = parse_correlation(read_file(frobenius->b_path));
        double distance = frobenius_distance(a, b);
        ordered_json doc;
        doc["frobenius_distance"] = distance;
        atomic_write_file(frobenius->out_path, doc.dump(2) + "\n");
        std::cerr << "analyze frobenius: " << distance << " -> " << frobenius->out_path << "\n";
    });

    auto corpus = std::make_shared<AnalyzeOptions>();
    CLI::App* corpus_cmd = cmd->add_subcommand("corpus", "Per-group text statistics");
    corpus_cmd->add_option("--group", corpus->group_specs, "name=path, one text per line");
    corpus_cmd->add_option("--dataset", corpus->dataset_path,
                           "Dataset JSONL grouped by trait/level");
    corpus_cmd->add_option("--out", corpus->out_path, "Stats JSONL output")->required();
    corpus_cmd->callback([corpus]() {
        auto groups = collect_groups(corpus->group_specs, corpus->dataset_path);
        CorpusStats stats = corpus_statistics(groups, default_splitter());
        atomic_write_file(corpus->out_path, render_corpus_stats(stats));
        std::cerr << "analyze corpus: " << stats.groups.size() << " groups -> "
                  << corpus->out_path << "\n";
    });

    auto categories = std::make_shared<AnalyzeOptions>();
    CLI::App* categories_cmd =
        cmd->add_subcommand("categories", "Lexical category frequencies per group");
    categories_cmd->add_option("--lexicon", categories->lexicon_path, "Lexicon file")->required();
    categories_cmd->add_option("--per-tokens", categories->per_tokens,
                               "Normalization denominator (default 10000)");
    categories_cmd->add_option("--group", categories->group_specs, "name=path, one text per line");
    categories_cmd->add_option("--dataset", categories->dataset_path,
                               "Dataset JSONL grouped by trait/level");
    categories_cmd->add_option("--out", categories->out_path, "Category report JSONL output")
        ->required();
    categories_cmd->callback([categories]() {
        std::vector<LexiconCategory> lexicon = load_lexicon(categories->lexicon_path);
        auto groups = collect_groups(categories->group_specs, categories->dataset_path);
        std::vector<std::pair<std::string, CategoryFrequencyReport>> per_group;
        for (const auto& [name, texts] : groups) {
            per_group.emplace_back(name,
                                   category_frequencies(texts, lexicon, categories->per_tokens));
        }
        atomic_write_file(categories->out_path, render_category_report(per_group));
        std::cerr << "analyze categories: " << per_group.size() << " groups -> "
                  << categories->out_path << "\n";
    });

    auto welch = std::make_shared<AnalyzeOptions>();
    CLI::App* welch_cmd =
        cmd->add_subcommand("welch", "Welch's t-test between two samples");
    welch_cmd->add_option("--a", welch->a_path, "Sample A, one number per line")->required();
    welch_cmd->add_option("--b", welch->b_path, "Sample B, one number per line")->required();
    welch_cmd->add_option("--out", welch->out_path, "Result JSON output")->required();
    welch_cmd->callback([welch]() {
        std::vector<double> a = read_sample(welch->a_path);
        std::vector<double> b = read_sample(welch->b_path);
        WelchResult result = welch_t_test(a, b);
        atomic_write_file(welch->out_path, render_welch(result));
        std::cerr << "analyze welch: t=" << result.t << " p=" << result.p << " -> "
                  << welch->out_path << "\n";
    });
}

} // namespace psychsteer::cli
