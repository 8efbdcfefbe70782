#include "psychsteer/analysis.hpp"
#include "psychsteer/io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

namespace psychsteer {

using ordered_json = nlohmann::ordered_json;
using json = nlohmann::json;

CorrelationMatrix pearson_matrix(const ScoreMatrix& scores) {
    const std::size_t n = scores.rows.size();
    if (n < 2) {
        raise(errc::too_few_values,
              "correlation needs at least 2 rows, got " + std::to_string(n));
    }

    std::array<double, kTraitCount> mean{};
    for (const auto& row : scores.rows) {
        for (std::size_t c = 0; c < kTraitCount; ++c) {
            if (!std::isfinite(row[c])) {
                raise(errc::non_finite, "score matrix contains a non-finite entry");
            }
            mean[c] += row[c];
        }
    }
    for (double& m : mean) {
        m /= static_cast<double>(n);
    }

    std::array<std::array<double, kTraitCount>, kTraitCount> cov{};
    for (const auto& row : scores.rows) {
        for (std::size_t i = 0; i < kTraitCount; ++i) {
            for (std::size_t j = i; j < kTraitCount; ++j) {
                cov[i][j] += (row[i] - mean[i]) * (row[j] - mean[j]);
            }
        }
    }

    for (std::size_t c = 0; c < kTraitCount; ++c) {
        if (cov[c][c] == 0.0) {
            raise(errc::degenerate_column, "trait column \"" +
                                               std::string(trait_name(kAllTraits[c])) +
                                               "\" has zero variance");
        }
    }

    CorrelationMatrix out(kTraitCount, kTraitCount);
    for (std::size_t i = 0; i < kTraitCount; ++i) {
        for (std::size_t j = i; j < kTraitCount; ++j) {
            double r = i == j ? 1.0 : cov[i][j] / std::sqrt(cov[i][i] * cov[j][j]);
            r = std::clamp(r, -1.0, 1.0);
            out.at(i, j) = r;
            out.at(j, i) = r;
        }
    }
    return out;
}

double frobenius_distance(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows || a.cols != b.cols) {
        raise(errc::shape_mismatch, "matrix shapes differ: " + std::to_string(a.rows) + "x" +
                                        std::to_string(a.cols) + " vs " + std::to_string(b.rows) +
                                        "x" + std::to_string(b.cols));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        double d = a.data[i] - b.data[i];
        sum += d * d;
    }
    return std::sqrt(sum);
}

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) {
            words.emplace_back(text.substr(start, i - start));
        }
    }
    return words;
}

std::size_t count_sentences(std::string_view text) {
    std::size_t count = 0;
    bool in_sentence = false;
    std::size_t i = 0;
    while (i < text.size()) {
        char c = text[i];
        if (c == '.' || c == '!' || c == '?') {
            if (in_sentence) {
                ++count;
                in_sentence = false;
            }
            while (i < text.size() && (text[i] == '.' || text[i] == '!' || text[i] == '?')) ++i;
            continue;
        }
        if (!std::isspace(static_cast<unsigned char>(c))) {
            in_sentence = true;
        }
        ++i;
    }
    if (in_sentence) {
        ++count; // trailing unterminated fragment
    }
    return count;
}

TextSplitter default_splitter() {
    return {[](std::string_view text) { return split_words(text); },
            [](std::string_view text) { return count_sentences(text); }};
}

namespace {

MetricStats stats_of(const std::vector<double>& values) {
    MetricStats stats;
    if (values.empty()) {
        return stats;
    }
    for (double v : values) stats.mean += v;
    stats.mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - stats.mean) * (v - stats.mean);
    var /= static_cast<double>(values.size());
    stats.stddev = std::sqrt(var);
    return stats;
}

std::string normalize_token(std::string_view token) {
    std::size_t begin = 0;
    std::size_t end = token.size();
    while (begin < end && !std::isalnum(static_cast<unsigned char>(token[begin]))) ++begin;
    while (end > begin && !std::isalnum(static_cast<unsigned char>(token[end - 1]))) --end;
    std::string out(token.substr(begin, end - begin));
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

} // namespace

CorpusStats corpus_statistics(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& grouped_texts,
    const TextSplitter& splitter) {
    CorpusStats stats;
    for (const auto& [name, texts] : grouped_texts) {
        if (texts.empty()) {
            raise(errc::empty_group, "group \"" + name + "\" has no texts");
        }
        GroupStats group;
        group.group = name;
        group.text_count = texts.size();

        std::vector<double> token_counts, sentence_counts, vocab_sizes, sentence_lengths;
        std::set<std::string> group_vocab;
        for (const std::string& text : texts) {
            std::vector<std::string> words = splitter.words(text);
            std::size_t sentences = splitter.sentence_count(text);
            std::set<std::string> text_vocab(words.begin(), words.end());
            group_vocab.insert(text_vocab.begin(), text_vocab.end());

            token_counts.push_back(static_cast<double>(words.size()));
            sentence_counts.push_back(static_cast<double>(sentences));
            vocab_sizes.push_back(static_cast<double>(text_vocab.size()));
            sentence_lengths.push_back(
                sentences > 0 ? static_cast<double>(words.size()) / static_cast<double>(sentences)
                              : 0.0);
        }

        group.tokens = stats_of(token_counts);
        group.sentences = stats_of(sentence_counts);
        group.vocabulary = stats_of(vocab_sizes);
        group.sentence_length = stats_of(sentence_lengths);
        group.total_vocabulary = group_vocab.size();
        stats.groups.push_back(std::move(group));
    }
    return stats;
}

CategoryFrequencyReport category_frequencies(const std::vector<std::string>& texts,
                                             const std::vector<LexiconCategory>& lexicon,
                                             std::uint64_t per_tokens) {
    if (per_tokens == 0) {
        raise(errc::usage_error, "per_tokens must be > 0");
    }
    CategoryFrequencyReport report;
    report.per_tokens = per_tokens;

    std::vector<std::size_t> matches(lexicon.size(), 0);
    for (const std::string& text : texts) {
        for (const std::string& raw : split_words(text)) {
            std::string token = normalize_token(raw);
            if (token.empty()) {
                continue;
            }
            ++report.total_tokens;
            for (std::size_t c = 0; c < lexicon.size(); ++c) {
                const LexiconCategory& category = lexicon[c];
                bool hit = std::find(category.literals.begin(), category.literals.end(), token) !=
                           category.literals.end();
                if (!hit) {
                    for (const std::string& prefix : category.prefixes) {
                        if (token.starts_with(prefix)) {
                            hit = true;
                            break;
                        }
                    }
                }
                if (hit) {
                    ++matches[c];
                }
            }
        }
    }
    if (report.total_tokens == 0) {
        raise(errc::empty_corpus, "no tokens in the corpus");
    }

    for (std::size_t c = 0; c < lexicon.size(); ++c) {
        CategoryFrequency freq;
        freq.category = lexicon[c].name;
        freq.matches = matches[c];
        freq.frequency = static_cast<double>(matches[c]) /
                         static_cast<double>(report.total_tokens) *
                         static_cast<double>(per_tokens);
        report.categories.push_back(std::move(freq));
    }
    return report;
}

std::vector<LexiconCategory> load_lexicon(const std::filesystem::path& path) {
    std::vector<LexiconCategory> lexicon;
    for_each_line(path, [&](std::size_t line_no, const std::string& raw) {
        std::string line = raw;
        std::size_t comment = line.find('#');
        if (comment != std::string::npos) {
            line = line.substr(0, comment);
        }
        while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) {
            line.pop_back();
        }
        std::size_t start = 0;
        while (start < line.size() && std::isspace(static_cast<unsigned char>(line[start]))) {
            ++start;
        }
        line = line.substr(start);
        if (line.empty()) {
            return;
        }
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) {
                raise(errc::parse_error, path.string() + ":" + std::to_string(line_no) +
                                             ": malformed category header");
            }
            LexiconCategory category;
            category.name = line.substr(1, line.size() - 2);
            lexicon.push_back(std::move(category));
            return;
        }
        if (lexicon.empty()) {
            raise(errc::parse_error, path.string() + ":" + std::to_string(line_no) +
                                         ": entry before any [category] header");
        }
        std::transform(line.begin(), line.end(), line.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (line.back() == '*') {
            line.pop_back();
            if (line.empty()) {
                raise(errc::parse_error, path.string() + ":" + std::to_string(line_no) +
                                             ": bare '*' entry");
            }
            lexicon.back().prefixes.push_back(std::move(line));
        } else {
            lexicon.back().literals.push_back(std::move(line));
        }
    });
    for (const LexiconCategory& category : lexicon) {
        if (category.literals.empty() && category.prefixes.empty()) {
            raise(errc::parse_error,
                  path.string() + ": category \"" + category.name + "\" has no entries");
        }
    }
    return lexicon;
}

// ---------------------------------------------------------------------------
// Welch's t-test
// ---------------------------------------------------------------------------

namespace {

// Continued-fraction evaluation of the incomplete beta function (Lentz).
double betacf(double a, double b, double x) {
    constexpr int kMaxIterations = 400;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;

    double qab = a + b;
    double qap = a + 1.0;
    double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIterations; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) {
            break;
        }
    }
    return h;
}

} // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                      a * std::log(x) + b * std::log1p(-x);
    double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * betacf(a, b, x) / a;
    }
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
    if (df <= 0.0) {
        raise(errc::degenerate_sample, "degrees of freedom must be positive");
    }
    if (t == 0.0) {
        return 1.0;
    }
    double x = df / (df + t * t);
    return regularized_incomplete_beta(df / 2.0, 0.5, x);
}

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) {
        raise(errc::too_few_values, "each sample needs at least 2 values");
    }
    auto sample_stats = [](std::span<const double> sample, const char* name) {
        double mean = 0.0;
        for (double v : sample) {
            if (!std::isfinite(v)) {
                raise(errc::non_finite, std::string(name) + " contains a non-finite value");
            }
            mean += v;
        }
        mean /= static_cast<double>(sample.size());
        double var = 0.0;
        for (double v : sample) var += (v - mean) * (v - mean);
        var /= static_cast<double>(sample.size() - 1); // sample variance
        if (var <= 0.0) {
            raise(errc::degenerate_sample, std::string(name) + " has zero variance");
        }
        return std::make_pair(mean, var);
    };

    auto [mean_a, var_a] = sample_stats(a, "sample a");
    auto [mean_b, var_b] = sample_stats(b, "sample b");
    double na = static_cast<double>(a.size());
    double nb = static_cast<double>(b.size());

    double se_a = var_a / na;
    double se_b = var_b / nb;
    double se = se_a + se_b;

    WelchResult result;
    result.t = (mean_a - mean_b) / std::sqrt(se);
    result.df = se * se / (se_a * se_a / (na - 1.0) + se_b * se_b / (nb - 1.0));
    result.p = student_t_two_sided_p(result.t, result.df);
    return result;
}

// ---------------------------------------------------------------------------
// report rendering
// ---------------------------------------------------------------------------

std::string render_correlation(const CorrelationMatrix& matrix) {
    ordered_json doc;
    ordered_json traits = ordered_json::array();
    for (Trait trait : kAllTraits) {
        traits.push_back(std::string(trait_name(trait)));
    }
    if (matrix.rows == kTraitCount && matrix.cols == kTraitCount) {
        doc["traits"] = std::move(traits);
    }
    ordered_json rows = ordered_json::array();
    for (std::size_t r = 0; r < matrix.rows; ++r) {
        ordered_json row = ordered_json::array();
        for (std::size_t c = 0; c < matrix.cols; ++c) {
            row.push_back(matrix.at(r, c));
        }
        rows.push_back(std::move(row));
    }
    doc["matrix"] = std::move(rows);
    return doc.dump(2) + "\n";
}

CorrelationMatrix parse_correlation(const std::string& content) {
    json doc = json::parse(content, nullptr, false);
    if (doc.is_discarded() || !doc.contains("matrix") || !doc["matrix"].is_array()) {
        raise(errc::parse_error, "correlation file needs a \"matrix\" array");
    }
    const json& rows = doc["matrix"];
    Matrix out;
    out.rows = rows.size();
    for (const json& row : rows) {
        if (!row.is_array() || (out.cols != 0 && row.size() != out.cols)) {
            raise(errc::parse_error, "correlation matrix rows have inconsistent lengths");
        }
        out.cols = row.size();
        for (const json& cell : row) {
            out.data.push_back(cell.get<double>());
        }
    }
    if (out.rows == 0 || out.cols == 0) {
        raise(errc::parse_error, "correlation matrix is empty");
    }
    return out;
}

std::string render_corpus_stats(const CorpusStats& stats) {
    std::string out;
    for (const GroupStats& group : stats.groups) {
        ordered_json doc;
        doc["group"] = group.group;
        doc["texts"] = group.text_count;
        auto metric = [](const MetricStats& m) {
            ordered_json j;
            j["mean"] = m.mean;
            j["stddev"] = m.stddev;
            return j;
        };
        doc["tokens"] = metric(group.tokens);
        doc["sentences"] = metric(group.sentences);
        doc["vocabulary"] = metric(group.vocabulary);
        doc["sentence_length"] = metric(group.sentence_length);
        doc["total_vocabulary"] = group.total_vocabulary;
        out += doc.dump();
        out += '\n';
    }
    return out;
}

std::string render_category_report(
    const std::vector<std::pair<std::string, CategoryFrequencyReport>>& per_group) {
    std::string out;
    for (const auto& [group, report] : per_group) {
        for (const CategoryFrequency& freq : report.categories) {
            ordered_json doc;
            doc["group"] = group;
            doc["category"] = freq.category;
            doc["matches"] = freq.matches;
            doc["total_tokens"] = report.total_tokens;
            doc["per_tokens"] = report.per_tokens;
            doc["frequency"] = freq.frequency;
            out += doc.dump();
            out += '\n';
        }
    }
    return out;
}

std::string render_welch(const WelchResult& result) {
    ordered_json doc;
    doc["t"] = result.t;
    doc["df"] = result.df;
    doc["p"] = result.p;
    return doc.dump(2) + "\n";
}

} // namespace psychsteer
