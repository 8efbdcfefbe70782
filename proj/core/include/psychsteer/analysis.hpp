#pragma once

/**
 * Statistical analysis over trait scores and generated text: Pearson
 * correlation matrices across the five traits, Frobenius distance between
 * matrices, corpus-level text statistics, lexical-category frequencies,
 * and Welch's unequal-variance t-test.
 */

#include "psychsteer/errors.hpp"
#include "psychsteer/traits.hpp"

#include <array>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace psychsteer {

// Dense row-major matrix, just enough for correlation work.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

// Rows = respondents/conditions, columns = the five traits.
struct ScoreMatrix {
    std::vector<std::array<double, kTraitCount>> rows;
};

// 5x5, symmetric, unit diagonal.
using CorrelationMatrix = Matrix;

// Pearson r between every pair of trait columns. Needs >= 2 rows and
// nonzero variance in every column.
CorrelationMatrix pearson_matrix(const ScoreMatrix& scores);

// sqrt(sum (a_ij - b_ij)^2); shapes must match.
double frobenius_distance(const Matrix& a, const Matrix& b);

// --- corpus statistics ------------------------------------------------------

struct TextSplitter {
    std::function<std::vector<std::string>(std::string_view)> words;
    std::function<std::size_t(std::string_view)> sentence_count;
};

// Unicode-naive defaults: whitespace word splitting; sentences terminated by
// '.', '!' or '?' runs, with a trailing unterminated fragment counting as one.
TextSplitter default_splitter();

std::vector<std::string> split_words(std::string_view text);
std::size_t count_sentences(std::string_view text);

struct MetricStats {
    double mean = 0.0;
    double stddev = 0.0; // population
};

struct GroupStats {
    std::string group;
    std::size_t text_count = 0;
    MetricStats tokens;
    MetricStats sentences;
    MetricStats vocabulary;      // distinct tokens per text
    MetricStats sentence_length; // tokens per sentence, averaged per text
    std::size_t total_vocabulary = 0; // distinct tokens over the whole group
};

struct CorpusStats {
    std::vector<GroupStats> groups;
};

CorpusStats corpus_statistics(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& grouped_texts,
    const TextSplitter& splitter);

// --- lexical categories -----------------------------------------------------

struct LexiconCategory {
    std::string name;
    std::vector<std::string> literals; // lowercase exact matches
    std::vector<std::string> prefixes; // lowercase, match by starts_with
};

struct CategoryFrequency {
    std::string category;
    std::size_t matches = 0;
    double frequency = 0.0; // matches / total_tokens * per_tokens
};

struct CategoryFrequencyReport {
    std::size_t total_tokens = 0;
    std::uint64_t per_tokens = 0;
    std::vector<CategoryFrequency> categories;
};

// A token matches a category when it equals a literal or starts with a
// prefix entry, case-insensitively. Tokens are lowercased and stripped of
// surrounding non-alphanumeric characters before matching.
CategoryFrequencyReport category_frequencies(const std::vector<std::string>& texts,
                                             const std::vector<LexiconCategory>& lexicon,
                                             std::uint64_t per_tokens);

// Lexicon file: "[category]" header lines, one entry per line below each;
// a trailing '*' marks a prefix pattern; '#' starts a comment.
std::vector<LexiconCategory> load_lexicon(const std::filesystem::path& path);

// --- Welch's t-test ----------------------------------------------------------

struct WelchResult {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0; // two-sided
};

// Unequal-variance t statistic with Welch-Satterthwaite df; two-sided p via
// the regularized incomplete beta function.
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

// I_x(a, b), the regularized incomplete beta function; |error| <= 1e-10 over
// the t-test parameter range.
double regularized_incomplete_beta(double a, double b, double x);

// Two-sided p for a t statistic at the given degrees of freedom.
double student_t_two_sided_p(double t, double df);

// --- report rendering ---------------------------------------------------------

std::string render_correlation(const CorrelationMatrix& matrix);
CorrelationMatrix parse_correlation(const std::string& content);
std::string render_corpus_stats(const CorpusStats& stats);
std::string render_category_report(
    const std::vector<std::pair<std::string, CategoryFrequencyReport>>& per_group);
std::string render_welch(const WelchResult& result);

} // namespace psychsteer
