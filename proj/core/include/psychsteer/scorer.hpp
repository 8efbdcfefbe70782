#pragma once

/**
 * Text-to-trait regression. A bag-of-words ridge regressor with five
 * outputs (one per trait) trained by a closed-form least-squares solve
 * against continuous labels in [0, 1]. An MSE objective and binary
 * high/low accuracy evaluation complete the scoring contract; a remote
 * scorer speaking the same predict interface can be swapped in over HTTP.
 */

#include "psychsteer/errors.hpp"
#include "psychsteer/traits.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace psychsteer {

struct FeaturizerConfig {
    bool length_normalize = false;    // divide counts by token count
    std::size_t min_doc_freq = 2;     // drop tokens seen in fewer documents
};

// Lowercased alphanumeric-run tokens.
std::vector<std::string> scorer_tokens(std::string_view text);

class LinearTraitScorer {
public:
    LinearTraitScorer() = default;
    LinearTraitScorer(std::vector<std::string> vocabulary, std::vector<double> weights,
                      std::array<double, kTraitCount> bias, FeaturizerConfig config);

    // clamp(W f(text) + b, 0, 1); out-of-vocabulary tokens contribute zero.
    ContinuousLabels predict(std::string_view text) const;

    // Raw affine outputs before clamping; used by training diagnostics.
    std::array<double, kTraitCount> predict_raw(std::string_view text) const;

    std::vector<double> featurize(std::string_view text) const;

    const std::vector<std::string>& vocabulary() const { return vocabulary_; }
    const std::vector<double>& weights() const { return weights_; } // kTraitCount x V, row-major
    const std::array<double, kTraitCount>& bias() const { return bias_; }
    const FeaturizerConfig& config() const { return config_; }

    // Versioned flat file with an FNV-1a checksum; load-after-save yields
    // identical predictions.
    void save(const std::filesystem::path& path) const;
    static LinearTraitScorer load(const std::filesystem::path& path);

private:
    std::vector<std::string> vocabulary_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<double> weights_;
    std::array<double, kTraitCount> bias_{};
    FeaturizerConfig config_;
};

struct TrainingExample {
    std::string text;
    ContinuousLabels labels;
};

// Closed-form ridge solve per output on the featurized design matrix; the
// bias column is not regularized, so a constant-label corpus is absorbed by
// the bias exactly. Raises SingularSystem when lambda = 0 and the normal
// equations are rank-deficient.
LinearTraitScorer train_linear_scorer(const std::vector<TrainingExample>& corpus,
                                      double l2_lambda,
                                      const FeaturizerConfig& config = {});

// Mean squared error over all samples and outputs, on raw (unclamped)
// predictions.
double scorer_mse(const LinearTraitScorer& scorer, const std::vector<TrainingExample>& corpus);

// Analytic gradient of the same objective with respect to (weights, bias),
// laid out as kTraitCount x (V + 1) with the bias in the last column.
std::vector<double> scorer_mse_gradient(const LinearTraitScorer& scorer,
                                        const std::vector<TrainingExample>& corpus);

// MSE of the best constant (bias-only) predictor for the corpus.
double bias_only_mse(const std::vector<TrainingExample>& corpus);

struct LabeledText {
    std::string text;
    TraitSpec label;
};

struct AccuracyReport {
    std::array<double, kTraitCount> per_trait{};
    std::array<std::size_t, kTraitCount> counts{};
    double average = 0.0; // mean of the five per-trait accuracies
};

// Per-trait binarization thresholds. For midpoint evaluation use
// t_lo == t_hi == midpoint; scores <= t_lo are Low, > t_hi High, anything
// strictly between matches neither level.
using TraitThresholds = std::array<TertileThresholds, kTraitCount>;

TraitThresholds midpoint_thresholds(double midpoint = 0.5);

// Tertile thresholds per trait derived from a labeled training corpus.
TraitThresholds tertile_thresholds_from(const std::vector<TrainingExample>& corpus);

using TraitScorerFn = std::function<ContinuousLabels(std::string_view)>;

// A prediction is correct when its thresholded level equals the label's
// level; accuracy is computed per trait over that trait's examples.
AccuracyReport evaluate_binary_accuracy(const TraitScorerFn& scorer,
                                        const std::vector<LabeledText>& labeled,
                                        const TraitThresholds& thresholds);

// Remote scorer client: POST {base_url}/v1/score {"texts": [str]}
// -> {"scores": [[5 reals]]}.
class ExternalScorerClient {
public:
    ExternalScorerClient(std::string base_url, double timeout_seconds = 10.0);

    std::vector<ContinuousLabels> predict_batch(const std::vector<std::string>& texts) const;
    ContinuousLabels predict(std::string_view text) const;

private:
    std::string base_url_;
    double timeout_seconds_;
};

std::string render_accuracy_report(const AccuracyReport& report);

} // namespace psychsteer
