#include "psychsteer/scorer.hpp"
#include "psychsteer/io.hpp"
#include "psychsteer/logits.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <map>
#include <sstream>

#include <httplib.h>

namespace psychsteer {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::vector<std::string> scorer_tokens(std::string_view text) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && !std::isalnum(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t start = i;
        while (i < text.size() && std::isalnum(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) {
            std::string token(text.substr(start, i - start));
            std::transform(token.begin(), token.end(), token.begin(),
                           [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
            tokens.push_back(std::move(token));
        }
    }
    return tokens;
}

LinearTraitScorer::LinearTraitScorer(std::vector<std::string> vocabulary,
                                     std::vector<double> weights,
                                     std::array<double, kTraitCount> bias,
                                     FeaturizerConfig config)
    : vocabulary_(std::move(vocabulary)), weights_(std::move(weights)), bias_(bias),
      config_(config) {
    if (weights_.size() != kTraitCount * vocabulary_.size()) {
        raise(errc::shape_mismatch, "weight matrix size does not match vocabulary");
    }
    for (std::size_t i = 0; i < vocabulary_.size(); ++i) {
        index_.emplace(vocabulary_[i], i);
    }
}

std::vector<double> LinearTraitScorer::featurize(std::string_view text) const {
    std::vector<double> features(vocabulary_.size(), 0.0);
    std::vector<std::string> tokens = scorer_tokens(text);
    for (const std::string& token : tokens) {
        auto it = index_.find(token);
        if (it != index_.end()) {
            features[it->second] += 1.0;
        }
    }
    if (config_.length_normalize && !tokens.empty()) {
        double inv = 1.0 / static_cast<double>(tokens.size());
        for (double& f : features) f *= inv;
    }
    return features;
}

std::array<double, kTraitCount> LinearTraitScorer::predict_raw(std::string_view text) const {
    std::vector<double> features = featurize(text);
    std::array<double, kTraitCount> out{};
    const std::size_t v = vocabulary_.size();
    for (std::size_t t = 0; t < kTraitCount; ++t) {
        double acc = bias_[t];
        const double* row = weights_.data() + t * v;
        for (std::size_t j = 0; j < v; ++j) {
            acc += row[j] * features[j];
        }
        out[t] = acc;
    }
    return out;
}

ContinuousLabels LinearTraitScorer::predict(std::string_view text) const {
    std::array<double, kTraitCount> raw = predict_raw(text);
    ContinuousLabels labels;
    for (std::size_t t = 0; t < kTraitCount; ++t) {
        labels.scores[t] = std::clamp(raw[t], 0.0, 1.0);
    }
    return labels;
}

namespace {

// Cholesky factorization in place; returns false on a non-positive pivot.
bool cholesky(std::vector<double>& g, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
        double pivot = g[k * n + k];
        for (std::size_t j = 0; j < k; ++j) {
            pivot -= g[k * n + j] * g[k * n + j];
        }
        if (!(pivot > 1e-12)) {
            return false;
        }
        double diag = std::sqrt(pivot);
        g[k * n + k] = diag;
        for (std::size_t i = k + 1; i < n; ++i) {
            double sum = g[i * n + k];
            for (std::size_t j = 0; j < k; ++j) {
                sum -= g[i * n + j] * g[k * n + j];
            }
            g[i * n + k] = sum / diag;
        }
    }
    return true;
}

void cholesky_solve(const std::vector<double>& l, std::size_t n, std::vector<double>& rhs) {
    // forward: L y = rhs
    for (std::size_t i = 0; i < n; ++i) {
        double sum = rhs[i];
        for (std::size_t j = 0; j < i; ++j) {
            sum -= l[i * n + j] * rhs[j];
        }
        rhs[i] = sum / l[i * n + i];
    }
    // backward: L^T x = y
    for (std::size_t i = n; i-- > 0;) {
        double sum = rhs[i];
        for (std::size_t j = i + 1; j < n; ++j) {
            sum -= l[j * n + i] * rhs[j];
        }
        rhs[i] = sum / l[i * n + i];
    }
}

} // namespace

LinearTraitScorer train_linear_scorer(const std::vector<TrainingExample>& corpus,
                                      double l2_lambda, const FeaturizerConfig& config) {
    if (corpus.empty()) {
        raise(errc::empty_corpus, "training corpus is empty");
    }
    if (l2_lambda < 0.0 || !std::isfinite(l2_lambda)) {
        raise(errc::usage_error, "l2 lambda must be finite and >= 0");
    }
    for (const TrainingExample& example : corpus) {
        if (example.text.empty()) {
            raise(errc::invalid_record, "training example has empty text");
        }
    }

    // Vocabulary: tokens above the document-frequency floor, sorted.
    std::map<std::string, std::size_t> doc_freq;
    for (const TrainingExample& example : corpus) {
        std::vector<std::string> tokens = scorer_tokens(example.text);
        std::sort(tokens.begin(), tokens.end());
        tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
        for (const std::string& token : tokens) {
            ++doc_freq[token];
        }
    }
    std::vector<std::string> vocabulary;
    for (const auto& [token, df] : doc_freq) {
        if (df >= config.min_doc_freq) {
            vocabulary.push_back(token);
        }
    }

    const std::size_t v = vocabulary.size();
    const std::size_t n = v + 1; // + bias column
    LinearTraitScorer probe(vocabulary, std::vector<double>(kTraitCount * v, 0.0), {}, config);

    // Normal equations G = A^T A + diag(lambda..lambda, 0), rhs = A^T Y.
    std::vector<double> g(n * n, 0.0);
    std::vector<std::array<double, kTraitCount>> rhs(n, std::array<double, kTraitCount>{});
    std::vector<double> row(n, 0.0);
    for (const TrainingExample& example : corpus) {
        std::vector<double> features = probe.featurize(example.text);
        std::copy(features.begin(), features.end(), row.begin());
        row[v] = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (row[i] == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                g[i * n + j] += row[i] * row[j];
            }
            for (std::size_t t = 0; t < kTraitCount; ++t) {
                rhs[i][t] += row[i] * example.labels.scores[t];
            }
        }
    }
    for (std::size_t i = 0; i < v; ++i) {
        g[i * n + i] += l2_lambda;
    }

    if (!cholesky(g, n)) {
        raise(errc::singular_system,
              l2_lambda == 0.0
                  ? "normal equations are rank-deficient at lambda = 0"
                  : "normal equations are numerically singular");
    }

    std::vector<double> weights(kTraitCount * v, 0.0);
    std::array<double, kTraitCount> bias{};
    std::vector<double> column(n, 0.0);
    for (std::size_t t = 0; t < kTraitCount; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            column[i] = rhs[i][t];
        }
        cholesky_solve(g, n, column);
        for (std::size_t j = 0; j < v; ++j) {
            weights[t * v + j] = column[j];
        }
        bias[t] = column[v];
    }

    return LinearTraitScorer(std::move(vocabulary), std::move(weights), bias, config);
}

double scorer_mse(const LinearTraitScorer& scorer, const std::vector<TrainingExample>& corpus) {
    if (corpus.empty()) {
        raise(errc::empty_corpus, "corpus is empty");
    }
    double total = 0.0;
    for (const TrainingExample& example : corpus) {
        std::array<double, kTraitCount> prediction = scorer.predict_raw(example.text);
        for (std::size_t t = 0; t < kTraitCount; ++t) {
            double d = prediction[t] - example.labels.scores[t];
            total += d * d;
        }
    }
    return total / (static_cast<double>(corpus.size()) * kTraitCount);
}

std::vector<double> scorer_mse_gradient(const LinearTraitScorer& scorer,
                                        const std::vector<TrainingExample>& corpus) {
    if (corpus.empty()) {
        raise(errc::empty_corpus, "corpus is empty");
    }
    const std::size_t v = scorer.vocabulary().size();
    std::vector<double> grad(kTraitCount * (v + 1), 0.0);
    double scale = 2.0 / (static_cast<double>(corpus.size()) * kTraitCount);
    for (const TrainingExample& example : corpus) {
        std::vector<double> features = scorer.featurize(example.text);
        std::array<double, kTraitCount> prediction = scorer.predict_raw(example.text);
        for (std::size_t t = 0; t < kTraitCount; ++t) {
            double residual = prediction[t] - example.labels.scores[t];
            double* row = grad.data() + t * (v + 1);
            for (std::size_t j = 0; j < v; ++j) {
                row[j] += scale * residual * features[j];
            }
            row[v] += scale * residual;
        }
    }
    return grad;
}

double bias_only_mse(const std::vector<TrainingExample>& corpus) {
    if (corpus.empty()) {
        raise(errc::empty_corpus, "corpus is empty");
    }
    std::array<double, kTraitCount> mean{};
    for (const TrainingExample& example : corpus) {
        for (std::size_t t = 0; t < kTraitCount; ++t) {
            mean[t] += example.labels.scores[t];
        }
    }
    for (double& m : mean) {
        m /= static_cast<double>(corpus.size());
    }
    double total = 0.0;
    for (const TrainingExample& example : corpus) {
        for (std::size_t t = 0; t < kTraitCount; ++t) {
            double d = mean[t] - example.labels.scores[t];
            total += d * d;
        }
    }
    return total / (static_cast<double>(corpus.size()) * kTraitCount);
}

// ---------------------------------------------------------------------------
// persistence
// ---------------------------------------------------------------------------

namespace {
constexpr std::string_view kScorerMagic = "psychsteer-scorer/1";
}

void LinearTraitScorer::save(const std::filesystem::path& path) const {
    std::ostringstream out;
    out << kScorerMagic << '\n';
    out << "length_normalize " << (config_.length_normalize ? 1 : 0) << '\n';
    out << "min_doc_freq " << config_.min_doc_freq << '\n';
    out << "vocab " << vocabulary_.size() << '\n';
    for (const std::string& token : vocabulary_) {
        out << token << '\n';
    }
    out << "bias";
    for (double b : bias_) {
        out << ' ' << format_double(b);
    }
    out << '\n';
    out << "weights\n";
    const std::size_t v = vocabulary_.size();
    for (std::size_t j = 0; j < v; ++j) {
        for (std::size_t t = 0; t < kTraitCount; ++t) {
            out << (t == 0 ? "" : " ") << format_double(weights_[t * v + j]);
        }
        out << '\n';
    }
    std::string payload = out.str();
    std::string content =
        payload + "checksum " + std::to_string(fnv1a64(payload)) + "\n";
    atomic_write_file(path, content);
}

LinearTraitScorer LinearTraitScorer::load(const std::filesystem::path& path) {
    std::string content = read_file(path);
    std::size_t checksum_pos = content.rfind("checksum ");
    if (checksum_pos == std::string::npos) {
        raise(errc::parse_error, path.string() + ": missing checksum line");
    }
    std::string payload = content.substr(0, checksum_pos);
    std::uint64_t declared = 0;
    try {
        declared = std::stoull(content.substr(checksum_pos + 9));
    } catch (const std::exception&) {
        raise(errc::parse_error, path.string() + ": malformed checksum line");
    }
    if (fnv1a64(payload) != declared) {
        raise(errc::parse_error, path.string() + ": checksum mismatch");
    }

    std::istringstream in(payload);
    std::string line;
    auto next_line = [&](const char* what) {
        if (!std::getline(in, line)) {
            raise(errc::parse_error, path.string() + ": truncated file, expected " +
                                         std::string(what));
        }
        return line;
    };

    if (next_line("magic") != kScorerMagic) {
        raise(errc::parse_error, path.string() + ": unsupported model format");
    }

    FeaturizerConfig config;
    {
        std::istringstream ls(next_line("length_normalize"));
        std::string key; int flag = 0;
        ls >> key >> flag;
        if (key != "length_normalize") {
            raise(errc::parse_error, path.string() + ": expected length_normalize");
        }
        config.length_normalize = flag != 0;
    }
    {
        std::istringstream ls(next_line("min_doc_freq"));
        std::string key;
        ls >> key >> config.min_doc_freq;
        if (key != "min_doc_freq") {
            raise(errc::parse_error, path.string() + ": expected min_doc_freq");
        }
    }
    std::size_t vocab_size = 0;
    {
        std::istringstream ls(next_line("vocab"));
        std::string key;
        ls >> key >> vocab_size;
        if (key != "vocab") {
            raise(errc::parse_error, path.string() + ": expected vocab");
        }
    }
    std::vector<std::string> vocabulary;
    vocabulary.reserve(vocab_size);
    for (std::size_t i = 0; i < vocab_size; ++i) {
        vocabulary.push_back(next_line("vocabulary token"));
    }
    std::array<double, kTraitCount> bias{};
    {
        std::istringstream ls(next_line("bias"));
        std::string key;
        ls >> key;
        if (key != "bias") {
            raise(errc::parse_error, path.string() + ": expected bias");
        }
        for (double& b : bias) {
            if (!(ls >> b)) {
                raise(errc::parse_error, path.string() + ": malformed bias line");
            }
        }
    }
    if (next_line("weights") != "weights") {
        raise(errc::parse_error, path.string() + ": expected weights");
    }
    std::vector<double> weights(kTraitCount * vocab_size, 0.0);
    for (std::size_t j = 0; j < vocab_size; ++j) {
        std::istringstream ls(next_line("weight row"));
        for (std::size_t t = 0; t < kTraitCount; ++t) {
            if (!(ls >> weights[t * vocab_size + j])) {
                raise(errc::parse_error, path.string() + ": malformed weight row");
            }
        }
    }
    return LinearTraitScorer(std::move(vocabulary), std::move(weights), bias, config);
}

// ---------------------------------------------------------------------------
// evaluation
// ---------------------------------------------------------------------------

TraitThresholds midpoint_thresholds(double midpoint) {
    TraitThresholds thresholds;
    for (TertileThresholds& t : thresholds) {
        t.t_lo = midpoint;
        t.t_hi = midpoint;
    }
    return thresholds;
}

TraitThresholds tertile_thresholds_from(const std::vector<TrainingExample>& corpus) {
    if (corpus.empty()) {
        raise(errc::empty_corpus, "threshold corpus is empty");
    }
    TraitThresholds thresholds;
    for (std::size_t t = 0; t < kTraitCount; ++t) {
        std::vector<double> column;
        column.reserve(corpus.size());
        for (const TrainingExample& example : corpus) {
            column.push_back(example.labels.scores[t]);
        }
        thresholds[t] = tertile_split(column).thresholds;
    }
    return thresholds;
}

AccuracyReport evaluate_binary_accuracy(const TraitScorerFn& scorer,
                                        const std::vector<LabeledText>& labeled,
                                        const TraitThresholds& thresholds) {
    if (labeled.empty()) {
        raise(errc::empty_evaluation_set, "no labeled examples to evaluate");
    }
    AccuracyReport report;
    std::array<std::size_t, kTraitCount> correct{};
    for (const LabeledText& example : labeled) {
        std::size_t t = static_cast<std::size_t>(example.label.trait);
        double score = scorer(example.text)[example.label.trait];
        const TertileThresholds& threshold = thresholds[t];
        std::optional<Level> predicted;
        if (score <= threshold.t_lo) {
            predicted = Level::Low;
        } else if (score > threshold.t_hi) {
            predicted = Level::High;
        }
        ++report.counts[t];
        if (predicted.has_value() && *predicted == example.label.level) {
            ++correct[t];
        }
    }
    double sum = 0.0;
    for (std::size_t t = 0; t < kTraitCount; ++t) {
        report.per_trait[t] = report.counts[t] > 0
                                  ? static_cast<double>(correct[t]) /
                                        static_cast<double>(report.counts[t])
                                  : 0.0;
        sum += report.per_trait[t];
    }
    report.average = sum / kTraitCount;
    return report;
}

// ---------------------------------------------------------------------------
// external scorer client
// ---------------------------------------------------------------------------

ExternalScorerClient::ExternalScorerClient(std::string base_url, double timeout_seconds)
    : base_url_(std::move(base_url)), timeout_seconds_(timeout_seconds) {}

std::vector<ContinuousLabels>
ExternalScorerClient::predict_batch(const std::vector<std::string>& texts) const {
    std::size_t scheme = base_url_.find("://");
    if (scheme == std::string::npos) {
        raise(errc::config_error, "scorer URL needs a scheme: " + base_url_);
    }
    std::size_t path = base_url_.find('/', scheme + 3);
    std::string host = path == std::string::npos ? base_url_ : base_url_.substr(0, path);
    std::string prefix = path == std::string::npos ? "" : base_url_.substr(path);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

    httplib::Client client(host);
    auto usec = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::duration<double>(timeout_seconds_));
    client.set_connection_timeout(usec);
    client.set_read_timeout(usec);
    client.set_write_timeout(usec);

    json request = {{"texts", texts}};
    auto started = std::chrono::steady_clock::now();
    httplib::Result res = client.Post(prefix + "/v1/score", request.dump(), "application/json");
    if (!res) {
        auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - started)
                           .count();
        raise(errc::transport_error, "score request failed: " + httplib::to_string(res.error()) +
                                         " (" + base_url_ + ", elapsed " +
                                         std::to_string(elapsed) + " ms)");
    }
    if (res->status >= 400) {
        std::string detail = "HTTP " + std::to_string(res->status);
        json body = json::parse(res->body, nullptr, false);
        if (!body.is_discarded() && body.contains("error")) {
            detail += ": " + body["error"].get<std::string>();
        }
        raise(errc::protocol_error, detail + " from " + base_url_);
    }
    json body = json::parse(res->body, nullptr, false);
    if (body.is_discarded() || !body.contains("scores") || !body["scores"].is_array()) {
        raise(errc::protocol_error, "score response missing \"scores\" array");
    }
    const json& scores = body["scores"];
    if (scores.size() != texts.size()) {
        raise(errc::protocol_error, "score response has " + std::to_string(scores.size()) +
                                        " rows for " + std::to_string(texts.size()) + " texts");
    }
    std::vector<ContinuousLabels> out;
    out.reserve(scores.size());
    for (const json& row : scores) {
        if (!row.is_array() || row.size() != kTraitCount) {
            raise(errc::protocol_error, "score rows must hold exactly 5 numbers");
        }
        ContinuousLabels labels;
        for (std::size_t t = 0; t < kTraitCount; ++t) {
            labels.scores[t] = row[t].get<double>();
        }
        out.push_back(labels);
    }
    return out;
}

ContinuousLabels ExternalScorerClient::predict(std::string_view text) const {
    return predict_batch({std::string(text)}).front();
}

std::string render_accuracy_report(const AccuracyReport& report) {
    ordered_json doc;
    ordered_json per_trait = ordered_json::object();
    for (Trait trait : kAllTraits) {
        std::size_t index = static_cast<std::size_t>(trait);
        ordered_json entry;
        entry["accuracy"] = report.per_trait[index];
        entry["examples"] = report.counts[index];
        per_trait[std::string(trait_name(trait))] = std::move(entry);
    }
    doc["per_trait"] = std::move(per_trait);
    doc["average"] = report.average;
    return doc.dump(2) + "\n";
}

} // namespace psychsteer
