#include "psychsteer/backends.hpp"

#include <nlohmann/json.hpp>

#include <cctype>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <httplib.h>

namespace psychsteer {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Tokenizers
// ---------------------------------------------------------------------------

WhitespaceTokenizer::WhitespaceTokenizer(std::vector<std::string> words)
    : words_(std::move(words)) {
    for (std::size_t i = 0; i < words_.size(); ++i) {
        if (words_[i].empty()) {
            raise(errc::parse_error, "vocabulary word at index " + std::to_string(i) + " is empty");
        }
        auto [it, inserted] = index_.emplace(words_[i], static_cast<TokenId>(i));
        if (!inserted) {
            raise(errc::parse_error, "duplicate vocabulary word: " + words_[i]);
        }
    }
}

std::vector<TokenId> WhitespaceTokenizer::encode(std::string_view text) const {
    std::vector<TokenId> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) {
            std::string word(text.substr(start, i - start));
            auto it = index_.find(word);
            if (it == index_.end()) {
                raise(errc::unknown_token, "word not in vocabulary: \"" + word + "\"");
            }
            out.push_back(it->second);
        }
    }
    return out;
}

std::string WhitespaceTokenizer::decode(std::span<const TokenId> tokens) const {
    std::string out;
    for (TokenId t : tokens) {
        if (t < 0 || static_cast<std::size_t>(t) >= words_.size()) {
            raise(errc::unknown_token, "token id out of range: " + std::to_string(t));
        }
        out += words_[static_cast<std::size_t>(t)];
        out += ' ';
    }
    return out;
}

std::vector<TokenId> ByteTokenizer::encode(std::string_view text) const {
    std::vector<TokenId> out;
    out.reserve(text.size());
    for (unsigned char c : text) {
        out.push_back(static_cast<TokenId>(c));
    }
    return out;
}

std::string ByteTokenizer::decode(std::span<const TokenId> tokens) const {
    std::string out;
    out.reserve(tokens.size());
    for (TokenId t : tokens) {
        if (t < 0 || t > 255) {
            raise(errc::unknown_token, "byte token out of range: " + std::to_string(t));
        }
        out += static_cast<char>(static_cast<unsigned char>(t));
    }
    return out;
}

// ---------------------------------------------------------------------------
// ToyNgramModel
// ---------------------------------------------------------------------------

ToyNgramModel::ToyNgramModel(std::size_t order, std::size_t vocab_size, double alpha)
    : order_(order), vocab_size_(vocab_size), alpha_(alpha) {
    if (order_ < 1) {
        raise(errc::parse_error, "n-gram order must be >= 1");
    }
    if (vocab_size_ < 1) {
        raise(errc::parse_error, "vocab size must be >= 1");
    }
    if (!(alpha_ > 0.0)) {
        raise(errc::parse_error, "smoothing alpha must be > 0");
    }
    // The unigram row always exists so backoff terminates.
    counts_.emplace(std::vector<TokenId>{}, std::vector<double>(vocab_size_, 0.0));
}

ToyNgramModel ToyNgramModel::from_sequences(std::size_t order, std::size_t vocab_size,
                                            double alpha,
                                            const std::vector<std::vector<TokenId>>& sequences) {
    ToyNgramModel model(order, vocab_size, alpha);
    for (const auto& seq : sequences) {
        for (std::size_t pos = 0; pos < seq.size(); ++pos) {
            TokenId next = seq[pos];
            for (std::size_t len = 0; len <= model.order_ && len <= pos; ++len) {
                std::span<const TokenId> ctx(seq.data() + pos - len, len);
                model.add_count(ctx, next);
            }
        }
    }
    return model;
}

void ToyNgramModel::add_count(std::span<const TokenId> context, TokenId next, double amount) {
    if (context.size() > order_) {
        context = context.subspan(context.size() - order_);
    }
    if (next < 0 || static_cast<std::size_t>(next) >= vocab_size_) {
        raise(errc::unknown_token, "token id out of range: " + std::to_string(next));
    }
    for (TokenId t : context) {
        if (t < 0 || static_cast<std::size_t>(t) >= vocab_size_) {
            raise(errc::unknown_token, "context token out of range: " + std::to_string(t));
        }
    }
    std::vector<TokenId> key(context.begin(), context.end());
    auto it = counts_.find(key);
    if (it == counts_.end()) {
        it = counts_.emplace(std::move(key), std::vector<double>(vocab_size_, 0.0)).first;
    }
    it->second[static_cast<std::size_t>(next)] += amount;
}

const std::vector<double>* ToyNgramModel::find_row(std::span<const TokenId> context) const {
    std::size_t max_len = std::min(order_, context.size());
    for (std::size_t len = max_len + 1; len-- > 0;) {
        std::vector<TokenId> key(context.end() - static_cast<std::ptrdiff_t>(len), context.end());
        auto it = counts_.find(key);
        if (it != counts_.end()) {
            return &it->second;
        }
    }
    return nullptr;
}

LogitVector ToyNgramModel::next_logits(std::span<const TokenId> context) const {
    for (TokenId t : context) {
        if (t < 0 || static_cast<std::size_t>(t) >= vocab_size_) {
            raise(errc::unknown_token, "context token out of range: " + std::to_string(t));
        }
    }
    const std::vector<double>* row = find_row(context);
    LogitVector logits;
    logits.values.resize(vocab_size_);
    for (std::size_t i = 0; i < vocab_size_; ++i) {
        double count = row != nullptr ? (*row)[i] : 0.0;
        logits.values[i] = std::log(count + alpha_);
    }
    return logits;
}

// ---------------------------------------------------------------------------
// ToyTextModel
// ---------------------------------------------------------------------------

ToyTextModel::ToyTextModel(std::string model_id, VocabSpec vocab,
                           std::shared_ptr<const Tokenizer> tokenizer, ToyNgramModel model)
    : model_id_(std::move(model_id)), vocab_(std::move(vocab)), tokenizer_(std::move(tokenizer)),
      model_(std::move(model)) {
    if (tokenizer_ == nullptr) {
        raise(errc::parse_error, "toy model needs a tokenizer");
    }
    if (vocab_.size != tokenizer_->vocab_size() || vocab_.size != model_.vocab_size()) {
        raise(errc::vocab_mismatch, "tokenizer, model and vocab spec sizes disagree");
    }
}

std::shared_ptr<ToyTextModel> ToyTextModel::from_corpus(std::string model_id, std::string vocab_id,
                                                        std::vector<std::string> words,
                                                        const std::vector<std::string>& corpus_lines,
                                                        std::size_t order, double alpha) {
    auto tokenizer = std::make_shared<WhitespaceTokenizer>(std::move(words));
    std::vector<std::vector<TokenId>> sequences;
    sequences.reserve(corpus_lines.size());
    for (const std::string& line : corpus_lines) {
        sequences.push_back(tokenizer->encode(line));
    }
    ToyNgramModel model =
        ToyNgramModel::from_sequences(order, tokenizer->vocab_size(), alpha, sequences);
    VocabSpec vocab{std::move(vocab_id), tokenizer->vocab_size()};
    return std::make_shared<ToyTextModel>(std::move(model_id), std::move(vocab),
                                          std::move(tokenizer), std::move(model));
}

LogitVector ToyTextModel::next_logits(std::span<const TokenId> context) {
    return model_.next_logits(context);
}

std::vector<TokenId> ToyTextModel::encode(std::string_view text) {
    return tokenizer_->encode(text);
}

std::string ToyTextModel::decode(std::span<const TokenId> tokens) {
    return tokenizer_->decode(tokens);
}

std::shared_ptr<ToyTextModel> load_toy_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        raise(errc::io_error, "cannot open toy model file: " + path.string());
    }
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        raise(errc::parse_error, "toy model file " + path.string() + ": " + e.what());
    }

    try {
        std::string vocab_id = doc.at("vocab_id").get<std::string>();
        std::string model_id = doc.value("model_id", path.stem().string());
        std::string tokenizer_kind = doc.value("tokenizer", std::string("whitespace"));
        std::size_t order = doc.value("order", std::size_t{1});
        double alpha = doc.value("alpha", 1.0);
        std::vector<std::string> corpus = doc.value("corpus", std::vector<std::string>{});

        if (tokenizer_kind == "whitespace") {
            std::vector<std::string> words = doc.at("vocab").get<std::vector<std::string>>();
            return ToyTextModel::from_corpus(std::move(model_id), std::move(vocab_id),
                                             std::move(words), corpus, order, alpha);
        }
        if (tokenizer_kind == "byte") {
            auto tokenizer = std::make_shared<ByteTokenizer>();
            std::vector<std::vector<TokenId>> sequences;
            for (const std::string& line : corpus) {
                sequences.push_back(tokenizer->encode(line));
            }
            ToyNgramModel model = ToyNgramModel::from_sequences(order, 256, alpha, sequences);
            VocabSpec vocab{std::move(vocab_id), 256};
            return std::make_shared<ToyTextModel>(std::move(model_id), std::move(vocab),
                                                  std::move(tokenizer), std::move(model));
        }
        raise(errc::parse_error, "unknown tokenizer kind: " + tokenizer_kind);
    } catch (const json::exception& e) {
        raise(errc::parse_error, "toy model file " + path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Remote client
// ---------------------------------------------------------------------------

namespace {

struct ParsedUrl {
    std::string host_port; // scheme://host:port for httplib::Client
    std::string path_prefix;
};

ParsedUrl split_url(const std::string& base_url) {
    // httplib::Client accepts scheme://host:port; any path suffix must be
    // carried separately.
    std::size_t scheme = base_url.find("://");
    if (scheme == std::string::npos) {
        raise(errc::config_error, "endpoint URL needs a scheme: " + base_url);
    }
    std::size_t path = base_url.find('/', scheme + 3);
    if (path == std::string::npos) {
        return {base_url, ""};
    }
    std::string prefix = base_url.substr(path);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {base_url.substr(0, path), prefix};
}

httplib::Client make_client(const RemoteEndpoint& endpoint, const ParsedUrl& url) {
    httplib::Client client(url.host_port);
    auto seconds = std::chrono::duration<double>(endpoint.timeout_seconds);
    auto usec = std::chrono::duration_cast<std::chrono::microseconds>(seconds);
    client.set_connection_timeout(usec);
    client.set_read_timeout(usec);
    client.set_write_timeout(usec);
    return client;
}

[[noreturn]] void raise_transport(const RemoteEndpoint& endpoint, const std::string& what,
                                  std::chrono::steady_clock::time_point started) {
    auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - started)
                       .count();
    raise(errc::transport_error, what + " (" + endpoint.base_url + ", elapsed " +
                                     std::to_string(elapsed) + " ms)");
}

json parse_body(const RemoteEndpoint& endpoint, const httplib::Result& res) {
    if (res->status >= 400) {
        std::string detail = "HTTP " + std::to_string(res->status);
        json body = json::parse(res->body, nullptr, false);
        if (!body.is_discarded() && body.contains("error")) {
            detail += ": " + body["error"].get<std::string>();
        }
        raise(errc::protocol_error, detail + " from " + endpoint.base_url);
    }
    json body = json::parse(res->body, nullptr, false);
    if (body.is_discarded()) {
        raise(errc::protocol_error, "malformed JSON body from " + endpoint.base_url);
    }
    return body;
}

} // namespace

VocabSpec fetch_remote_vocab(const RemoteEndpoint& endpoint) {
    ParsedUrl url = split_url(endpoint.base_url);
    httplib::Client client = make_client(endpoint, url);
    auto started = std::chrono::steady_clock::now();
    httplib::Result res =
        client.Get(url.path_prefix + "/v1/vocab?model=" + endpoint.model_id);
    if (!res) {
        raise_transport(endpoint, "vocab request failed: " + httplib::to_string(res.error()),
                        started);
    }
    json body = parse_body(endpoint, res);
    if (!body.contains("vocab_id") || !body.contains("size") ||
        !body["size"].is_number_integer()) {
        raise(errc::protocol_error, "vocab response missing vocab_id/size fields");
    }
    VocabSpec vocab{body["vocab_id"].get<std::string>(), body["size"].get<std::size_t>()};
    if (vocab.size == 0) {
        raise(errc::protocol_error, "endpoint declared an empty vocabulary");
    }
    return vocab;
}

RemoteLogitSource::RemoteLogitSource(RemoteEndpoint endpoint,
                                     std::shared_ptr<const Tokenizer> tokenizer)
    : endpoint_(std::move(endpoint)), tokenizer_(std::move(tokenizer)) {
    if (tokenizer_ == nullptr) {
        raise(errc::config_error, "remote source needs a tokenizer");
    }
    vocab_ = fetch_remote_vocab(endpoint_);
    if (vocab_.size != tokenizer_->vocab_size()) {
        raise(errc::vocab_mismatch,
              "endpoint vocab size " + std::to_string(vocab_.size) +
                  " != tokenizer vocab size " + std::to_string(tokenizer_->vocab_size()));
    }
}

LogitVector RemoteLogitSource::next_logits(std::span<const TokenId> context) {
    if (context.empty()) {
        raise(errc::backend_failure, "remote logits need a non-empty context");
    }
    ParsedUrl url = split_url(endpoint_.base_url);
    httplib::Client client = make_client(endpoint_, url);

    json request = {{"model", endpoint_.model_id},
                    {"context_tokens", std::vector<TokenId>(context.begin(), context.end())}};
    auto started = std::chrono::steady_clock::now();
    httplib::Result res =
        client.Post(url.path_prefix + "/v1/logits", request.dump(), "application/json");
    if (!res) {
        raise_transport(endpoint_, "logits request failed: " + httplib::to_string(res.error()),
                        started);
    }
    json body = parse_body(endpoint_, res);
    if (!body.contains("logits") || !body["logits"].is_array()) {
        raise(errc::protocol_error, "logits response missing \"logits\" array");
    }

    LogitVector logits;
    logits.values = body["logits"].get<std::vector<double>>();
    if (logits.size() != vocab_.size) {
        raise(errc::length_mismatch, "endpoint returned " + std::to_string(logits.size()) +
                                         " logits for vocab size " + std::to_string(vocab_.size));
    }
    for (double v : logits.values) {
        if (!std::isfinite(v)) {
            raise(errc::protocol_error, "endpoint returned a non-finite logit");
        }
    }
    return logits;
}

std::vector<TokenId> RemoteLogitSource::encode(std::string_view text) {
    return tokenizer_->encode(text);
}

std::string RemoteLogitSource::decode(std::span<const TokenId> tokens) {
    return tokenizer_->decode(tokens);
}

std::shared_ptr<LogitSource> open_backend(std::string_view spec) {
    constexpr std::string_view toy_prefix = "toy:";
    constexpr std::string_view remote_prefix = "remote:";
    if (spec.starts_with(toy_prefix)) {
        return load_toy_model(std::filesystem::path(std::string(spec.substr(toy_prefix.size()))));
    }
    if (spec.starts_with(remote_prefix)) {
        std::string_view rest = spec.substr(remote_prefix.size());
        std::size_t hash = rest.rfind('#');
        if (hash == std::string_view::npos) {
            raise(errc::config_error,
                  "remote backend spec needs \"#<model_id>\": " + std::string(spec));
        }
        RemoteEndpoint endpoint;
        endpoint.base_url = std::string(rest.substr(0, hash));
        std::string_view id_part = rest.substr(hash + 1);
        std::shared_ptr<const Tokenizer> tokenizer;
        std::size_t at = id_part.find('@');
        if (at != std::string_view::npos) {
            // word-level remote scoring: tokenizer borrowed from a toy vocab file
            std::filesystem::path vocab_path{std::string(id_part.substr(at + 1))};
            endpoint.model_id = std::string(id_part.substr(0, at));
            std::ifstream in(vocab_path);
            if (!in) {
                raise(errc::io_error, "cannot open vocab file: " + vocab_path.string());
            }
            json doc = json::parse(in, nullptr, false);
            if (doc.is_discarded() || !doc.contains("vocab")) {
                raise(errc::parse_error, "vocab file needs a \"vocab\" array: " + vocab_path.string());
            }
            tokenizer = std::make_shared<WhitespaceTokenizer>(
                doc["vocab"].get<std::vector<std::string>>());
        } else {
            endpoint.model_id = std::string(id_part);
            tokenizer = std::make_shared<ByteTokenizer>();
        }
        return std::make_shared<RemoteLogitSource>(std::move(endpoint), std::move(tokenizer));
    }
    raise(errc::config_error, "unknown backend spec (want toy:... or remote:...): " +
                                  std::string(spec));
}

} // namespace psychsteer
