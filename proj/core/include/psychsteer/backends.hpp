#pragma once

/**
 * Logit sources.
 *
 * ToyTextModel: a deterministic smoothed n-gram model over a small explicit
 * vocabulary. Logits are ln(count + alpha) from the longest matching context
 * row, backing off suffix by suffix down to the unigram row. Count-based
 * logits make steering outcomes analytically predictable in tests.
 *
 * RemoteLogitSource: client for the HTTP logit protocol
 *   GET  {base_url}/v1/vocab?model={model_id} -> {"vocab_id": str, "size": int}
 *   POST {base_url}/v1/logits {"model": str, "context_tokens": [int]}
 *        -> {"logits": [number; size]}
 * Tokenization stays local and pluggable; the endpoint only scores tokens.
 */

#include "psychsteer/errors.hpp"
#include "psychsteer/logits.hpp"
#include "psychsteer/steering.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace psychsteer {

// Text <-> token-id mapping. Implementations must be prefix-monotone:
// decode(t[0..k]) is a prefix of decode(t[0..k+1]).
class Tokenizer {
public:
    virtual ~Tokenizer() = default;
    virtual std::size_t vocab_size() const = 0;
    virtual std::vector<TokenId> encode(std::string_view text) const = 0;
    virtual std::string decode(std::span<const TokenId> tokens) const = 0;
};

// Whole words as tokens. Each token decodes to "word " (trailing space),
// so a decoded token always terminates its word.
class WhitespaceTokenizer : public Tokenizer {
public:
    explicit WhitespaceTokenizer(std::vector<std::string> words);

    std::size_t vocab_size() const override { return words_.size(); }
    std::vector<TokenId> encode(std::string_view text) const override;
    std::string decode(std::span<const TokenId> tokens) const override;

    const std::vector<std::string>& words() const { return words_; }

private:
    std::vector<std::string> words_;
    std::unordered_map<std::string, TokenId> index_;
};

// One byte per token, vocab size 256.
class ByteTokenizer : public Tokenizer {
public:
    std::size_t vocab_size() const override { return 256; }
    std::vector<TokenId> encode(std::string_view text) const override;
    std::string decode(std::span<const TokenId> tokens) const override;
};

// Count table over token ids. `order` is the number of previous tokens a
// context row conditions on; rows exist for every suffix length 0..order,
// so lookup backs off from the longest suffix down to the unigram row.
class ToyNgramModel {
public:
    ToyNgramModel(std::size_t order, std::size_t vocab_size, double alpha);

    static ToyNgramModel from_sequences(std::size_t order, std::size_t vocab_size, double alpha,
                                        const std::vector<std::vector<TokenId>>& sequences);

    void add_count(std::span<const TokenId> context, TokenId next, double amount = 1.0);

    // logits[w] = ln(count(context_suffix, w) + alpha)
    LogitVector next_logits(std::span<const TokenId> context) const;

    std::size_t order() const { return order_; }
    std::size_t vocab_size() const { return vocab_size_; }
    double alpha() const { return alpha_; }

private:
    const std::vector<double>* find_row(std::span<const TokenId> context) const;

    std::size_t order_;
    std::size_t vocab_size_;
    double alpha_;
    // context tuple -> per-token counts; ordered map keeps behavior
    // independent of hash iteration.
    std::map<std::vector<TokenId>, std::vector<double>> counts_;
};

// ToyNgramModel + Tokenizer glued into a LogitSource.
class ToyTextModel : public LogitSource {
public:
    ToyTextModel(std::string model_id, VocabSpec vocab, std::shared_ptr<const Tokenizer> tokenizer,
                 ToyNgramModel model);

    // Convenience: whitespace tokenizer over `words`, counts from corpus lines.
    static std::shared_ptr<ToyTextModel> from_corpus(std::string model_id, std::string vocab_id,
                                                     std::vector<std::string> words,
                                                     const std::vector<std::string>& corpus_lines,
                                                     std::size_t order, double alpha);

    const VocabSpec& vocab() const override { return vocab_; }
    const std::string& model_id() const override { return model_id_; }
    LogitVector next_logits(std::span<const TokenId> context) override;
    std::vector<TokenId> encode(std::string_view text) override;
    std::string decode(std::span<const TokenId> tokens) override;

    const ToyNgramModel& model() const { return model_; }

private:
    std::string model_id_;
    VocabSpec vocab_;
    std::shared_ptr<const Tokenizer> tokenizer_;
    ToyNgramModel model_;
};

// Loads a toy model description:
// {"model_id": str?, "vocab_id": str, "tokenizer": "whitespace"|"byte",
//  "order": int, "alpha": num, "vocab": [str], "corpus": [str]}
std::shared_ptr<ToyTextModel> load_toy_model(const std::filesystem::path& path);

struct RemoteEndpoint {
    std::string base_url;
    std::string model_id;
    double timeout_seconds = 10.0;
};

// Fetches {vocab_id, size} from {base_url}/v1/vocab. Raises TransportError /
// ProtocolError on failure.
VocabSpec fetch_remote_vocab(const RemoteEndpoint& endpoint);

// HTTP-backed LogitSource. The vocab is fetched once at connect time; every
// logits response is validated against it. Each request runs on its own
// connection, so concurrent in-flight calls are independent.
class RemoteLogitSource : public LogitSource {
public:
    RemoteLogitSource(RemoteEndpoint endpoint, std::shared_ptr<const Tokenizer> tokenizer);

    const VocabSpec& vocab() const override { return vocab_; }
    const std::string& model_id() const override { return endpoint_.model_id; }
    LogitVector next_logits(std::span<const TokenId> context) override;
    std::vector<TokenId> encode(std::string_view text) override;
    std::string decode(std::span<const TokenId> tokens) override;

private:
    RemoteEndpoint endpoint_;
    std::shared_ptr<const Tokenizer> tokenizer_;
    VocabSpec vocab_;
};

// Parses a backend spec string:
//   "toy:<path>"                       toy model file
//   "remote:<base_url>#<model_id>"     remote endpoint (whitespace-tokenized
//                                      remote scoring needs a toy vocab file:
//                                      "remote:<base_url>#<model_id>@<vocab_path>")
std::shared_ptr<LogitSource> open_backend(std::string_view spec);

} // namespace psychsteer
