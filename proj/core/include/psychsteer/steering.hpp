#pragma once

/**
 * Two-phase steered generation.
 *
 * Phase one: the base model alone produces the opening of the response
 * (by default the first five whitespace-terminated words). Phase two: every
 * subsequent step samples from combine_logits(base, expert, gamma), pulling
 * the continuation toward the expert's trait while the base keeps fluency.
 */

#include "psychsteer/errors.hpp"
#include "psychsteer/logits.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace psychsteer {

// A next-token scorer plus the tokenizer that feeds it. Implementations:
// toy n-gram models and the remote HTTP client (backends.hpp).
class LogitSource {
public:
    virtual ~LogitSource() = default;

    virtual const VocabSpec& vocab() const = 0;
    virtual const std::string& model_id() const = 0;
    virtual LogitVector next_logits(std::span<const TokenId> context) = 0;
    virtual std::vector<TokenId> encode(std::string_view text) = 0;
    virtual std::string decode(std::span<const TokenId> tokens) = 0;
};

enum class PrefixUnit {
    Words,  // whitespace-terminated words in the decoded continuation
    Tokens, // raw generated-token count; tokenizer-free testing mode
};

struct SteeringPolicy {
    double gamma = 0.5;
    std::size_t prefix_words = 5;
    PrefixUnit prefix_unit = PrefixUnit::Words;
    std::size_t max_new_tokens = 64;
    std::vector<std::string> stop_sequences;
};

enum class StopReason { StopSequence, MaxTokens };

struct GenerationResult {
    std::string text;            // decoded continuation, stop text excluded
    std::vector<TokenId> tokens; // kept continuation tokens; text == decode(tokens)
    std::optional<std::size_t> prefix_boundary; // index of the first steered token
    StopReason stop_reason = StopReason::MaxTokens;
    std::uint64_t seed = 0;
    double gamma_used = 0.0;
};

// True once the continuation holds at least prefix_words words, each
// terminated by trailing whitespace. A trailing unterminated run does not
// count: a word that may still be extended by the next token has not been
// finished, so steering never activates mid-word. prefix_words == 0 is
// immediately true.
bool prefix_complete(std::string_view decoded_continuation, std::size_t prefix_words);

// Runs the two-phase loop. Tokens before the prefix boundary are sampled
// from base logits alone; tokens at or after it from
// combine_logits(base, expert, gamma). Stops at the first matched stop
// sequence (matched text excluded from the result) or at max_new_tokens.
GenerationResult generate_steered(LogitSource& base, LogitSource& expert,
                                  std::string_view prompt, const SteeringPolicy& policy,
                                  const SamplerConfig& sampler);

// Base-only loop with the same stopping rules; the reference path that a
// gamma = 0 steered run must reproduce token for token.
GenerationResult generate_unsteered(LogitSource& base, std::string_view prompt,
                                    const SteeringPolicy& policy, const SamplerConfig& sampler);

} // namespace psychsteer
