#include "psychsteer/steering.hpp"

#include <algorithm>
#include <cctype>

namespace psychsteer {

namespace {

bool is_space(char c) {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
}

// Earliest match position of any stop sequence, or npos.
std::size_t find_stop(std::string_view text, const std::vector<std::string>& stops) {
    std::size_t best = std::string_view::npos;
    for (const std::string& stop : stops) {
        if (stop.empty()) continue;
        std::size_t pos = text.find(stop);
        if (pos != std::string_view::npos && pos < best) {
            best = pos;
        }
    }
    return best;
}

LogitVector source_logits(LogitSource& source, std::span<const TokenId> context,
                          const char* phase) {
    try {
        LogitVector logits = source.next_logits(context);
        if (logits.size() != source.vocab().size) {
            raise(errc::backend_failure,
                  std::string(phase) + " source returned " + std::to_string(logits.size()) +
                      " logits for vocab size " + std::to_string(source.vocab().size));
        }
        return logits;
    } catch (const Error& e) {
        if (e.code() == errc::backend_failure) throw;
        raise(errc::backend_failure, std::string(phase) + " source failed: " + e.what());
    } catch (const std::exception& e) {
        raise(errc::backend_failure, std::string(phase) + " source failed: " + e.what());
    }
}

GenerationResult run_loop(LogitSource& base, LogitSource* expert, std::string_view prompt,
                          const SteeringPolicy& policy, const SamplerConfig& sampler) {
    if (prompt.empty()) {
        raise(errc::empty_prompt, "generation prompt is empty");
    }
    if (policy.max_new_tokens < 1) {
        raise(errc::usage_error, "max_new_tokens must be >= 1");
    }
    if (expert != nullptr && base.vocab() != expert->vocab()) {
        raise(errc::vocab_mismatch,
              "base vocab (" + base.vocab().vocab_id + ", " + std::to_string(base.vocab().size) +
                  ") != expert vocab (" + expert->vocab().vocab_id + ", " +
                  std::to_string(expert->vocab().size) + ")");
    }

    std::vector<TokenId> context;
    try {
        context = base.encode(prompt);
    } catch (const std::exception& e) {
        raise(errc::backend_failure, std::string("prompt encoding failed: ") + e.what());
    }
    const std::size_t prompt_len = context.size();

    GenerationResult result;
    result.seed = sampler.seed;
    result.gamma_used = expert != nullptr ? policy.gamma : 0.0;
    result.stop_reason = StopReason::MaxTokens;

    std::string continuation;
    std::optional<std::size_t> boundary;

    for (std::size_t step = 0; step < policy.max_new_tokens; ++step) {
        bool steer = false;
        if (expert != nullptr) {
            if (policy.prefix_unit == PrefixUnit::Tokens) {
                steer = step >= policy.prefix_words;
            } else {
                steer = prefix_complete(continuation, policy.prefix_words);
            }
            if (steer && !boundary.has_value()) {
                boundary = step;
            }
        }

        std::span<const TokenId> ctx(context);
        LogitVector logits = source_logits(base, ctx, "base");
        if (steer) {
            LogitVector expert_logits = source_logits(*expert, ctx, "expert");
            logits = combine_logits(logits, expert_logits, policy.gamma);
        }

        SamplerConfig step_sampler = sampler;
        step_sampler.seed = derive_step_seed(sampler.seed, step);
        TokenId token = sample_token(logits, step_sampler);

        context.push_back(token);
        std::span<const TokenId> generated(context.data() + prompt_len,
                                           context.size() - prompt_len);
        continuation = base.decode(generated);

        std::size_t stop_pos = find_stop(continuation, policy.stop_sequences);
        if (stop_pos != std::string_view::npos) {
            // Keep the longest token prefix whose decoded text ends at or
            // before the stop match; the stop text itself is dropped.
            std::size_t keep = generated.size();
            while (keep > 0 &&
                   base.decode(generated.subspan(0, keep)).size() > stop_pos) {
                --keep;
            }
            result.tokens.assign(generated.begin(), generated.begin() + keep);
            result.text = base.decode(result.tokens);
            result.stop_reason = StopReason::StopSequence;
            // A boundary beyond the kept tokens means steering only touched
            // dropped text; the returned sequence never reached it.
            if (boundary.has_value() && *boundary > keep) {
                boundary = std::nullopt;
            }
            result.prefix_boundary = boundary;
            return result;
        }
    }

    result.tokens.assign(context.begin() + static_cast<std::ptrdiff_t>(prompt_len),
                         context.end());
    result.text = continuation;
    result.prefix_boundary = boundary;
    return result;
}

} // namespace

bool prefix_complete(std::string_view decoded_continuation, std::size_t prefix_words) {
    if (prefix_words == 0) {
        return true;
    }
    std::size_t terminated = 0;
    bool in_word = false;
    for (char c : decoded_continuation) {
        if (is_space(c)) {
            if (in_word) {
                ++terminated;
                if (terminated >= prefix_words) {
                    return true;
                }
                in_word = false;
            }
        } else {
            in_word = true;
        }
    }
    return false;
}

GenerationResult generate_steered(LogitSource& base, LogitSource& expert,
                                  std::string_view prompt, const SteeringPolicy& policy,
                                  const SamplerConfig& sampler) {
    return run_loop(base, &expert, prompt, policy, sampler);
}

GenerationResult generate_unsteered(LogitSource& base, std::string_view prompt,
                                    const SteeringPolicy& policy, const SamplerConfig& sampler) {
    return run_loop(base, nullptr, prompt, policy, sampler);
}

} // namespace psychsteer
