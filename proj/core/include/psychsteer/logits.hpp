#pragma once

/**
 * Numeric kernel for decoding-time logit ensembling.
 *
 * The core operation is the combined-logit rule
 *
 *     combined[i] = base[i] + gamma * expert[i]
 *
 * followed by softmax conversion and token sampling. Everything here is a
 * pure function over immutable inputs; no global state, safe from any thread.
 */

#include "psychsteer/errors.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace psychsteer {

using TokenId = std::int32_t;

// Identity of a token alphabet. Two logit sources are composable only when
// both the id and the size agree.
struct VocabSpec {
    std::string vocab_id;
    std::size_t size = 0;

    friend bool operator==(const VocabSpec&, const VocabSpec&) = default;
};

// Per-token scores over a vocabulary. Entries must be finite.
struct LogitVector {
    std::vector<double> values;

    std::size_t size() const noexcept { return values.size(); }
};

// Normalized distribution over a vocabulary: entries >= 0, sum == 1 (1e-9).
struct ProbVector {
    std::vector<double> values;

    std::size_t size() const noexcept { return values.size(); }
};

enum class SamplerMode { Greedy, Temperature };

struct SamplerConfig {
    SamplerMode mode = SamplerMode::Greedy;
    double temperature = 1.0; // used only in Temperature mode, must be > 0
    std::uint64_t seed = 0;

    static SamplerConfig greedy() { return {SamplerMode::Greedy, 1.0, 0}; }
    static SamplerConfig with_temperature(double t, std::uint64_t seed) {
        return {SamplerMode::Temperature, t, seed};
    }
};

// combined[i] = base[i] + gamma * expert[i].
// gamma == 0 returns base unchanged (bitwise), so a zero-weight expert can
// never perturb the base distribution, not even through -0.0 arithmetic.
LogitVector combine_logits(const LogitVector& base, const LogitVector& expert, double gamma);

// Max-subtracted softmax at the given temperature.
ProbVector softmax(const LogitVector& logits, double temperature);

// Greedy: argmax, lowest index wins ties. Temperature: one draw from
// softmax(logits, t) using a generator seeded from config.seed; identical
// (logits, config) always yield the identical token, across process restarts.
TokenId sample_token(const LogitVector& logits, const SamplerConfig& sampler);

// Argmax with the lowest-index tie-break rule.
std::size_t argmax(std::span<const double> values);

// splitmix64 finalizer; the building block for derived seeds.
std::uint64_t mix_seed(std::uint64_t x);

// Stable per-step seed used by sequential samplers: mixes the session seed
// with the step index so each step draws an independent deterministic value.
std::uint64_t derive_step_seed(std::uint64_t seed, std::uint64_t step);

// FNV-1a over a byte string; used to derive per-job seeds from string keys.
std::uint64_t fnv1a64(std::string_view text);

// Uniform double in [0, 1) from the top 53 bits of a 64-bit draw.
double uniform_unit(std::uint64_t raw_draw);

} // namespace psychsteer
