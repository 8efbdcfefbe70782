#include "psychsteer/logits.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace psychsteer {

namespace {

void require_finite(const LogitVector& v, const char* what) {
    for (double x : v.values) {
        if (!std::isfinite(x)) {
            raise(errc::non_finite, std::string(what) + " contains a non-finite entry");
        }
    }
}

} // namespace

LogitVector combine_logits(const LogitVector& base, const LogitVector& expert, double gamma) {
    if (base.size() != expert.size()) {
        raise(errc::length_mismatch,
              "base has " + std::to_string(base.size()) + " entries, expert has " +
                  std::to_string(expert.size()));
    }
    if (!std::isfinite(gamma)) {
        raise(errc::non_finite, "gamma is non-finite");
    }
    if (gamma < 0.0) {
        raise(errc::negative_gamma, "gamma must be >= 0, got " + std::to_string(gamma));
    }
    require_finite(base, "base logits");
    require_finite(expert, "expert logits");

    if (gamma == 0.0) {
        return base;
    }
    LogitVector out;
    out.values.resize(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
        double v = base.values[i] + gamma * expert.values[i];
        if (!std::isfinite(v)) {
            raise(errc::non_finite, "combined logit overflowed at index " + std::to_string(i));
        }
        out.values[i] = v;
    }
    return out;
}

ProbVector softmax(const LogitVector& logits, double temperature) {
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        raise(errc::non_positive_temperature,
              "temperature must be > 0, got " + std::to_string(temperature));
    }
    require_finite(logits, "logits");
    if (logits.size() == 0) {
        raise(errc::length_mismatch, "softmax of an empty logit vector");
    }

    double max_scaled = -std::numeric_limits<double>::infinity();
    for (double x : logits.values) {
        max_scaled = std::max(max_scaled, x / temperature);
    }

    ProbVector out;
    out.values.resize(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        double e = std::exp(logits.values[i] / temperature - max_scaled);
        out.values[i] = e;
        total += e;
    }
    for (double& p : out.values) {
        p /= total;
    }
    return out;
}

std::size_t argmax(std::span<const double> values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) {
            best = i;
        }
    }
    return best;
}

TokenId sample_token(const LogitVector& logits, const SamplerConfig& sampler) {
    require_finite(logits, "logits");
    if (logits.size() == 0) {
        raise(errc::length_mismatch, "sampling from an empty logit vector");
    }

    if (sampler.mode == SamplerMode::Greedy) {
        return static_cast<TokenId>(argmax(logits.values));
    }

    ProbVector probs = softmax(logits, sampler.temperature);
    std::mt19937_64 rng(sampler.seed);
    double u = uniform_unit(rng());
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs.values[i];
        if (u < acc) {
            return static_cast<TokenId>(i);
        }
    }
    return static_cast<TokenId>(probs.size() - 1);
}

std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_step_seed(std::uint64_t seed, std::uint64_t step) {
    return mix_seed(mix_seed(seed) ^ mix_seed(step + 1));
}

std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

double uniform_unit(std::uint64_t raw_draw) {
    return static_cast<double>(raw_draw >> 11) * 0x1.0p-53;
}

} // namespace psychsteer
