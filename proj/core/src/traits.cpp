#include "psychsteer/traits.hpp"

#include <algorithm>
#include <cmath>

namespace psychsteer {

std::string_view trait_name(Trait trait) {
    switch (trait) {
        case Trait::Openness: return "openness";
        case Trait::Conscientiousness: return "conscientiousness";
        case Trait::Extraversion: return "extraversion";
        case Trait::Agreeableness: return "agreeableness";
        case Trait::Neuroticism: return "neuroticism";
    }
    return "openness";
}

std::string_view trait_display_name(Trait trait) {
    switch (trait) {
        case Trait::Openness: return "Openness";
        case Trait::Conscientiousness: return "Conscientiousness";
        case Trait::Extraversion: return "Extraversion";
        case Trait::Agreeableness: return "Agreeableness";
        case Trait::Neuroticism: return "Neuroticism";
    }
    return "Openness";
}

Trait parse_trait(std::string_view name) {
    for (Trait t : kAllTraits) {
        if (name == trait_name(t) || name == trait_display_name(t)) {
            return t;
        }
    }
    raise(errc::parse_error, "unknown trait name: " + std::string(name));
}

std::string_view level_name(Level level) {
    return level == Level::High ? "high" : "low";
}

Level parse_level(std::string_view name) {
    if (name == "high" || name == "High") return Level::High;
    if (name == "low" || name == "Low") return Level::Low;
    raise(errc::parse_error, "unknown level name: " + std::string(name));
}

std::vector<double> zscore_normalize(std::span<const double> values) {
    if (values.size() < 2) {
        raise(errc::too_few_values,
              "z-score normalization needs at least 2 values, got " +
                  std::to_string(values.size()));
    }
    for (double v : values) {
        if (!std::isfinite(v)) {
            raise(errc::non_finite, "z-score input contains a non-finite value");
        }
    }
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());

    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());
    if (var == 0.0) {
        raise(errc::degenerate_distribution, "z-score input has zero variance");
    }

    double inv_std = 1.0 / std::sqrt(var);
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = (values[i] - mean) * inv_std;
    }
    return out;
}

TertileSplit tertile_split(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n < 3) {
        raise(errc::too_few_values,
              "tertile split needs at least 3 values, got " + std::to_string(n));
    }
    for (double v : values) {
        if (!std::isfinite(v)) {
            raise(errc::non_finite, "tertile input contains a non-finite value");
        }
    }

    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());

    // Nearest-rank: #{x <= sorted[k-1]} >= k for every k, so the smallest
    // qualifying value for rank r is sorted[r-1].
    const std::size_t rank_lo = (n + 2) / 3;     // ceil(n/3)
    const std::size_t rank_hi = (2 * n + 2) / 3; // ceil(2n/3)
    TertileThresholds thresholds;
    thresholds.t_lo = sorted[rank_lo - 1];
    thresholds.t_hi = sorted[rank_hi - 1];

    TertileSplit split;
    split.thresholds = thresholds;
    split.buckets.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double x = values[i];
        if (x <= thresholds.t_lo) {
            split.buckets[i] = Bucket::Low;
        } else if (x > thresholds.t_hi) {
            split.buckets[i] = Bucket::High;
        } else {
            split.buckets[i] = Bucket::Mid;
        }
    }
    return split;
}

} // namespace psychsteer
