#pragma once

/**
 * Big Five trait vocabulary, continuous-label normalization, and the
 * tertile high/low binarization used to turn 0..1 trait scores into
 * generation targets.
 */

#include "psychsteer/errors.hpp"

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace psychsteer {

enum class Trait { Openness, Conscientiousness, Extraversion, Agreeableness, Neuroticism };

inline constexpr std::size_t kTraitCount = 5;

inline constexpr std::array<Trait, kTraitCount> kAllTraits = {
    Trait::Openness, Trait::Conscientiousness, Trait::Extraversion,
    Trait::Agreeableness, Trait::Neuroticism};

enum class Level { High, Low };

// Canonical serialized names: lowercase throughout.
std::string_view trait_name(Trait trait);
// "Openness", "Conscientiousness", ... for prompt templates.
std::string_view trait_display_name(Trait trait);
Trait parse_trait(std::string_view name);

std::string_view level_name(Level level);
Level parse_level(std::string_view name);

// A single generation target: one trait at one of the two extreme levels.
struct TraitSpec {
    Trait trait = Trait::Openness;
    Level level = Level::High;

    friend bool operator==(const TraitSpec&, const TraitSpec&) = default;
};

// Per-trait continuous scores in [0, 1], ordered as kAllTraits.
struct ContinuousLabels {
    std::array<double, kTraitCount> scores{};

    double& operator[](Trait t) { return scores[static_cast<std::size_t>(t)]; }
    double operator[](Trait t) const { return scores[static_cast<std::size_t>(t)]; }
};

struct TertileThresholds {
    double t_lo = 0.0;
    double t_hi = 0.0;
};

enum class Bucket { Low, Mid, High };

struct TertileSplit {
    TertileThresholds thresholds;
    std::vector<Bucket> buckets; // one per input value, input order
};

// Shifts and scales to zero mean and unit population variance.
// Requires n >= 2 and nonzero variance.
std::vector<double> zscore_normalize(std::span<const double> values);

// Nearest-rank tertile split:
//   t_lo = smallest value v with #{x <= v} >= ceil(n/3)
//   t_hi = smallest value v with #{x <= v} >= ceil(2n/3)
//   bucket(x) = Low if x <= t_lo, High if x > t_hi, Mid otherwise.
// Ties at a threshold fall into the lower bucket.
TertileSplit tertile_split(std::span<const double> values);

} // namespace psychsteer
