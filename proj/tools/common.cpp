#include "commands.hpp"

#include "psychsteer/backends.hpp"

namespace psychsteer::cli {

RunConfig load_config(const std::optional<std::string>& path,
                      const std::set<std::string>& allowed_keys) {
    if (!path.has_value()) {
        return RunConfig{};
    }
    return RunConfig::load(*path, allowed_keys);
}

double pick_double(const std::optional<double>& flag, const RunConfig& config,
                   const std::string& key, double fallback) {
    if (flag.has_value()) return *flag;
    if (auto value = config.get_double(key)) return *value;
    return fallback;
}

std::uint64_t pick_uint(const std::optional<std::uint64_t>& flag, const RunConfig& config,
                        const std::string& key, std::uint64_t fallback) {
    if (flag.has_value()) return *flag;
    if (auto value = config.get_uint(key)) return *value;
    return fallback;
}

std::uint64_t require_seed(const std::optional<std::uint64_t>& flag, const RunConfig& config) {
    if (flag.has_value()) return *flag;
    if (auto value = config.get_uint("seed")) return *value;
    raise(errc::config_error, "a seed is required (--seed flag or \"seed\" config key)");
}

std::shared_ptr<LogitSource> open_base(const RunConfig& config,
                                       const std::optional<std::string>& flag) {
    std::string spec;
    if (flag.has_value()) {
        spec = *flag;
    } else if (auto value = config.get("base")) {
        spec = *value;
    } else {
        raise(errc::config_error, "no base backend configured (--base or \"base\" config key)");
    }
    return open_backend(spec);
}

std::shared_ptr<LogitSource> open_expert(const RunConfig& config, Trait trait, Level level) {
    std::string key = "expert." + std::string(trait_name(trait)) + "." +
                      std::string(level_name(level));
    auto spec = config.get(key);
    if (!spec.has_value()) {
        raise(errc::config_error, "no expert configured for key \"" + key + "\"");
    }
    return open_backend(*spec);
}

SteeringPolicy build_policy(const RunConfig& config, const std::optional<double>& gamma_flag,
                            const std::optional<std::uint64_t>& prefix_flag,
                            const std::optional<std::uint64_t>& max_tokens_flag,
                            const std::vector<std::string>& stop_flags) {
    SteeringPolicy policy;
    policy.gamma = pick_double(gamma_flag, config, "gamma", 0.5);
    if (policy.gamma < 0.0) {
        raise(errc::config_error, "gamma must be >= 0");
    }
    policy.prefix_words =
        static_cast<std::size_t>(pick_uint(prefix_flag, config, "prefix_words", 5));
    policy.max_new_tokens =
        static_cast<std::size_t>(pick_uint(max_tokens_flag, config, "max_new_tokens", 64));
    if (policy.max_new_tokens < 1) {
        raise(errc::config_error, "max_new_tokens must be >= 1");
    }
    if (!stop_flags.empty()) {
        for (const std::string& stop : stop_flags) {
            policy.stop_sequences.push_back(unescape_config_value(stop));
        }
    } else {
        for (const std::string& stop : config.get_all("stop_sequence")) {
            policy.stop_sequences.push_back(unescape_config_value(stop));
        }
    }
    return policy;
}

} // namespace psychsteer::cli
