#pragma once

/**
 * Declarative run configuration: "key = value" lines, '#' comments.
 * Repeated keys are allowed where the consumer expects a list
 * (e.g. stop_sequence). Unknown keys are rejected against the allowlist
 * the command supplies, so typos fail loudly instead of being ignored.
 */

#include "psychsteer/errors.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace psychsteer {

class RunConfig {
public:
    RunConfig() = default;

    // `allowed_keys` entries ending in '.' are prefixes (e.g. "expert.").
    static RunConfig load(const std::filesystem::path& path,
                          const std::set<std::string>& allowed_keys);

    bool has(const std::string& key) const;
    std::optional<std::string> get(const std::string& key) const;
    std::vector<std::string> get_all(const std::string& key) const;

    std::optional<double> get_double(const std::string& key) const;
    std::optional<std::int64_t> get_int(const std::string& key) const;
    std::optional<std::uint64_t> get_uint(const std::string& key) const;

    // All keys with the given prefix, in file order.
    std::vector<std::pair<std::string, std::string>> with_prefix(const std::string& prefix) const;

    void set(const std::string& key, const std::string& value);

private:
    std::filesystem::path source_;
    std::vector<std::pair<std::string, std::string>> entries_; // file order
};

// Unescapes \n, \t, \r, \\ in config values (stop sequences need newlines).
std::string unescape_config_value(const std::string& value);

} // namespace psychsteer
