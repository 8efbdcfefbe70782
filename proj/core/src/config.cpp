#include "psychsteer/config.hpp"
#include "psychsteer/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

namespace psychsteer {

namespace {

std::string trim(const std::string& s) {
    std::size_t begin = 0;
    std::size_t end = s.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
    return s.substr(begin, end - begin);
}

bool key_allowed(const std::string& key, const std::set<std::string>& allowed) {
    if (allowed.contains(key)) {
        return true;
    }
    for (const std::string& entry : allowed) {
        if (!entry.empty() && entry.back() == '.' && key.starts_with(entry)) {
            return true;
        }
    }
    return false;
}

} // namespace

RunConfig RunConfig::load(const std::filesystem::path& path,
                          const std::set<std::string>& allowed_keys) {
    RunConfig config;
    config.source_ = path;
    for_each_line(path, [&](std::size_t line_no, const std::string& raw) {
        std::string line = raw;
        std::size_t comment = line.find('#');
        if (comment != std::string::npos) {
            line = line.substr(0, comment);
        }
        line = trim(line);
        if (line.empty()) {
            return;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            raise(errc::config_error, path.string() + ":" + std::to_string(line_no) +
                                          ": expected \"key = value\"");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            raise(errc::config_error,
                  path.string() + ":" + std::to_string(line_no) + ": empty key");
        }
        if (!key_allowed(key, allowed_keys)) {
            raise(errc::config_error, path.string() + ":" + std::to_string(line_no) +
                                          ": unknown key \"" + key + "\"");
        }
        config.entries_.emplace_back(std::move(key), std::move(value));
    });
    return config;
}

bool RunConfig::has(const std::string& key) const {
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](const auto& e) { return e.first == key; });
}

std::optional<std::string> RunConfig::get(const std::string& key) const {
    std::optional<std::string> found;
    for (const auto& [k, v] : entries_) {
        if (k == key) {
            found = v; // last occurrence wins
        }
    }
    return found;
}

std::vector<std::string> RunConfig::get_all(const std::string& key) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_) {
        if (k == key) {
            out.push_back(v);
        }
    }
    return out;
}

std::optional<double> RunConfig::get_double(const std::string& key) const {
    auto raw = get(key);
    if (!raw) return std::nullopt;
    try {
        std::size_t used = 0;
        double value = std::stod(*raw, &used);
        if (used != raw->size()) throw std::invalid_argument("trailing characters");
        return value;
    } catch (const std::exception&) {
        raise(errc::config_error, source_.string() + ": key \"" + key +
                                      "\" is not a number: \"" + *raw + "\"");
    }
}

std::optional<std::int64_t> RunConfig::get_int(const std::string& key) const {
    auto raw = get(key);
    if (!raw) return std::nullopt;
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(raw->data(), raw->data() + raw->size(), value);
    if (ec != std::errc{} || ptr != raw->data() + raw->size()) {
        raise(errc::config_error, source_.string() + ": key \"" + key +
                                      "\" is not an integer: \"" + *raw + "\"");
    }
    return value;
}

std::optional<std::uint64_t> RunConfig::get_uint(const std::string& key) const {
    auto raw = get(key);
    if (!raw) return std::nullopt;
    std::uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(raw->data(), raw->data() + raw->size(), value);
    if (ec != std::errc{} || ptr != raw->data() + raw->size()) {
        raise(errc::config_error, source_.string() + ": key \"" + key +
                                      "\" is not an unsigned integer: \"" + *raw + "\"");
    }
    return value;
}

std::vector<std::pair<std::string, std::string>>
RunConfig::with_prefix(const std::string& prefix) const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& entry : entries_) {
        if (entry.first.starts_with(prefix)) {
            out.push_back(entry);
        }
    }
    return out;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    entries_.emplace_back(key, value);
}

std::string unescape_config_value(const std::string& value) {
    std::string out;
    out.reserve(value.size());
    for (std::size_t i = 0; i < value.size(); ++i) {
        if (value[i] == '\\' && i + 1 < value.size()) {
            char next = value[i + 1];
            switch (next) {
                case 'n': out += '\n'; ++i; continue;
                case 't': out += '\t'; ++i; continue;
                case 'r': out += '\r'; ++i; continue;
                case '\\': out += '\\'; ++i; continue;
                default: break;
            }
        }
        out += value[i];
    }
    return out;
}

} // namespace psychsteer
