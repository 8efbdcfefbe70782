#pragma once

#include <CLI11.hpp>

#include "psychsteer/config.hpp"
#include "psychsteer/dataset.hpp"
#include "psychsteer/steering.hpp"

#include <memory>
#include <optional>
#include <set>
#include <string>

namespace psychsteer::cli {

void register_generate(CLI::App& app);
void register_export(CLI::App& app);
void register_administer(CLI::App& app);
void register_analyze(CLI::App& app);
void register_scorer_commands(CLI::App& app); // train-scorer, score, evaluate

// Loads the config file when given, restricted to the per-command allowlist.
RunConfig load_config(const std::optional<std::string>& path,
                      const std::set<std::string>& allowed_keys);

// flag > config > default
double pick_double(const std::optional<double>& flag, const RunConfig& config,
                   const std::string& key, double fallback);
std::uint64_t pick_uint(const std::optional<std::uint64_t>& flag, const RunConfig& config,
                        const std::string& key, std::uint64_t fallback);

// Seed is mandatory for generation-like commands: flag or config, no default.
std::uint64_t require_seed(const std::optional<std::uint64_t>& flag, const RunConfig& config);

std::shared_ptr<LogitSource> open_base(const RunConfig& config,
                                       const std::optional<std::string>& flag);
std::shared_ptr<LogitSource> open_expert(const RunConfig& config, Trait trait, Level level);

SteeringPolicy build_policy(const RunConfig& config, const std::optional<double>& gamma_flag,
                            const std::optional<std::uint64_t>& prefix_flag,
                            const std::optional<std::uint64_t>& max_tokens_flag,
                            const std::vector<std::string>& stop_flags);

} // namespace psychsteer::cli
