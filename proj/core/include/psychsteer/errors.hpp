#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace psychsteer {

// Stable error identifiers. Every throwing operation in the library raises
// Error with one of these codes so callers and tests can dispatch on identity
// instead of matching message text.
enum class errc {
    // numeric kernel
    length_mismatch,
    non_finite,
    negative_gamma,
    non_positive_temperature,
    // steering engine
    vocab_mismatch,
    backend_failure,
    empty_prompt,
    // trait model
    degenerate_distribution,
    too_few_values,
    // dataset pipeline
    parse_error,
    duplicate_scenario_id,
    missing_counterpart,
    invalid_record,
    identical_pair,
    // psychometrics
    out_of_scale,
    missing_item,
    duplicate_response,
    unknown_item,
    responder_failure,
    unparseable_response,
    // analysis
    degenerate_column,
    shape_mismatch,
    empty_group,
    empty_corpus,
    degenerate_sample,
    // scorer
    singular_system,
    empty_evaluation_set,
    // backends
    unknown_token,
    transport_error,
    protocol_error,
    // orchestration
    usage_error,
    config_error,
    io_error,
};

std::string_view errc_name(errc code);

class Error : public std::runtime_error {
public:
    Error(errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

    errc code() const noexcept { return code_; }

private:
    errc code_;
};

[[noreturn]] inline void raise(errc code, const std::string& message) {
    throw Error(code, message);
}

} // namespace psychsteer
