#include "psychsteer/errors.hpp"

namespace psychsteer {

std::string_view errc_name(errc code) {
    switch (code) {
        case errc::length_mismatch: return "LengthMismatch";
        case errc::non_finite: return "NonFinite";
        case errc::negative_gamma: return "NegativeGamma";
        case errc::non_positive_temperature: return "NonPositiveTemperature";
        case errc::vocab_mismatch: return "VocabMismatch";
        case errc::backend_failure: return "BackendFailure";
        case errc::empty_prompt: return "EmptyPrompt";
        case errc::degenerate_distribution: return "DegenerateDistribution";
        case errc::too_few_values: return "TooFewValues";
        case errc::parse_error: return "ParseError";
        case errc::duplicate_scenario_id: return "DuplicateScenarioId";
        case errc::missing_counterpart: return "MissingCounterpart";
        case errc::invalid_record: return "InvalidRecord";
        case errc::identical_pair: return "IdenticalPair";
        case errc::out_of_scale: return "OutOfScale";
        case errc::missing_item: return "MissingItem";
        case errc::duplicate_response: return "DuplicateResponse";
        case errc::unknown_item: return "UnknownItem";
        case errc::responder_failure: return "ResponderFailure";
        case errc::unparseable_response: return "UnparseableResponse";
        case errc::degenerate_column: return "DegenerateColumn";
        case errc::shape_mismatch: return "ShapeMismatch";
        case errc::empty_group: return "EmptyGroup";
        case errc::empty_corpus: return "EmptyCorpus";
        case errc::degenerate_sample: return "DegenerateSample";
        case errc::singular_system: return "SingularSystem";
        case errc::empty_evaluation_set: return "EmptyEvaluationSet";
        case errc::unknown_token: return "UnknownToken";
        case errc::transport_error: return "TransportError";
        case errc::protocol_error: return "ProtocolError";
        case errc::usage_error: return "UsageError";
        case errc::config_error: return "ConfigError";
        case errc::io_error: return "IoError";
    }
    return "UnknownError";
}

} // namespace psychsteer
