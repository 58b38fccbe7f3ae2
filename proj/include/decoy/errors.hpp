#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace decoy {

// Base type for everything thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
    using Error::Error;
};

// Target sampling: no pool member satisfies the distance constraint.
struct PoolExhausted : Error {
    using Error::Error;
};

// Gateway errors.
struct TransportError : Error {
    TransportError(const std::string& what, int attempts_in)
        : Error(what), attempts(attempts_in) {}
    int attempts = 0;
};

struct MockMiss : Error {
    using Error::Error;
};

struct BudgetExceeded : Error {
    using Error::Error;
};

// Prompt rendering.
struct UnboundPlaceholder : Error {
    using Error::Error;
};

// Structured-output parsing.
struct ParseFailure : Error {
    using Error::Error;
};

struct NoJsonFound : Error {
    using Error::Error;
};

struct EmptyRewrite : Error {
    using Error::Error;
};

// A free-form comparison needed the equivalence judge and none is configured.
struct GatewayRequired : Error {
    using Error::Error;
};

// Corpus ingestion. Carries the offending record and field.
struct SchemaError : Error {
    SchemaError(const std::string& what, std::string record_id_in, std::string field_in)
        : Error(what), record_id(std::move(record_id_in)), field(std::move(field_in)) {}
    std::string record_id;
    std::string field;
};

// Metrics.
struct EmptyReference : Error {
    using Error::Error;
};

struct EmptyInput : Error {
    using Error::Error;
};

struct EmptyGroup : Error {
    using Error::Error;
};

// Evaluation inputs do not come from the same run.
struct ManifestMismatch : Error {
    using Error::Error;
};

} // namespace decoy
