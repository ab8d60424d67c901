#pragma once

#include <stdexcept>
#include <string>

namespace promptlab {

// Bad config file, bad CLI arguments, unreadable inputs. CLI maps this to exit 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed or invalid data file (corpus, lexicon, artifacts).
struct LoadError : ConfigError {
    using ConfigError::ConfigError;
};

// Backend unreachable / timed out after retries. CLI maps this to exit 3.
struct TransportError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// HTTP non-2xx from the model endpoint.
struct ProtocolError : TransportError {
    int status;
    ProtocolError(int status_, const std::string& msg)
        : TransportError(msg), status(status_) {}
};

// Response body did not match the expected wire schema.
struct ResponseParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace promptlab
