#pragma once

#include <stdexcept>
#include <string>

namespace risdcf {

// Invalid physical or protocol parameter (negative distance, m < 0.5, eta <= 0, ...).
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Mismatched list lengths inside a channel realization.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Division by a vanishing estimate, non-converging fixed point.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EncodingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bit sequence whose length matches no frame variant.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// FCS mismatch on an otherwise well-formed bit sequence.
class CorruptionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SimulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Configuration problems carry the offending key (and line, for file input).
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& what)
        : std::runtime_error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

class JoinError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace risdcf
