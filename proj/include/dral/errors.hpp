#pragma once

#include <stdexcept>
#include <string>

namespace dral {

/// Operation called on a state that cannot serve it (e.g. mean query before labels are finalized).
class StateError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Factorization or sampling failure that survives the jitter policy.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Valid input the library deliberately does not handle.
class UnsupportedError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Malformed delimited input; carries the 1-based row and column of the offending cell.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t row, std::size_t column)
        : std::runtime_error(what + " (row " + std::to_string(row) + ", column " + std::to_string(column) + ")"),
          row_(row), column_(column) {}

    [[nodiscard]] std::size_t row() const noexcept { return row_; }
    [[nodiscard]] std::size_t column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::size_t column_;
};

/// Invalid experiment configuration. `field()` names the dotted config key at fault.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& message)
        : std::runtime_error(field + ": " + message), field_(std::move(field)) {}

    [[nodiscard]] const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

} // namespace dral
