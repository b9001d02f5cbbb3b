#pragma once

#include <stdexcept>
#include <string>

namespace desert {

// Base for every failure raised by the library. The CLI maps these to
// exit codes >= 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SchemaError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t row)
        : Error(what + " (row " + std::to_string(row) + ")"), row_(row) {}
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

class EmptyDataError : public Error {
public:
    using Error::Error;
};

class DegenerateCovariateError : public Error {
public:
    DegenerateCovariateError(const std::string& column)
        : Error("covariate '" + column + "' is constant; cannot scale to [0,1]"), column_(column) {}
    const std::string& column() const noexcept { return column_; }

private:
    std::string column_;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

// A (s,z) stratum or a class of the propensity model is empty.
class PositivityError : public Error {
public:
    using Error::Error;
};

// Denominator of the identification ratio is (numerically) zero: the
// auxiliary variable carries no information about the desert decision.
class WeakAuxiliaryError : public Error {
public:
    using Error::Error;
};

// The identification map produced values outside their admissible range.
class InvalidIdentificationError : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

}  // namespace desert
