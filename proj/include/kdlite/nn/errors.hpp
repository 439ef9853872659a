#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kdlite {

// Base for every error raised by the library. The CLI maps the concrete
// subclasses onto exit codes, so throw the most specific one available.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shape or broadcast mismatch between operands.
class DimensionError : public Error {
public:
    using Error::Error;
};

// NaN/Inf produced by an op, or a non-finite loss/gradient.
class NumericError : public Error {
public:
    using Error::Error;
};

// Padding mask that is not a right-padded prefix, or a row with no real token.
class MaskError : public Error {
public:
    using Error::Error;
};

// Token id outside the vocabulary, or an empty corpus.
class VocabError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class LabelError : public Error {
public:
    using Error::Error;
};

// Teacher-logit cache problems: duplicates, gaps, size mismatches.
class CacheError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Gradient check could not evaluate the objective (non-finite value).
class CheckError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace kdlite
