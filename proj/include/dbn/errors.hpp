#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dbn {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shapes of two operands do not line up.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// An argument is outside its documented domain.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// A non-finite value showed up during a computation.
class NumericError : public Error {
public:
    using Error::Error;
};

/// A binary input file does not follow its format. Carries the byte offset
/// at which parsing stopped.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::size_t offset)
        : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

}  // namespace dbn
