#pragma once

#include <stdexcept>
#include <string>

namespace smokeforge
{
    // Base for every error raised by the library. Callers that only care
    // about "smokeforge rejected this" can catch this one type.
    class Error : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    // Malformed or truncated on-disk data.
    class FormatError : public Error
    {
    public:
        using Error::Error;
    };

    // A value violates a documented domain invariant.
    class InvariantError : public Error
    {
    public:
        using Error::Error;
    };

    // Bad argument to an operation (sizes, ranges, mismatched dimensions).
    class ArgumentError : public Error
    {
    public:
        using Error::Error;
    };

    class IoError : public Error
    {
    public:
        using Error::Error;
    };
} // namespace smokeforge
