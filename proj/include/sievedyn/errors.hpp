#pragma once

#include <stdexcept>
#include <string>

namespace sievedyn {

// Base of everything the library throws on purpose.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Caller asked for something outside an operation's domain (empty prime
// range, inadmissible constellation, stage too early, ...). CLI exit code 2.
class PreconditionError : public Error {
  public:
    using Error::Error;
};

class DomainError : public PreconditionError {
  public:
    using PreconditionError::PreconditionError;
};

// A configured cycle/sieve/prime budget would be exceeded. CLI exit code 2.
class BudgetError : public PreconditionError {
  public:
    using PreconditionError::PreconditionError;
};

// Bad magic, version, checksum or unparsable cache/checkpoint content.
class FormatError : public PreconditionError {
  public:
    using PreconditionError::PreconditionError;
};

// An internal invariant failed; indicates a bug. CLI exit code 3.
class InvariantError : public Error {
  public:
    using Error::Error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
    if (!ok) throw PreconditionError(what);
}

inline void ensure(bool ok, const std::string& what) {
    if (!ok) throw InvariantError(what);
}

}  // namespace detail

}  // namespace sievedyn
