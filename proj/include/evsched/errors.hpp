#ifndef EVSCHED_ERRORS_HPP
#define EVSCHED_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace evsched {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file or missing field.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Input parsed but violates a model invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class LookupError : public Error {
public:
    using Error::Error;
};

/// Instance exceeds the bounds of an exhaustive method.
class SizeError : public Error {
public:
    using Error::Error;
};

class InfeasibleError : public Error {
public:
    using Error::Error;
};

/// The conic solver stopped without an optimal point.
class SolverError : public Error {
public:
    using Error::Error;
};

} // namespace evsched

#endif
