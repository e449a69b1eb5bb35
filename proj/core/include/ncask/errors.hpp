#pragma once

#include <stdexcept>
#include <string>

namespace ncask {

// A caller-supplied parameter violates a documented precondition.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Evaluation point lies outside the domain of the moment generating function.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Scaled arithmetic could not keep an intermediate quantity finite.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool cond, const std::string& what) {
    if (!cond) throw InvalidArgument(what);
}

}  // namespace detail
}  // namespace ncask
