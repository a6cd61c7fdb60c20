#pragma once

#include <stdexcept>
#include <string>

namespace voltcraft {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Bad arguments or malformed input data. CLI maps this to exit code 2.
class InvalidInput : public Error {
public:
    using Error::Error;
};

// A configuration the library refuses by contract (e.g. nonzero rates in a
// routine that only supports r = 0). CLI exit code 2.
class UnsupportedConfig : public Error {
public:
    using Error::Error;
};

// Numerical failure: divergence, non-finite intermediates, iteration caps.
// CLI exit code 3.
class NumericError : public Error {
public:
    using Error::Error;
};

// Root-finding target outside the attainable range (e.g. an option quote at
// or beyond its arbitrage bounds). CLI exit code 3.
class NoSolution : public Error {
public:
    using Error::Error;
};

// Inverse problem too degenerate to invert (e.g. most Dupire nodes invalid).
class IllPosedInput : public Error {
public:
    using Error::Error;
};

// The LP constraints admit no probability measure: the quoted prices embed
// an arbitrage on the chosen support.
class InfeasibleConstraints : public Error {
public:
    using Error::Error;
};

// The LP has a ray to infinity: the support grid is too small to pin down
// the target payoff.
class UnboundedProblem : public Error {
public:
    using Error::Error;
};

}  // namespace voltcraft
