#pragma once

#include <stdexcept>
#include <string>

namespace moenet {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input (shapes, ranges, configuration).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Every column of a design had zero variance.
class DegenerateDesign : public Error {
public:
    using Error::Error;
};

/// A training partition is missing one of the two classes.
class FoldDegenerate : public Error {
public:
    using Error::Error;
};

/// CSV / manifest parse failure; the message names the row and column.
class ParseError : public Error {
public:
    using Error::Error;
};

/// The coordinate-descent solver produced a non-finite objective.
class SolverError : public Error {
public:
    using Error::Error;
};

/// Raised by the global optimiser when too many objective evaluations fail.
class OptimizerError : public Error {
public:
    using Error::Error;
};

}  // namespace moenet
