#pragma once

#include <stdexcept>
#include <string>

namespace fpv {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Matrix/vector dimensions or labels are structurally wrong.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A transition row does not sum to one within tolerance.
class RowSumError : public Error {
public:
    RowSumError(const std::string& what, std::ptrdiff_t row) : Error(what), row_(row) {}
    std::ptrdiff_t row() const noexcept { return row_; }

private:
    std::ptrdiff_t row_;
};

/// A probability entry is negative.
class NegativeEntryError : public Error {
public:
    using Error::Error;
};

/// The designated halt state is not a unit self-loop.
class HaltNotAbsorbingError : public Error {
public:
    using Error::Error;
};

/// An iterative eigenvalue method exhausted its budget.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// A quantity is undefined for the given chain (e.g. when escape is impossible).
class UndefinedError : public Error {
public:
    using Error::Error;
};

/// The passage-time linear system is singular (escape probability zero).
class SingularError : public Error {
public:
    using Error::Error;
};

/// A value matrix was required but the model does not carry one.
class MissingValueMatrixError : public Error {
public:
    using Error::Error;
};

/// A policy does not cover every (state, randomness) pair.
class IncompletePolicyError : public Error {
public:
    using Error::Error;
};

/// An argument is outside its mathematical domain.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Too many simulated trajectories hit the step cap.
class CensoringError : public Error {
public:
    using Error::Error;
};

/// A model/policy file could not be interpreted.
class ParseError : public Error {
public:
    using Error::Error;
};

}  // namespace fpv
