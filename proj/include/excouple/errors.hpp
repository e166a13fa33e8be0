#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace excouple {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An element encoding does not belong to the group it is used with.
class MalformedElement : public Error {
public:
    using Error::Error;
};

/// Two operands live on different groups.
class ContextMismatch : public Error {
public:
    using Error::Error;
};

/// Input outside an operation's domain (non-probability measure, bad laziness, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// A support-size or element-count guard was exceeded.
class ResourceError : public Error {
public:
    ResourceError(const std::string& what, std::size_t bound)
        : Error(what + " (bound " + std::to_string(bound) + ")"), bound_(bound) {}
    std::size_t bound() const noexcept { return bound_; }

private:
    std::size_t bound_;
};

/// The overlap criterion mu^n ^ theta_x^{-1} mu^n != 0 failed for every n <= n_max.
class NoOverlap : public Error {
public:
    NoOverlap(const std::string& what, std::uint64_t n_max) : Error(what), n_max_(n_max) {}
    std::uint64_t n_max() const noexcept { return n_max_; }

private:
    std::uint64_t n_max_;
};

/// x = e: the coupling is trivial (T = 0) and no plan is built.
class IdentityShift : public Error {
public:
    using Error::Error;
};

class TargetNotReachable : public Error {
public:
    using Error::Error;
};

class InvariantViolation : public Error {
public:
    using Error::Error;
};

} // namespace excouple
