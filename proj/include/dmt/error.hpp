#pragma once

#include <stdexcept>
#include <string>

namespace dmt {

// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Rate target cannot be carried by the measured SNR profile.
class InfeasibleLoading : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public Error {
public:
    using Error::Error;
};

class SyncError : public Error {
public:
    using Error::Error;
};

// BER target never crossed on an OSNR grid.
class UnreachableTarget : public Error {
public:
    UnreachableTarget(const std::string& what, double best_ber)
        : Error(what), best_ber_(best_ber) {}
    double best_ber() const noexcept { return best_ber_; }

private:
    double best_ber_;
};

// Wraps a failure inside one stage of the link so callers can tell where it happened.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error(stage + ": " + what), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace dmt
