#pragma once

#include <stdexcept>
#include <string>

namespace gridflow {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed case document. `field` names the offending JSON path.
class ParseError : public Error {
public:
    ParseError(std::string field, const std::string& what)
        : Error("parse error at '" + field + "': " + what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

/// Closed branches contain a cycle; `branch` is the branch that closed it.
class NotRadial : public Error {
public:
    NotRadial(int branch, const std::string& what) : Error(what), branch_(branch) {}
    int branch() const noexcept { return branch_; }

private:
    int branch_;
};

/// Some bus cannot be reached from the root through closed branches.
class Disconnected : public Error {
public:
    Disconnected(int bus, const std::string& what) : Error(what), bus_(bus) {}
    int bus() const noexcept { return bus_; }

private:
    int bus_;
};

class NonConvergent : public Error {
public:
    NonConvergent(int iterations, double residual, const std::string& what)
        : Error(what), iterations_(iterations), residual_(residual) {}
    int iterations() const noexcept { return iterations_; }
    double residual() const noexcept { return residual_; }

private:
    int iterations_;
    double residual_;
};

/// Voltage collapse during an AC sweep.
class Diverged : public Error {
public:
    using Error::Error;
};

/// No feasible point exists. `hint` names the first violated constraint group when known.
class Infeasible : public Error {
public:
    Infeasible(std::string hint, const std::string& what)
        : Error(what), hint_(std::move(hint)) {}
    const std::string& hint() const noexcept { return hint_; }

private:
    std::string hint_;
};

class IllConditioned : public Error {
public:
    IllConditioned(double condition, const std::string& what)
        : Error(what), condition_(condition) {}
    double condition() const noexcept { return condition_; }

private:
    double condition_;
};

class DegenerateVoltage : public Error {
public:
    DegenerateVoltage(int bus, const std::string& what) : Error(what), bus_(bus) {}
    int bus() const noexcept { return bus_; }

private:
    int bus_;
};

class NothingToOptimize : public Error {
public:
    using Error::Error;
};

class TooLarge : public Error {
public:
    TooLarge(double count, const std::string& what) : Error(what), count_(count) {}
    double count() const noexcept { return count_; }

private:
    double count_;
};

} // namespace gridflow
