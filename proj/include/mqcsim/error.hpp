#pragma once

#include <stdexcept>
#include <string>

namespace mqcsim {

// Error classes thrown across the library. The CLI maps ConfigError to exit
// code 2 and every other Error to exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class CapExceeded : public Error {
public:
    using Error::Error;
};

class InvalidGeometry : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class NonConvergence : public Error {
public:
    NonConvergence(const std::string& what, double achieved_residual)
        : Error(what), residual_(achieved_residual) {}
    double achieved_residual() const noexcept { return residual_; }

private:
    double residual_;
};

class NonUniformPhaseGrid : public Error {
public:
    using Error::Error;
};

class FitFailure : public Error {
public:
    using Error::Error;
};

class NoFeasibleSolution : public Error {
public:
    using Error::Error;
};

class NoPeaks : public Error {
public:
    using Error::Error;
};

class NonPositiveData : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

// Schema / configuration problems in user-supplied documents.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace mqcsim
