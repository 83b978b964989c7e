#pragma once

#include <stdexcept>
#include <string>

namespace nuqo {

// Every failure raised by the library derives from Error so the CLI can map
// categories onto exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidGeometry : public Error {
public:
    using Error::Error;
};

class InvalidParameters : public Error {
public:
    using Error::Error;
};

class EnergyConservationViolation : public InvalidParameters {
public:
    using InvalidParameters::InvalidParameters;
};

class InvalidEnsemble : public Error {
public:
    using Error::Error;
};

class CorruptedTable : public Error {
public:
    using Error::Error;
};

class NotApplicable : public Error {
public:
    using Error::Error;
};

// A(Δ) in the coherence system is (numerically) singular.
class DegenerateSpectrum : public Error {
public:
    DegenerateSpectrum(double detuning, const std::string& what)
        : Error(what + " (detuning " + std::to_string(detuning) + " gamma)"), detuning_(detuning) {}

    double detuning() const noexcept { return detuning_; }

private:
    double detuning_;
};

class ResourceCapExceeded : public Error {
public:
    using Error::Error;
};

class AmbiguousSteadyState : public Error {
public:
    using Error::Error;
};

class IntegratorError : public Error {
public:
    using Error::Error;
};

class UndefinedObservable : public Error {
public:
    using Error::Error;
};

}  // namespace nuqo
