#pragma once

#include <stdexcept>
#include <string>

namespace mdri {

/// Broad failure class, mapped one-to-one onto CLI exit codes.
enum class ErrorKind {
    Config = 1,
    Data = 2,
    Numeric = 3,
};

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string &what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

  private:
    ErrorKind kind_;
};

#define MDRI_DEFINE_ERROR(Name, Kind)                                                              \
    class Name : public Error {                                                                    \
      public:                                                                                      \
        explicit Name(const std::string &what) : Error(ErrorKind::Kind, what) {}                  \
    };

// Data ingestion
MDRI_DEFINE_ERROR(ParseError, Data)
MDRI_DEFINE_ERROR(GridError, Data)
MDRI_DEFINE_ERROR(SchemaError, Data)

// Configuration
MDRI_DEFINE_ERROR(ConfigError, Config)

// Numerics
MDRI_DEFINE_ERROR(DomainError, Numeric)
MDRI_DEFINE_ERROR(DegenerateError, Numeric)
MDRI_DEFINE_ERROR(NormalizationError, Numeric)
MDRI_DEFINE_ERROR(IntegrationError, Numeric)
MDRI_DEFINE_ERROR(InfeasibleError, Numeric)

#undef MDRI_DEFINE_ERROR

/// Coupling calibration failure. Carries the unclamped solution when one exists.
class CalibrationError : public Error {
  public:
    enum class Reason { NoUniqueSolution, Infeasible };

    CalibrationError(Reason reason, const std::string &what, double raw_gamma = 0.0)
        : Error(ErrorKind::Numeric, what), reason_(reason), raw_gamma_(raw_gamma) {}

    Reason reason() const noexcept { return reason_; }
    double raw_gamma() const noexcept { return raw_gamma_; }

  private:
    Reason reason_;
    double raw_gamma_;
};

} // namespace mdri
