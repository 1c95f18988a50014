#pragma once

#include <stdexcept>
#include <string>

namespace gwlab {

enum class ErrorKind {
    NoCompactSupport,
    ShootingDiverged,
    BlowupDetected,
    CollapsingOrInadmissible,
    GridMismatch,
    NonIntegrableWeight,
    IndefiniteMass,
    StepUnstable,
    ShellCrossing,
    VacuumViolation,
    InvalidInput,
};

inline const char* kind_name(ErrorKind k)
{
    switch (k) {
    case ErrorKind::NoCompactSupport: return "NoCompactSupport";
    case ErrorKind::ShootingDiverged: return "ShootingDiverged";
    case ErrorKind::BlowupDetected: return "BlowupDetected";
    case ErrorKind::CollapsingOrInadmissible: return "CollapsingOrInadmissible";
    case ErrorKind::GridMismatch: return "GridMismatch";
    case ErrorKind::NonIntegrableWeight: return "NonIntegrableWeight";
    case ErrorKind::IndefiniteMass: return "IndefiniteMass";
    case ErrorKind::StepUnstable: return "StepUnstable";
    case ErrorKind::ShellCrossing: return "ShellCrossing";
    case ErrorKind::VacuumViolation: return "VacuumViolation";
    case ErrorKind::InvalidInput: return "InvalidInput";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(kind_name(kind)) + ": " + what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace gwlab
