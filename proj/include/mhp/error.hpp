#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mhp {

enum class ErrorCode {
    NonPositiveParameter,
    TieViolation,
    UnstableBranching,
    NonConstantBaseline,
    NegativeElapsedTime,
    ReversedInterval,
    NonExponentialKernel,
    TimeReversal,
    ShapeMismatch,
    InvalidSpec,
    UnstableExplosion,
    UnsupportedKernel,
    GridHorizonMismatch,
    AllParticlesDead,
    Degenerate,
    NonFiniteLogLik,
    OptimizerDiverged,
    SingularHessian,
    DegenerateData,
    ChainTooShort,
    GapInDates,
    NonContiguousBoundaries,
    NegativeCount,
    RaggedRow,
    ParseError,
    IoError,
};

[[nodiscard]] constexpr std::string_view error_name(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::NonPositiveParameter: return "NonPositiveParameter";
    case ErrorCode::TieViolation: return "TieViolation";
    case ErrorCode::UnstableBranching: return "UnstableBranching";
    case ErrorCode::NonConstantBaseline: return "NonConstantBaseline";
    case ErrorCode::NegativeElapsedTime: return "NegativeElapsedTime";
    case ErrorCode::ReversedInterval: return "ReversedInterval";
    case ErrorCode::NonExponentialKernel: return "NonExponentialKernel";
    case ErrorCode::TimeReversal: return "TimeReversal";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::UnstableExplosion: return "UnstableExplosion";
    case ErrorCode::UnsupportedKernel: return "UnsupportedKernel";
    case ErrorCode::GridHorizonMismatch: return "GridHorizonMismatch";
    case ErrorCode::AllParticlesDead: return "AllParticlesDead";
    case ErrorCode::Degenerate: return "Degenerate";
    case ErrorCode::NonFiniteLogLik: return "NonFiniteLogLik";
    case ErrorCode::OptimizerDiverged: return "OptimizerDiverged";
    case ErrorCode::SingularHessian: return "SingularHessian";
    case ErrorCode::DegenerateData: return "DegenerateData";
    case ErrorCode::ChainTooShort: return "ChainTooShort";
    case ErrorCode::GapInDates: return "GapInDates";
    case ErrorCode::NonContiguousBoundaries: return "NonContiguousBoundaries";
    case ErrorCode::NegativeCount: return "NegativeCount";
    case ErrorCode::RaggedRow: return "RaggedRow";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

/// Input rejected before any computation started (bad parameters, bad data).
[[nodiscard]] constexpr bool is_validation_error(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::AllParticlesDead:
    case ErrorCode::Degenerate:
    case ErrorCode::NonFiniteLogLik:
    case ErrorCode::OptimizerDiverged:
    case ErrorCode::SingularHessian:
    case ErrorCode::UnstableExplosion:
    case ErrorCode::IoError:
        return false;
    default:
        return true;
    }
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail)
        : std::runtime_error(std::string(error_name(code)) + ": " + detail), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace mhp
