#pragma once

#include <stdexcept>
#include <string>

namespace mgw {

// Argument outside the mathematical domain of an operation (x <= 0 for a
// density, negative chi-square statistic, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

enum class EstimationErrc {
    EmptySample,
    NonIdentifiable,
    CvLessThanOne,
    StepLeavesDomain,
    NoAdmissibleCandidate,
};

inline const char* to_string(EstimationErrc c) {
    switch (c) {
    case EstimationErrc::EmptySample: return "EmptySample";
    case EstimationErrc::NonIdentifiable: return "NonIdentifiable";
    case EstimationErrc::CvLessThanOne: return "CvLessThanOne";
    case EstimationErrc::StepLeavesDomain: return "StepLeavesDomain";
    case EstimationErrc::NoAdmissibleCandidate: return "NoAdmissibleCandidate";
    }
    return "Unknown";
}

// Raised by the estimators when a fit cannot be produced for the given sample.
class EstimationError : public std::runtime_error {
public:
    EstimationError(EstimationErrc code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    EstimationErrc code() const noexcept { return code_; }

private:
    EstimationErrc code_;
};

// Malformed input line; carries the 1-based line number.
class MalformedRecord : public std::runtime_error {
public:
    MalformedRecord(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

} // namespace mgw
