/**
 * @file error.hpp
 * @brief Error type shared by every gazeskill module.
 */
#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace gazeskill {

enum class Errc {
    MalformedRow,
    NonMonotoneTimestamp,
    MissingHeader,
    EmptyRecording,
    InvalidRecording,
    InsufficientData,
    InvalidConfig,
    EmptyDistribution,
    TooFewObservations,
    NonPositiveBandwidth,
    DegenerateDistribution,
    InvalidBands,
    InvalidArgument,
    DegenerateData,
    TooFewGroups,
    UnbalancedWithinFactor,
    InvalidDf,
    TooFewFixations,
    InsufficientTraining,
    ModelFeatureMismatch,
    InvalidProfile,
    InvalidModel,
    Io,
    Network,
};

constexpr std::string_view errc_name(Errc c) noexcept {
    switch (c) {
    case Errc::MalformedRow: return "MalformedRow";
    case Errc::NonMonotoneTimestamp: return "NonMonotoneTimestamp";
    case Errc::MissingHeader: return "MissingHeader";
    case Errc::EmptyRecording: return "EmptyRecording";
    case Errc::InvalidRecording: return "InvalidRecording";
    case Errc::InsufficientData: return "InsufficientData";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::EmptyDistribution: return "EmptyDistribution";
    case Errc::TooFewObservations: return "TooFewObservations";
    case Errc::NonPositiveBandwidth: return "NonPositiveBandwidth";
    case Errc::DegenerateDistribution: return "DegenerateDistribution";
    case Errc::InvalidBands: return "InvalidBands";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::DegenerateData: return "DegenerateData";
    case Errc::TooFewGroups: return "TooFewGroups";
    case Errc::UnbalancedWithinFactor: return "UnbalancedWithinFactor";
    case Errc::InvalidDf: return "InvalidDf";
    case Errc::TooFewFixations: return "TooFewFixations";
    case Errc::InsufficientTraining: return "InsufficientTraining";
    case Errc::ModelFeatureMismatch: return "ModelFeatureMismatch";
    case Errc::InvalidProfile: return "InvalidProfile";
    case Errc::InvalidModel: return "InvalidModel";
    case Errc::Io: return "Io";
    case Errc::Network: return "Network";
    }
    return "Unknown";
}

/// Every failure raised by the library. `line()` is set for text-format errors
/// and holds the 1-based line number of the offending input line.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what, std::optional<std::size_t> line = std::nullopt)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code), line_(line) {}

    Errc code() const noexcept { return code_; }
    std::optional<std::size_t> line() const noexcept { return line_; }

private:
    Errc code_;
    std::optional<std::size_t> line_;
};

}  // namespace gazeskill
