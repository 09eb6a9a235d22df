// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cultdiff {

enum class ErrorCode {
    // catalog
    DuplicateArtifact,
    UnknownCountry,
    EmptyName,
    MissingArtifact,
    MissingModelId,
    UnreadableImage,
    // genpipe
    MissingDemonym,
    ClientUnavailable,
    QuotaExceeded,
    GenerationRejected,
    UnknownModel,
    // survey
    InsufficientImages,
    LikertOutOfRange,
    UnknownQuestion,
    UnknownAnnotator,
    UnknownSurvey,
    DuplicateResponse,
    SchemaViolation,
    UnequalRaterCounts,
    DegenerateAgreement,
    // pairs
    OutOfRange,
    MissingReferences,
    UnplannedPrompt,
    SplitOverlap,
    // simtrain
    EncoderNotLoaded,
    DimensionMismatch,
    EmptyBatch,
    EmptySplit,
    NonFiniteLoss,
    // evalsuite
    EmptyReferences,
    FeatureExtractorUnavailable,
    NoAnnotations,
    LengthMismatch,
    ZeroVariance,
    EmptySlice,
    // cli / pipeline
    InvalidConfig,
    StageDependency,
    Io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries a machine-checkable code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), m_code(code) {}

    ErrorCode code() const noexcept { return m_code; }

private:
    ErrorCode m_code;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace cultdiff
