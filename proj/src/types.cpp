// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "cultdiff/error.hpp"
#include "cultdiff/types.hpp"

namespace cultdiff {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::DuplicateArtifact: return "DuplicateArtifact";
    case ErrorCode::UnknownCountry: return "UnknownCountry";
    case ErrorCode::EmptyName: return "EmptyName";
    case ErrorCode::MissingArtifact: return "MissingArtifact";
    case ErrorCode::MissingModelId: return "MissingModelId";
    case ErrorCode::UnreadableImage: return "UnreadableImage";
    case ErrorCode::MissingDemonym: return "MissingDemonym";
    case ErrorCode::ClientUnavailable: return "ClientUnavailable";
    case ErrorCode::QuotaExceeded: return "QuotaExceeded";
    case ErrorCode::GenerationRejected: return "GenerationRejected";
    case ErrorCode::UnknownModel: return "UnknownModel";
    case ErrorCode::InsufficientImages: return "InsufficientImages";
    case ErrorCode::LikertOutOfRange: return "LikertOutOfRange";
    case ErrorCode::UnknownQuestion: return "UnknownQuestion";
    case ErrorCode::UnknownAnnotator: return "UnknownAnnotator";
    case ErrorCode::UnknownSurvey: return "UnknownSurvey";
    case ErrorCode::DuplicateResponse: return "DuplicateResponse";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::UnequalRaterCounts: return "UnequalRaterCounts";
    case ErrorCode::DegenerateAgreement: return "DegenerateAgreement";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::MissingReferences: return "MissingReferences";
    case ErrorCode::UnplannedPrompt: return "UnplannedPrompt";
    case ErrorCode::SplitOverlap: return "SplitOverlap";
    case ErrorCode::EncoderNotLoaded: return "EncoderNotLoaded";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::EmptySplit: return "EmptySplit";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptyReferences: return "EmptyReferences";
    case ErrorCode::FeatureExtractorUnavailable: return "FeatureExtractorUnavailable";
    case ErrorCode::NoAnnotations: return "NoAnnotations";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::EmptySlice: return "EmptySlice";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::StageDependency: return "StageDependency";
    case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

std::string_view to_string(Category c) noexcept {
    switch (c) {
    case Category::Architecture: return "architecture";
    case Category::Clothing: return "clothing";
    case Category::Food: return "food";
    }
    return "?";
}

std::string_view to_string(ImageSource s) noexcept {
    return s == ImageSource::Real ? "real" : "generated";
}

std::string_view to_string(PairOrigin o) noexcept {
    return o == PairOrigin::RealReal ? "real_real" : "real_synthetic";
}

std::string_view to_string(Split s) noexcept {
    switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    }
    return "?";
}

Category parse_category(std::string_view name) {
    for (Category c : kAllCategories)
        if (to_string(c) == name) return c;
    fail(ErrorCode::InvalidConfig, "unknown category '" + std::string(name) + "'");
}

ImageSource parse_source(std::string_view name) {
    if (name == "real") return ImageSource::Real;
    if (name == "generated") return ImageSource::Generated;
    fail(ErrorCode::InvalidConfig, "unknown image source '" + std::string(name) + "'");
}

PairOrigin parse_origin(std::string_view name) {
    if (name == "real_real") return PairOrigin::RealReal;
    if (name == "real_synthetic") return PairOrigin::RealSynthetic;
    fail(ErrorCode::InvalidConfig, "unknown pair origin '" + std::string(name) + "'");
}

Split parse_split(std::string_view name) {
    if (name == "train") return Split::Train;
    if (name == "val") return Split::Val;
    if (name == "test") return Split::Test;
    fail(ErrorCode::InvalidConfig, "unknown split '" + std::string(name) + "'");
}

}  // namespace cultdiff
