// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace cultdiff {

/// Strongly typed integer identifier. Tag makes ids of different tables incompatible.
template <class Tag>
struct Id {
    std::int64_t value = 0;

    constexpr Id() = default;
    constexpr explicit Id(std::int64_t v) : value(v) {}

    constexpr auto operator<=>(const Id&) const = default;
};

using ArtifactId = Id<struct ArtifactTag>;
using ImageId = Id<struct ImageTag>;
using SurveyId = Id<struct SurveyTag>;
using QuestionId = Id<struct QuestionTag>;

enum class Category { Architecture, Clothing, Food };
enum class ImageSource { Real, Generated };
enum class PairOrigin { RealReal, RealSynthetic };
enum class Split { Train, Val, Test };

inline constexpr Category kAllCategories[] = {Category::Architecture, Category::Clothing, Category::Food};

std::string_view to_string(Category c) noexcept;
std::string_view to_string(ImageSource s) noexcept;
std::string_view to_string(PairOrigin o) noexcept;
std::string_view to_string(Split s) noexcept;

// Parsers throw Error(InvalidConfig) on unknown names.
Category parse_category(std::string_view name);
ImageSource parse_source(std::string_view name);
PairOrigin parse_origin(std::string_view name);
Split parse_split(std::string_view name);

}  // namespace cultdiff

template <class Tag>
struct std::hash<cultdiff::Id<Tag>> {
    std::size_t operator()(const cultdiff::Id<Tag>& id) const noexcept {
        return std::hash<std::int64_t>{}(id.value);
    }
};
