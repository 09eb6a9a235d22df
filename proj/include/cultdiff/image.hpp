// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cultdiff {

/// RGB image with interleaved float channels in [0, 1], row-major (HWC).
struct Image {
    int width = 0;
    int height = 0;
    std::vector<float> pixels;  // width * height * 3

    Image() = default;
    Image(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0.0f) {}

    bool empty() const noexcept { return pixels.empty(); }

    float& at(int x, int y, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    float at(int x, int y, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// Throws Error(UnreadableImage) when the bytes are not a decodable image.
Image decode_image(std::span<const std::uint8_t> bytes);
Image load_image(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const Image& image);
void save_png(const Image& image, const std::filesystem::path& path);

/// Bilinear resampling (pixel-center aligned).
Image resize_bilinear(const Image& image, int width, int height);

/// Rec. 601 luma, row-major width*height.
std::vector<float> luminance(const Image& image);

/// Lowercase hex SHA-256 of the content.
std::string sha256_hex(std::span<const std::uint8_t> bytes);

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws Error(SchemaViolation) on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace cultdiff
