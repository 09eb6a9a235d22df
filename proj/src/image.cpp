// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "cultdiff/image.hpp"

#include <cctype>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <openssl/evp.h>

#include "cultdiff/error.hpp"

namespace cultdiff {

namespace {

cv::Mat to_mat(const Image& image) {
    cv::Mat rgb(image.height, image.width, CV_32FC3, const_cast<float*>(image.pixels.data()));
    return rgb;
}

Image from_mat(const cv::Mat& rgb32f) {
    Image out(rgb32f.cols, rgb32f.rows);
    cv::Mat view(out.height, out.width, CV_32FC3, out.pixels.data());
    rgb32f.copyTo(view);
    return out;
}

}  // namespace

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::Io, "short write to " + path.string());
}

Image decode_image(std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) fail(ErrorCode::UnreadableImage, "empty image buffer");
    cv::Mat buffer(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
    cv::Mat bgr;
    try {
        bgr = cv::imdecode(buffer, cv::IMREAD_COLOR);
    } catch (const cv::Exception& e) {
        fail(ErrorCode::UnreadableImage, e.what());
    }
    if (bgr.empty()) fail(ErrorCode::UnreadableImage, "buffer is not a decodable image");
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    cv::Mat rgb32f;
    rgb.convertTo(rgb32f, CV_32FC3, 1.0 / 255.0);
    return from_mat(rgb32f);
}

Image load_image(const std::filesystem::path& path) {
    std::vector<std::uint8_t> bytes;
    try {
        bytes = read_file_bytes(path);
    } catch (const Error&) {
        fail(ErrorCode::UnreadableImage, "cannot read " + path.string());
    }
    try {
        return decode_image(bytes);
    } catch (const Error& e) {
        fail(ErrorCode::UnreadableImage, path.string() + ": " + e.what());
    }
}

std::vector<std::uint8_t> encode_png(const Image& image) {
    cv::Mat rgb8;
    to_mat(image).convertTo(rgb8, CV_8UC3, 255.0);
    cv::Mat bgr8;
    cv::cvtColor(rgb8, bgr8, cv::COLOR_RGB2BGR);
    std::vector<std::uint8_t> out;
    if (!cv::imencode(".png", bgr8, out)) fail(ErrorCode::Io, "png encoding failed");
    return out;
}

void save_png(const Image& image, const std::filesystem::path& path) {
    write_file_bytes(path, encode_png(image));
}

Image resize_bilinear(const Image& image, int width, int height) {
    if (image.width == width && image.height == height) return image;
    cv::Mat dst;
    cv::resize(to_mat(image), dst, cv::Size(width, height), 0, 0, cv::INTER_LINEAR);
    return from_mat(dst);
}

std::vector<float> luminance(const Image& image) {
    std::vector<float> y(static_cast<std::size_t>(image.width) * image.height);
    for (std::size_t i = 0; i < y.size(); ++i) {
        const float* p = &image.pixels[i * 3];
        y[i] = 0.299f * p[0] + 0.587f * p[1] + 0.114f * p[2];
    }
    return y;
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        fail(ErrorCode::Io, "sha256 failed");
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i)
        hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    return hex.str();
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
    std::string clean;
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) clean.push_back(c);
    if (clean.size() % 4 != 0) fail(ErrorCode::SchemaViolation, "base64 length is not a multiple of 4");
    std::vector<std::uint8_t> out(clean.size() / 4 * 3);
    const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(clean.data()),
                                  static_cast<int>(clean.size()));
    if (n < 0) fail(ErrorCode::SchemaViolation, "malformed base64");
    std::size_t pad = 0;
    if (!clean.empty() && clean.back() == '=') ++pad;
    if (clean.size() > 1 && clean[clean.size() - 2] == '=') ++pad;
    out.resize(static_cast<std::size_t>(n) - pad);
    return out;
}

}  // namespace cultdiff
