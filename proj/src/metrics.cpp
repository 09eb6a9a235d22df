// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "cultdiff/metrics.hpp"

#include <cmath>
#include <numbers>

#include <opencv2/imgproc.hpp>

#include "cultdiff/error.hpp"

namespace cultdiff {

namespace {

void require_pixels(const Image& img) {
    if (img.empty() || img.width <= 0 || img.height <= 0) fail(ErrorCode::UnreadableImage, "empty image");
}

cv::Mat rgb_mat(const Image& img, int w, int h) {
    const Image r = resize_bilinear(img, w, h);
    cv::Mat m(h, w, CV_64FC3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            auto& px = m.at<cv::Vec3d>(y, x);
            for (int c = 0; c < 3; ++c) px[c] = r.at(x, y, c);
        }
    return m;
}

cv::Mat luma_mat(const Image& img, int w, int h) {
    const auto y = luminance(resize_bilinear(img, w, h));
    cv::Mat m(h, w, CV_64F);
    for (int i = 0; i < w * h; ++i) m.at<double>(i) = y[static_cast<std::size_t>(i)];
    return m;
}

cv::Mat gaussian(const cv::Mat& m, double sigma, int ksize = 0) {
    cv::Mat out;
    cv::GaussianBlur(m, out, cv::Size(ksize, ksize), sigma, sigma, cv::BORDER_REFLECT);
    return out;
}

/// Opponent colour planes plus a small oriented filter bank on luminance.
std::vector<cv::Mat> filter_responses(const cv::Mat& rgb) {
    std::vector<cv::Mat> ch(3);
    cv::split(rgb, ch);
    const cv::Mat lum = (ch[0] + ch[1] + ch[2]) / 3.0;
    const cv::Mat rg = ch[0] - ch[1];
    const cv::Mat by = (ch[0] + ch[1]) / 2.0 - ch[2];

    std::vector<cv::Mat> out;
    for (int k = 0; k < 4; ++k) {
        const cv::Mat kernel =
            cv::getGaborKernel(cv::Size(7, 7), 2.0, k * std::numbers::pi / 4, 4.0, 0.5, 0.0, CV_64F);
        cv::Mat r;
        cv::filter2D(lum, r, CV_64F, kernel, cv::Point(-1, -1), 0, cv::BORDER_REFLECT);
        out.push_back(r);
    }
    out.push_back(gaussian(lum, 1.0) - gaussian(lum, 2.0));
    out.push_back(gaussian(lum, 1.0));
    out.push_back(gaussian(rg, 1.0));
    out.push_back(gaussian(by, 1.0));
    return out;
}

double level_distance(const cv::Mat& a, const cv::Mat& b) {
    const auto fa = filter_responses(a);
    const auto fb = filter_responses(b);
    const int n = a.rows * a.cols;
    double total = 0;
    for (int i = 0; i < n; ++i) {
        double na = 0, nb = 0;
        for (std::size_t c = 0; c < fa.size(); ++c) {
            na += fa[c].at<double>(i) * fa[c].at<double>(i);
            nb += fb[c].at<double>(i) * fb[c].at<double>(i);
        }
        na = std::sqrt(na) + 1e-10;
        nb = std::sqrt(nb) + 1e-10;
        for (std::size_t c = 0; c < fa.size(); ++c) {
            const double d = fa[c].at<double>(i) / na - fb[c].at<double>(i) / nb;
            total += d * d;
        }
    }
    return total / n;
}

Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

std::pair<int, int> common_resolution(const Image& a, const Image& b) {
    const long pa = static_cast<long>(a.width) * a.height;
    const long pb = static_cast<long>(b.width) * b.height;
    return pa <= pb ? std::pair{a.width, a.height} : std::pair{b.width, b.height};
}

double ssim(const Image& a, const Image& b) {
    require_pixels(a);
    require_pixels(b);
    const auto [w, h] = common_resolution(a, b);
    const cv::Mat x = luma_mat(a, w, h), y = luma_mat(b, w, h);
    constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    auto blur = [](const cv::Mat& m) { return gaussian(m, 1.5, 11); };
    const cv::Mat mx = blur(x), my = blur(y);
    const cv::Mat mxx = mx.mul(mx), myy = my.mul(my), mxy = mx.mul(my);
    const cv::Mat sxx = blur(x.mul(x)) - mxx;
    const cv::Mat syy = blur(y.mul(y)) - myy;
    const cv::Mat sxy = blur(x.mul(y)) - mxy;
    const cv::Mat num = (2 * mxy + c1).mul(2 * sxy + c2);
    const cv::Mat den = (mxx + myy + c1).mul(sxx + syy + c2);
    cv::Mat map;
    cv::divide(num, den, map);
    return cv::mean(map)[0];
}

double lpips_distance(const Image& a, const Image& b) {
    require_pixels(a);
    require_pixels(b);
    const auto [w, h] = common_resolution(a, b);
    cv::Mat xa = rgb_mat(a, w, h), xb = rgb_mat(b, w, h);
    double total = 0;
    int levels = 0;
    for (;;) {
        total += level_distance(xa, xb);
        ++levels;
        if (levels == 3 || std::min(xa.rows, xa.cols) < 16) break;
        cv::Mat da, db;
        cv::pyrDown(xa, da);
        cv::pyrDown(xb, db);
        xa = da;
        xb = db;
    }
    return total / levels;
}

Eigen::VectorXd HandcraftedFeatureExtractor::extract(const Image& image) const {
    require_pixels(image);
    constexpr int S = 64;
    const Image img = resize_bilinear(image, S, S);
    Eigen::VectorXd f = Eigen::VectorXd::Zero(64 + 32 + 16 + 16);

    // 4x4x4 colour histogram.
    for (int y = 0; y < S; ++y)
        for (int x = 0; x < S; ++x) {
            int bin = 0;
            for (int c = 0; c < 3; ++c) bin = bin * 4 + std::clamp(static_cast<int>(img.at(x, y, c) * 4), 0, 3);
            f(bin) += 1.0 / (S * S);
        }

    // Oriented-gradient histograms, 8 unsigned bins per image quadrant.
    const cv::Mat lum = luma_mat(img, S, S);
    cv::Mat gx, gy;
    cv::Sobel(lum, gx, CV_64F, 1, 0, 3, 1, 0, cv::BORDER_REFLECT);
    cv::Sobel(lum, gy, CV_64F, 0, 1, 3, 1, 0, cv::BORDER_REFLECT);
    for (int q = 0; q < 4; ++q) {
        double mass = 0;
        Eigen::VectorXd hist = Eigen::VectorXd::Zero(8);
        for (int y = (q / 2) * S / 2; y < (q / 2 + 1) * S / 2; ++y)
            for (int x = (q % 2) * S / 2; x < (q % 2 + 1) * S / 2; ++x) {
                const double dx = gx.at<double>(y, x), dy = gy.at<double>(y, x);
                const double mag = std::hypot(dx, dy);
                double theta = std::atan2(dy, dx);
                if (theta < 0) theta += std::numbers::pi;
                hist(std::min(7, static_cast<int>(theta / std::numbers::pi * 8))) += mag;
                mass += mag;
            }
        f.segment(64 + q * 8, 8) = hist / (mass + 1e-12);
    }

    // 4x4 luminance layout: cell means then cell standard deviations.
    for (int cy = 0; cy < 4; ++cy)
        for (int cx = 0; cx < 4; ++cx) {
            const cv::Mat cell = lum(cv::Rect(cx * 16, cy * 16, 16, 16));
            cv::Scalar mean, sd;
            cv::meanStdDev(cell, mean, sd);
            f(96 + cy * 4 + cx) = mean[0];
            f(112 + cy * 4 + cx) = sd[0];
        }
    return f;
}

GaussianFit fit_gaussian(std::span<const Eigen::VectorXd> samples) {
    if (samples.empty()) fail(ErrorCode::EmptyReferences, "no samples to fit");
    const auto& x0 = samples.front();
    Eigen::VectorXd offset = Eigen::VectorXd::Zero(x0.size());
    for (const auto& s : samples) {
        if (s.size() != x0.size()) fail(ErrorCode::DimensionMismatch, "feature vectors differ in length");
        offset += s - x0;
    }
    GaussianFit g;
    const auto n = static_cast<double>(samples.size());
    g.mean = x0 + offset / n;
    g.covariance = Eigen::MatrixXd::Zero(x0.size(), x0.size());
    if (samples.size() > 1) {
        for (const auto& s : samples) {
            const Eigen::VectorXd c = s - g.mean;
            g.covariance += c * c.transpose();
        }
        g.covariance /= n - 1;
    }
    return g;
}

double frechet_distance(const GaussianFit& a, const GaussianFit& b, double shrinkage) {
    if (a.mean.size() != b.mean.size()) fail(ErrorCode::DimensionMismatch, "Gaussians differ in dimension");
    const auto I = Eigen::MatrixXd::Identity(a.mean.size(), a.mean.size());
    const Eigen::MatrixXd sa = a.covariance + shrinkage * I;
    const Eigen::MatrixXd sb = b.covariance + shrinkage * I;
    const Eigen::MatrixXd ra = sqrt_psd(sa);
    const Eigen::MatrixXd cross = sqrt_psd(ra * sb * ra);
    return (a.mean - b.mean).squaredNorm() + sa.trace() + sb.trace() - 2 * cross.trace();
}

double point_mass_fid(std::span<const Eigen::VectorXd> reference_features, const Eigen::VectorXd& generated) {
    if (reference_features.empty()) fail(ErrorCode::EmptyReferences, "no reference features");
    const auto g = fit_gaussian(reference_features);
    if (generated.size() != g.mean.size()) fail(ErrorCode::DimensionMismatch, "generated feature length differs");
    return (g.mean - generated).squaredNorm() + g.covariance.trace();
}

BaselineScores baseline_scores(const Image& generated, std::span<const Image> references,
                               const FeatureExtractor* extractor) {
    if (references.empty()) fail(ErrorCode::EmptyReferences, "no reference images");
    BaselineScores out;
    for (const auto& r : references) {
        out.lpips += lpips_distance(generated, r);
        out.ssim += ssim(generated, r);
    }
    out.lpips /= static_cast<double>(references.size());
    out.ssim /= static_cast<double>(references.size());
    if (!extractor) {
        out.fid_error = std::string(to_string(ErrorCode::FeatureExtractorUnavailable)) + ": no feature extractor configured";
        return out;
    }
    try {
        std::vector<Eigen::VectorXd> feats;
        for (const auto& r : references) feats.push_back(extractor->extract(r));
        out.fid = point_mass_fid(feats, extractor->extract(generated));
    } catch (const Error& e) {
        out.fid_error = std::string(to_string(ErrorCode::FeatureExtractorUnavailable)) + ": " + e.what();
    }
    return out;
}

}  // namespace cultdiff
