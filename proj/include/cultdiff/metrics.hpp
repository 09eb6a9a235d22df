// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cultdiff/image.hpp"

namespace cultdiff {

/// Size both images are compared at: the one with fewer pixels.
std::pair<int, int> common_resolution(const Image& a, const Image& b);

/// Mean SSIM over an 11x11 Gaussian window (sigma 1.5) on luminance, dynamic range 1.
double ssim(const Image& a, const Image& b);

/// Perceptual distance in the LPIPS mould, built on a fixed filter bank instead of learned
/// network activations: per-pixel unit-normalized filter responses, squared differences
/// averaged over space and pyramid levels. Zero for identical inputs.
double lpips_distance(const Image& a, const Image& b);

/// Produces a fixed-length feature vector for distribution distances.
class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual std::string name() const = 0;
    virtual Eigen::VectorXd extract(const Image& image) const = 0;
};

/// Offline extractor: colour histogram, oriented-gradient histograms and a coarse
/// luminance layout computed at 64x64.
class HandcraftedFeatureExtractor final : public FeatureExtractor {
public:
    std::string name() const override { return "handcrafted-v1"; }
    Eigen::VectorXd extract(const Image& image) const override;
};

struct GaussianFit {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;  // sample covariance, unbiased; zero for a single sample
};

/// Mean is accumulated as x0 + mean(x_i - x0) so identical samples give x0 exactly.
GaussianFit fit_gaussian(std::span<const Eigen::VectorXd> samples);

inline constexpr double kCovarianceShrinkage = 1e-6;

/// Frechet distance between two Gaussians. `shrinkage` is added to both diagonals before
/// the matrix square root.
double frechet_distance(const GaussianFit& a, const GaussianFit& b, double shrinkage = kCovarianceShrinkage);

/// Frechet distance between the reference Gaussian and a point mass at `generated`:
/// |mu_r - x|^2 + tr(Sigma_r). Throws Error(EmptyReferences).
double point_mass_fid(std::span<const Eigen::VectorXd> reference_features, const Eigen::VectorXd& generated);

struct BaselineScores {
    std::optional<double> fid;
    double lpips = 0;
    double ssim = 0;
    /// Set when FID could not be computed.
    std::optional<std::string> fid_error;
};

/// LPIPS and SSIM are means over references. FID is absent (with fid_error) when
/// `extractor` is null. Throws Error(EmptyReferences).
BaselineScores baseline_scores(const Image& generated, std::span<const Image> references,
                               const FeatureExtractor* extractor);

}  // namespace cultdiff
