// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "cultdiff/image.hpp"

namespace cultdiff {

struct EncoderSpec {
    std::string architecture = "vit";
    int image_size = 224;
    int patch_size = 16;
    int hidden_dim = 768;
    int layers = 12;
    int heads = 12;
    int mlp_dim = 3072;
    /// Random initialization seed, used when `pretrained` is empty.
    std::uint64_t init_seed = 0;
    /// Path to a weights file from a previous checkpoint.
    std::string pretrained;
    std::array<double, 3> pixel_mean{0.5, 0.5, 0.5};
    std::array<double, 3> pixel_std{0.5, 0.5, 0.5};

    int num_patches() const { return (image_size / patch_size) * (image_size / patch_size); }
    int patch_dim() const { return patch_size * patch_size * 3; }
    /// Throws Error(InvalidConfig).
    void validate() const;
    nlohmann::json to_json() const;
    static EncoderSpec from_json(const nlohmann::json& j);
    static EncoderSpec vit_base() { return {}; }
};

/// Pre-norm vision transformer with a CLS token. Parameters live in one flat buffer so the
/// optimizer, serialization and gradient checks can treat them uniformly.
class VitEncoder {
public:
    struct Tape;

    explicit VitEncoder(EncoderSpec spec);
    ~VitEncoder();
    VitEncoder(const VitEncoder&);
    VitEncoder& operator=(const VitEncoder&);
    VitEncoder(VitEncoder&&) noexcept;
    VitEncoder& operator=(VitEncoder&&) noexcept;

    const EncoderSpec& spec() const { return m_spec; }
    std::size_t parameter_count() const { return m_params.size(); }
    std::span<double> parameters() { return m_params; }
    std::span<const double> parameters() const { return m_params; }

    /// Resize to the input resolution, standardize channels, cut into patch rows.
    Eigen::MatrixXd preprocess(const Image& image) const;

    /// Raw CLS embedding (hidden_dim). Records activations into `tape` when given.
    Eigen::VectorXd forward(const Eigen::MatrixXd& patches, Tape* tape = nullptr) const;
    Eigen::VectorXd forward(const Image& image) const { return forward(preprocess(image)); }

    /// Accumulates dL/dparams into `grad` (same layout as parameters()).
    void backward(const Tape& tape, const Eigen::VectorXd& d_embedding, std::span<double> grad) const;

    void save(const std::filesystem::path& path) const;
    /// Throws Error(DimensionMismatch) when the file does not match this spec.
    void load(const std::filesystem::path& path);

private:
    struct Layout;
    EncoderSpec m_spec;
    std::unique_ptr<Layout> m_layout;
    std::vector<double> m_params;
};

struct VitEncoder::Tape {
    struct Layer {
        Eigen::MatrixXd x_in, xhat1, y1, qkv, o, h1, xhat2, y2, u, g;
        Eigen::VectorXd rstd1, rstd2;
        std::vector<Eigen::MatrixXd> attn;
    };
    Eigen::MatrixXd patches;
    std::vector<Layer> layers;
    Eigen::RowVectorXd xhat_cls;
    double rstd_cls = 0;
};

}  // namespace cultdiff
