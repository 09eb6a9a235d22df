// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "cultdiff/catalog.hpp"
#include "cultdiff/pairs.hpp"
#include "cultdiff/vit.hpp"

namespace cultdiff {

struct TrainConfig {
    int epochs = 10;
    double learning_rate = 1e-4;
    int batch_size = 32;
    double margin = 1.0;
    std::uint64_t seed = 0;
    bool normalize_embeddings = true;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    /// Throws Error(InvalidConfig).
    void validate() const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0;
    double val_loss = 0;
    double seconds = 0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;
    void write_csv(std::ostream& out) const;
};

/// Adam without schedule or weight decay.
class Adam {
public:
    Adam(std::size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    void step(std::span<double> params, std::span<const double> grad);
    std::int64_t steps() const { return m_t; }

private:
    double m_lr, m_b1, m_b2, m_eps;
    std::int64_t m_t = 0;
    std::vector<double> m_m, m_v;
};

/// A trained (or freshly initialized) encoder plus the embedding convention.
/// Immutable after construction; safe for concurrent inference.
class Embedder {
public:
    Embedder() = default;
    Embedder(VitEncoder encoder, bool normalize)
        : m_encoder(std::make_shared<VitEncoder>(std::move(encoder))), m_normalize(normalize) {}

    bool loaded() const { return m_encoder != nullptr; }
    bool normalizes() const { return m_normalize; }
    /// Throws Error(EncoderNotLoaded).
    const VitEncoder& encoder() const;
    Eigen::VectorXd embed(const Image& image) const;
    std::vector<Eigen::VectorXd> embed_batch(std::span<const Image> images) const;

private:
    std::shared_ptr<const VitEncoder> m_encoder;
    bool m_normalize = true;
};

/// Caches preprocessed patch matrices per image id.
class PatchCache {
public:
    PatchCache(const Catalog& catalog, const VitEncoder& encoder) : m_catalog(catalog), m_encoder(encoder) {}
    const Eigen::MatrixXd& get(ImageId id);

private:
    const Catalog& m_catalog;
    const VitEncoder& m_encoder;
    std::map<ImageId, Eigen::MatrixXd> m_cache;
    std::mutex m_mutex;
};

struct TrainResult {
    Embedder final_model;
    Embedder best_model;
    TrainHistory history;
    std::string data_fingerprint;
};

struct TrainOptions {
    /// Directory receiving weights.bin, weights_best.bin, config.json and metrics.csv.
    std::optional<std::filesystem::path> checkpoint_dir;
    /// Called after every epoch.
    std::function<void(const EpochRecord&)> on_epoch;
};

/// Mean weighted margin loss of a model over pairs (no gradient).
double evaluate_loss(const VitEncoder& encoder, PatchCache& cache, std::span<const ImagePair> pairs,
                     const TrainConfig& config);

/// Minimizes the weighted margin loss with shuffled mini-batches. Throws Error(EmptySplit)
/// or Error(NonFiniteLoss) naming the offending batch.
TrainResult train(const Catalog& catalog, std::span<const ImagePair> train_pairs, std::span<const ImagePair> val_pairs,
                  const EncoderSpec& spec, const TrainConfig& config, const TrainOptions& options = {});

/// Hash of the pair lists that a training run consumed.
std::string data_fingerprint(std::span<const ImagePair> train_pairs, std::span<const ImagePair> val_pairs);

struct Checkpoint {
    EncoderSpec spec;
    TrainConfig config;
    std::string data_fingerprint;
};

void write_checkpoint_config(const std::filesystem::path& dir, const Checkpoint& ckpt);
Checkpoint read_checkpoint_config(const std::filesystem::path& dir);
/// Loads `weights_best.bin` when `best` and present, else `weights.bin`.
Embedder load_checkpoint(const std::filesystem::path& dir, bool best = true);

}  // namespace cultdiff
