// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "cultdiff/simtrain.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "cultdiff/error.hpp"
#include "cultdiff/loss.hpp"
#include "cultdiff/rng.hpp"

namespace cultdiff {

void TrainConfig::validate() const {
    auto bad = [](const std::string& msg) { fail(ErrorCode::InvalidConfig, "train config: " + msg); };
    if (epochs <= 0) bad("epochs must be positive");
    if (!(learning_rate > 0) || !std::isfinite(learning_rate)) bad("learning_rate must be positive");
    if (batch_size <= 0) bad("batch_size must be positive");
    if (!(margin > 0) || !std::isfinite(margin)) bad("margin must be positive and finite");
    if (!(adam_beta1 >= 0 && adam_beta1 < 1) || !(adam_beta2 >= 0 && adam_beta2 < 1)) bad("betas must lie in [0, 1)");
    if (!(adam_eps > 0)) bad("adam_eps must be positive");
}

nlohmann::json TrainConfig::to_json() const {
    return {{"epochs", epochs},
            {"learning_rate", learning_rate},
            {"batch_size", batch_size},
            {"margin", margin},
            {"seed", seed},
            {"normalize_embeddings", normalize_embeddings},
            {"adam_beta1", adam_beta1},
            {"adam_beta2", adam_beta2},
            {"adam_eps", adam_eps}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    try {
        c.epochs = j.value("epochs", c.epochs);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.margin = j.value("margin", c.margin);
        c.seed = j.value("seed", c.seed);
        c.normalize_embeddings = j.value("normalize_embeddings", c.normalize_embeddings);
        c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
        c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
        c.adam_eps = j.value("adam_eps", c.adam_eps);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::InvalidConfig, std::string("train config: ") + e.what());
    }
    c.validate();
    return c;
}

void TrainHistory::write_csv(std::ostream& out) const {
    out << "epoch,train_loss,val_loss,seconds\n";
    out.precision(17);
    for (const auto& e : epochs) out << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ',' << e.seconds << '\n';
}

Adam::Adam(std::size_t n, double lr, double beta1, double beta2, double eps)
    : m_lr(lr), m_b1(beta1), m_b2(beta2), m_eps(eps), m_m(n, 0.0), m_v(n, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
    if (params.size() != m_m.size() || grad.size() != m_m.size())
        fail(ErrorCode::DimensionMismatch, "optimizer state does not match the parameter count");
    ++m_t;
    const double c1 = 1.0 - std::pow(m_b1, static_cast<double>(m_t));
    const double c2 = 1.0 - std::pow(m_b2, static_cast<double>(m_t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_m[i] = m_b1 * m_m[i] + (1.0 - m_b1) * grad[i];
        m_v[i] = m_b2 * m_v[i] + (1.0 - m_b2) * grad[i] * grad[i];
        params[i] -= m_lr * (m_m[i] / c1) / (std::sqrt(m_v[i] / c2) + m_eps);
    }
}

const VitEncoder& Embedder::encoder() const {
    if (!m_encoder) fail(ErrorCode::EncoderNotLoaded, "no encoder loaded");
    return *m_encoder;
}

Eigen::VectorXd Embedder::embed(const Image& image) const {
    const auto e = encoder().forward(image);
    return m_normalize ? l2_normalize(e) : e;
}

std::vector<Eigen::VectorXd> Embedder::embed_batch(std::span<const Image> images) const {
    std::vector<Eigen::VectorXd> out;
    out.reserve(images.size());
    for (const auto& img : images) out.push_back(embed(img));
    return out;
}

const Eigen::MatrixXd& PatchCache::get(ImageId id) {
    std::lock_guard lock(m_mutex);
    auto it = m_cache.find(id);
    if (it == m_cache.end()) it = m_cache.emplace(id, m_encoder.preprocess(m_catalog.load(id))).first;
    return it->second;
}

namespace {

struct BatchOutput {
    double loss = 0;
    std::vector<double> distances;
};

/// Forward (and optionally backward) over a batch of pairs.
BatchOutput run_batch(const VitEncoder& enc, PatchCache& cache, std::span<const ImagePair* const> batch,
                      const TrainConfig& config, std::vector<double>* grad) {
    const std::size_t n = batch.size();
    std::vector<VitEncoder::Tape> tapes_a(grad ? n : 0), tapes_b(grad ? n : 0);
    std::vector<Eigen::VectorXd> ea(n), eb(n);
    std::vector<int> labels(n);
    std::vector<double> weights(n);
    for (std::size_t i = 0; i < n; ++i) {
        ea[i] = enc.forward(cache.get(batch[i]->image_a), grad ? &tapes_a[i] : nullptr);
        eb[i] = enc.forward(cache.get(batch[i]->image_b), grad ? &tapes_b[i] : nullptr);
        labels[i] = batch[i]->label;
        weights[i] = batch[i]->weight;
    }
    const auto lg = margin_loss_and_grad(ea, eb, labels, weights, config.margin, config.normalize_embeddings);
    if (!std::isfinite(lg.loss)) {
        std::string ids;
        for (const auto* p : batch) ids += (ids.empty() ? "" : ",") + p->id;
        fail(ErrorCode::NonFiniteLoss, "loss is " + std::to_string(lg.loss) + " on batch [" + ids + "]");
    }
    if (grad) {
        for (std::size_t i = 0; i < n; ++i) {
            enc.backward(tapes_a[i], lg.grad_a[i], *grad);
            enc.backward(tapes_b[i], lg.grad_b[i], *grad);
        }
    }
    return {lg.loss, lg.distances};
}

std::vector<const ImagePair*> pointers(std::span<const ImagePair> pairs) {
    std::vector<const ImagePair*> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) out.push_back(&p);
    return out;
}

}  // namespace

double evaluate_loss(const VitEncoder& encoder, PatchCache& cache, std::span<const ImagePair> pairs,
                     const TrainConfig& config) {
    if (pairs.empty()) fail(ErrorCode::EmptySplit, "no pairs to evaluate");
    const auto all = pointers(pairs);
    double total = 0;
    for (std::size_t start = 0; start < all.size(); start += static_cast<std::size_t>(config.batch_size)) {
        const auto n = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), all.size() - start);
        total += run_batch(encoder, cache, std::span(all).subspan(start, n), config, nullptr).loss * static_cast<double>(n);
    }
    return total / static_cast<double>(all.size());
}

std::string data_fingerprint(std::span<const ImagePair> train_pairs, std::span<const ImagePair> val_pairs) {
    std::ostringstream s;
    s.precision(17);
    for (const auto* part : {&train_pairs, &val_pairs}) {
        for (const auto& p : *part) s << p.id << ' ' << p.label << ' ' << p.weight << '\n';
        s << "--\n";
    }
    const auto text = s.str();
    return sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

TrainResult train(const Catalog& catalog, std::span<const ImagePair> train_pairs, std::span<const ImagePair> val_pairs,
                  const EncoderSpec& spec, const TrainConfig& config, const TrainOptions& options) {
    config.validate();
    if (train_pairs.empty()) fail(ErrorCode::EmptySplit, "the train split is empty");
    if (val_pairs.empty()) fail(ErrorCode::EmptySplit, "the validation split is empty");

    VitEncoder enc(spec);
    PatchCache cache(catalog, enc);
    Adam adam(enc.parameter_count(), config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps);
    Rng rng(config.seed);

    TrainResult result;
    result.data_fingerprint = data_fingerprint(train_pairs, val_pairs);
    std::vector<double> best_params(enc.parameters().begin(), enc.parameters().end());
    double best_val = std::numeric_limits<double>::infinity();

    auto order = pointers(train_pairs);
    std::vector<double> grad(enc.parameter_count());
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        auto epoch_rng = rng.fork(static_cast<std::uint64_t>(epoch));
        epoch_rng.shuffle(std::span(order));
        double total = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const auto n = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), order.size() - start);
            std::fill(grad.begin(), grad.end(), 0.0);
            const auto out = run_batch(enc, cache, std::span(order).subspan(start, n), config, &grad);
            adam.step(enc.parameters(), grad);
            total += out.loss * static_cast<double>(n);
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = total / static_cast<double>(order.size());
        rec.val_loss = evaluate_loss(enc, cache, val_pairs, config);
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.history.epochs.push_back(rec);
        if (rec.val_loss < best_val) {
            best_val = rec.val_loss;
            result.history.best_epoch = epoch;
            best_params.assign(enc.parameters().begin(), enc.parameters().end());
        }
        if (options.on_epoch) options.on_epoch(rec);
    }

    VitEncoder best = enc;
    std::copy(best_params.begin(), best_params.end(), best.parameters().begin());
    if (options.checkpoint_dir) {
        const auto& dir = *options.checkpoint_dir;
        std::filesystem::create_directories(dir);
        enc.save(dir / "weights.bin");
        best.save(dir / "weights_best.bin");
        write_checkpoint_config(dir, {spec, config, result.data_fingerprint});
        std::ofstream metrics(dir / "metrics.csv");
        result.history.write_csv(metrics);
    }
    result.final_model = Embedder(std::move(enc), config.normalize_embeddings);
    result.best_model = Embedder(std::move(best), config.normalize_embeddings);
    return result;
}

void write_checkpoint_config(const std::filesystem::path& dir, const Checkpoint& ckpt) {
    std::filesystem::create_directories(dir);
    const nlohmann::json j{{"encoder", ckpt.spec.to_json()},
                           {"train", ckpt.config.to_json()},
                           {"data_fingerprint", ckpt.data_fingerprint},
                           {"weights", "weights.bin"},
                           {"best_weights", "weights_best.bin"}};
    std::ofstream out(dir / "config.json");
    if (!out) fail(ErrorCode::Io, "cannot write " + (dir / "config.json").string());
    out << j.dump(2) << '\n';
}

Checkpoint read_checkpoint_config(const std::filesystem::path& dir) {
    std::ifstream in(dir / "config.json");
    if (!in) fail(ErrorCode::EncoderNotLoaded, "no config.json in " + dir.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::InvalidConfig, "checkpoint config: " + std::string(e.what()));
    }
    Checkpoint c;
    c.spec = EncoderSpec::from_json(j.at("encoder"));
    c.spec.pretrained.clear();
    c.config = TrainConfig::from_json(j.at("train"));
    c.data_fingerprint = j.value("data_fingerprint", "");
    return c;
}

Embedder load_checkpoint(const std::filesystem::path& dir, bool best) {
    const auto ckpt = read_checkpoint_config(dir);
    VitEncoder enc(ckpt.spec);
    const auto best_path = dir / "weights_best.bin";
    enc.load(best && std::filesystem::exists(best_path) ? best_path : dir / "weights.bin");
    return Embedder(std::move(enc), ckpt.config.normalize_embeddings);
}

}  // namespace cultdiff
