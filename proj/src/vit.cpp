// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "cultdiff/vit.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "cultdiff/error.hpp"
#include "cultdiff/rng.hpp"

namespace cultdiff {

using Mat = Eigen::MatrixXd;
using RowVec = Eigen::RowVectorXd;
using MatMap = Eigen::Map<Mat>;
using RowMap = Eigen::Map<RowVec>;
using CMatMap = Eigen::Map<const Mat>;
using CRowMap = Eigen::Map<const RowVec>;

namespace {

constexpr double kLnEps = 1e-6;
constexpr char kMagic[8] = {'C', 'D', 'V', 'I', 'T', '0', '0', '1'};

double gelu(double x) {
    constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
    return 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x)));
}

double gelu_grad(double x) {
    constexpr double c = 0.7978845608028654;
    const double inner = c * (x + 0.044715 * x * x * x);
    const double t = std::tanh(inner);
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * c * (1.0 + 3.0 * 0.044715 * x * x);
}

void ln_forward(const Mat& x, const CRowMap& g, const CRowMap& b, Mat& xhat, Eigen::VectorXd& rstd, Mat& y) {
    const auto d = static_cast<double>(x.cols());
    xhat.resize(x.rows(), x.cols());
    rstd.resize(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double mu = x.row(r).sum() / d;
        const double var = (x.row(r).array() - mu).square().sum() / d;
        rstd(r) = 1.0 / std::sqrt(var + kLnEps);
        xhat.row(r) = (x.row(r).array() - mu) * rstd(r);
    }
    y = (xhat.array().rowwise() * g.array()).rowwise() + b.array();
}

Mat ln_backward(const Mat& dy, const CRowMap& g, const Mat& xhat, const Eigen::VectorXd& rstd, RowMap dg, RowMap db) {
    dg += (dy.array() * xhat.array()).colwise().sum().matrix();
    db += dy.colwise().sum();
    const Mat dxhat = dy.array().rowwise() * g.array();
    const auto d = static_cast<double>(dy.cols());
    Mat dx(dy.rows(), dy.cols());
    for (Eigen::Index r = 0; r < dy.rows(); ++r) {
        const double m1 = dxhat.row(r).sum() / d;
        const double m2 = dxhat.row(r).dot(xhat.row(r)) / d;
        dx.row(r) = rstd(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
    }
    return dx;
}

void softmax_rows(Mat& s) {
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
        const double mx = s.row(r).maxCoeff();
        s.row(r) = (s.row(r).array() - mx).exp();
        s.row(r) /= s.row(r).sum();
    }
}

}  // namespace

// ---- spec -------------------------------------------------------------------------------

void EncoderSpec::validate() const {
    auto bad = [](const std::string& msg) { fail(ErrorCode::InvalidConfig, "encoder: " + msg); };
    if (architecture != "vit") bad("unsupported architecture '" + architecture + "'");
    if (image_size <= 0 || patch_size <= 0 || image_size % patch_size != 0)
        bad("image_size must be a positive multiple of patch_size");
    if (hidden_dim <= 0 || heads <= 0 || hidden_dim % heads != 0) bad("hidden_dim must be a multiple of heads");
    if (layers < 0 || mlp_dim <= 0) bad("layers and mlp_dim must be positive");
    for (double s : pixel_std)
        if (!(s > 0)) bad("pixel_std must be positive");
}

nlohmann::json EncoderSpec::to_json() const {
    return {{"architecture", architecture}, {"image_size", image_size}, {"patch_size", patch_size},
            {"hidden_dim", hidden_dim},     {"layers", layers},         {"heads", heads},
            {"mlp_dim", mlp_dim},           {"init_seed", init_seed},   {"pretrained", pretrained},
            {"pixel_mean", pixel_mean},     {"pixel_std", pixel_std}};
}

EncoderSpec EncoderSpec::from_json(const nlohmann::json& j) {
    EncoderSpec s;
    try {
        s.architecture = j.value("architecture", s.architecture);
        s.image_size = j.value("image_size", s.image_size);
        s.patch_size = j.value("patch_size", s.patch_size);
        s.hidden_dim = j.value("hidden_dim", s.hidden_dim);
        s.layers = j.value("layers", s.layers);
        s.heads = j.value("heads", s.heads);
        s.mlp_dim = j.value("mlp_dim", s.mlp_dim);
        s.init_seed = j.value("init_seed", s.init_seed);
        s.pretrained = j.value("pretrained", s.pretrained);
        s.pixel_mean = j.value("pixel_mean", s.pixel_mean);
        s.pixel_std = j.value("pixel_std", s.pixel_std);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::InvalidConfig, std::string("encoder spec: ") + e.what());
    }
    s.validate();
    return s;
}

// ---- parameter layout -----------------------------------------------------------------

struct Slot {
    std::size_t offset = 0;
    int rows = 0;
    int cols = 0;
};

struct VitEncoder::Layout {
    struct LayerSlots {
        Slot ln1_g, ln1_b, wqkv, bqkv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2;
    };
    Slot w_pe, b_pe, cls, pos;
    std::vector<LayerSlots> layers;
    Slot lnf_g, lnf_b;
    std::size_t total = 0;

    explicit Layout(const EncoderSpec& s) {
        auto add = [&](int r, int c) {
            Slot slot{total, r, c};
            total += static_cast<std::size_t>(r) * static_cast<std::size_t>(c);
            return slot;
        };
        const int d = s.hidden_dim, m = s.mlp_dim;
        w_pe = add(s.patch_dim(), d);
        b_pe = add(1, d);
        cls = add(1, d);
        pos = add(s.num_patches() + 1, d);
        for (int l = 0; l < s.layers; ++l) {
            LayerSlots ls;
            ls.ln1_g = add(1, d);
            ls.ln1_b = add(1, d);
            ls.wqkv = add(d, 3 * d);
            ls.bqkv = add(1, 3 * d);
            ls.wo = add(d, d);
            ls.bo = add(1, d);
            ls.ln2_g = add(1, d);
            ls.ln2_b = add(1, d);
            ls.w1 = add(d, m);
            ls.b1 = add(1, m);
            ls.w2 = add(m, d);
            ls.b2 = add(1, d);
            layers.push_back(ls);
        }
        lnf_g = add(1, d);
        lnf_b = add(1, d);
    }
};

namespace {

CMatMap cmat(const std::vector<double>& p, const Slot& s) { return {p.data() + s.offset, s.rows, s.cols}; }
CRowMap crow(const std::vector<double>& p, const Slot& s) { return {p.data() + s.offset, s.cols}; }
MatMap gmat(std::span<double> g, const Slot& s) { return {g.data() + s.offset, s.rows, s.cols}; }
RowMap grow(std::span<double> g, const Slot& s) { return {g.data() + s.offset, s.cols}; }

}  // namespace

VitEncoder::VitEncoder(EncoderSpec spec) : m_spec(std::move(spec)) {
    m_spec.validate();
    m_layout = std::make_unique<Layout>(m_spec);
    m_params.assign(m_layout->total, 0.0);
    Rng rng(m_spec.init_seed);
    auto fill = [&](const Slot& s, double std) {
        auto* p = m_params.data() + s.offset;
        for (std::size_t i = 0; i < static_cast<std::size_t>(s.rows) * s.cols; ++i) p[i] = std * rng.normal();
    };
    auto ones = [&](const Slot& s) {
        std::fill_n(m_params.data() + s.offset, static_cast<std::size_t>(s.rows) * s.cols, 1.0);
    };
    auto xavier = [](const Slot& s) { return std::sqrt(2.0 / (s.rows + s.cols)); };
    const auto& L = *m_layout;
    fill(L.w_pe, 1.0 / std::sqrt(static_cast<double>(L.w_pe.rows)));
    fill(L.pos, 0.02);
    for (const auto& ls : L.layers) {
        ones(ls.ln1_g);
        ones(ls.ln2_g);
        fill(ls.wqkv, xavier(ls.wqkv));
        fill(ls.wo, xavier(ls.wo));
        fill(ls.w1, xavier(ls.w1));
        fill(ls.w2, xavier(ls.w2));
    }
    ones(L.lnf_g);
    if (!m_spec.pretrained.empty()) load(m_spec.pretrained);
}

VitEncoder::~VitEncoder() = default;
VitEncoder::VitEncoder(VitEncoder&&) noexcept = default;
VitEncoder& VitEncoder::operator=(VitEncoder&&) noexcept = default;
VitEncoder::VitEncoder(const VitEncoder& o)
    : m_spec(o.m_spec), m_layout(std::make_unique<Layout>(*o.m_layout)), m_params(o.m_params) {}
VitEncoder& VitEncoder::operator=(const VitEncoder& o) {
    if (this != &o) {
        m_spec = o.m_spec;
        m_layout = std::make_unique<Layout>(*o.m_layout);
        m_params = o.m_params;
    }
    return *this;
}

Eigen::MatrixXd VitEncoder::preprocess(const Image& image) const {
    if (image.empty()) fail(ErrorCode::UnreadableImage, "empty image");
    const int s = m_spec.image_size, p = m_spec.patch_size, grid = s / p;
    const Image img = (image.width == s && image.height == s) ? image : resize_bilinear(image, s, s);
    Mat patches(grid * grid, m_spec.patch_dim());
    for (int gy = 0; gy < grid; ++gy)
        for (int gx = 0; gx < grid; ++gx) {
            const int row = gy * grid + gx;
            int col = 0;
            for (int dy = 0; dy < p; ++dy)
                for (int dx = 0; dx < p; ++dx)
                    for (int c = 0; c < 3; ++c)
                        patches(row, col++) =
                            (img.at(gx * p + dx, gy * p + dy, c) - m_spec.pixel_mean[c]) / m_spec.pixel_std[c];
        }
    return patches;
}

Eigen::VectorXd VitEncoder::forward(const Eigen::MatrixXd& patches, Tape* tape) const {
    const auto& L = *m_layout;
    const auto& P = m_params;
    const int d = m_spec.hidden_dim, heads = m_spec.heads, dh = d / heads;
    const int tokens = m_spec.num_patches() + 1;
    if (patches.rows() != tokens - 1 || patches.cols() != m_spec.patch_dim())
        fail(ErrorCode::DimensionMismatch, "patch matrix does not match the encoder spec");
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Mat x(tokens, d);
    x.row(0) = crow(P, L.cls);
    x.bottomRows(tokens - 1) = (patches * cmat(P, L.w_pe)).rowwise() + crow(P, L.b_pe);
    x += cmat(P, L.pos);
    if (tape) {
        tape->patches = patches;
        tape->layers.assign(L.layers.size(), {});
    }

    for (std::size_t l = 0; l < L.layers.size(); ++l) {
        const auto& s = L.layers[l];
        Tape::Layer local;
        Tape::Layer& t = tape ? tape->layers[l] : local;
        t.x_in = x;
        ln_forward(x, crow(P, s.ln1_g), crow(P, s.ln1_b), t.xhat1, t.rstd1, t.y1);
        t.qkv = (t.y1 * cmat(P, s.wqkv)).rowwise() + crow(P, s.bqkv);
        t.o.resize(tokens, d);
        t.attn.resize(static_cast<std::size_t>(heads));
        for (int h = 0; h < heads; ++h) {
            const auto q = t.qkv.middleCols(h * dh, dh);
            const auto k = t.qkv.middleCols(d + h * dh, dh);
            const auto v = t.qkv.middleCols(2 * d + h * dh, dh);
            Mat a = (q * k.transpose()) * scale;
            softmax_rows(a);
            t.o.middleCols(h * dh, dh) = a * v;
            t.attn[static_cast<std::size_t>(h)] = std::move(a);
        }
        t.h1 = x + ((t.o * cmat(P, s.wo)).rowwise() + crow(P, s.bo));
        ln_forward(t.h1, crow(P, s.ln2_g), crow(P, s.ln2_b), t.xhat2, t.rstd2, t.y2);
        t.u = (t.y2 * cmat(P, s.w1)).rowwise() + crow(P, s.b1);
        t.g = t.u.unaryExpr(&gelu);
        x = t.h1 + ((t.g * cmat(P, s.w2)).rowwise() + crow(P, s.b2));
    }

    // Final norm on the CLS token only.
    Mat cls = x.topRows(1), xhat, y;
    Eigen::VectorXd rstd;
    ln_forward(cls, crow(P, L.lnf_g), crow(P, L.lnf_b), xhat, rstd, y);
    if (tape) {
        tape->xhat_cls = xhat.row(0);
        tape->rstd_cls = rstd(0);
    }
    return y.row(0).transpose();
}

void VitEncoder::backward(const Tape& tape, const Eigen::VectorXd& d_embedding, std::span<double> grad) const {
    const auto& L = *m_layout;
    const auto& P = m_params;
    if (grad.size() != m_params.size()) fail(ErrorCode::DimensionMismatch, "gradient buffer has the wrong size");
    if (d_embedding.size() != m_spec.hidden_dim) fail(ErrorCode::DimensionMismatch, "embedding gradient size");
    const int d = m_spec.hidden_dim, heads = m_spec.heads, dh = d / heads;
    const int tokens = m_spec.num_patches() + 1;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Mat dx = Mat::Zero(tokens, d);
    {
        Mat xhat = tape.xhat_cls;
        Eigen::VectorXd rstd(1);
        rstd(0) = tape.rstd_cls;
        dx.topRows(1) = ln_backward(d_embedding.transpose(), crow(P, L.lnf_g), xhat, rstd, grow(grad, L.lnf_g),
                                    grow(grad, L.lnf_b));
    }

    for (std::size_t li = L.layers.size(); li-- > 0;) {
        const auto& s = L.layers[li];
        const auto& t = tape.layers[li];
        // MLP branch
        const Mat& dz = dx;
        gmat(grad, s.w2) += t.g.transpose() * dz;
        grow(grad, s.b2) += dz.colwise().sum();
        Mat du = (dz * cmat(P, s.w2).transpose()).array() * t.u.unaryExpr(&gelu_grad).array();
        gmat(grad, s.w1) += t.y2.transpose() * du;
        grow(grad, s.b1) += du.colwise().sum();
        const Mat dy2 = du * cmat(P, s.w1).transpose();
        Mat dh1 = dx + ln_backward(dy2, crow(P, s.ln2_g), t.xhat2, t.rstd2, grow(grad, s.ln2_g), grow(grad, s.ln2_b));

        // Attention branch
        gmat(grad, s.wo) += t.o.transpose() * dh1;
        grow(grad, s.bo) += dh1.colwise().sum();
        const Mat d_o = dh1 * cmat(P, s.wo).transpose();
        Mat dqkv(tokens, 3 * d);
        for (int h = 0; h < heads; ++h) {
            const Mat& a = t.attn[static_cast<std::size_t>(h)];
            const auto q = t.qkv.middleCols(h * dh, dh);
            const auto k = t.qkv.middleCols(d + h * dh, dh);
            const auto v = t.qkv.middleCols(2 * d + h * dh, dh);
            const auto doh = d_o.middleCols(h * dh, dh);
            const Mat da = doh * v.transpose();
            dqkv.middleCols(2 * d + h * dh, dh) = a.transpose() * doh;
            const Eigen::VectorXd inner = (da.array() * a.array()).rowwise().sum();
            const Mat ds = (a.array() * (da.colwise() - inner).array()) * scale;
            dqkv.middleCols(h * dh, dh) = ds * k;
            dqkv.middleCols(d + h * dh, dh) = ds.transpose() * q;
        }
        gmat(grad, s.wqkv) += t.y1.transpose() * dqkv;
        grow(grad, s.bqkv) += dqkv.colwise().sum();
        const Mat dy1 = dqkv * cmat(P, s.wqkv).transpose();
        dx = dh1 + ln_backward(dy1, crow(P, s.ln1_g), t.xhat1, t.rstd1, grow(grad, s.ln1_g), grow(grad, s.ln1_b));
    }

    gmat(grad, L.pos) += dx;
    grow(grad, L.cls) += dx.row(0);
    const auto de = dx.bottomRows(tokens - 1);
    gmat(grad, L.w_pe) += tape.patches.transpose() * de;
    grow(grad, L.b_pe) += de.colwise().sum();
}

void VitEncoder::save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
    const std::uint64_t n = m_params.size();
    out.write(kMagic, sizeof kMagic);
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    out.write(reinterpret_cast<const char*>(m_params.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!out) fail(ErrorCode::Io, "short write to " + path.string());
}

void VitEncoder::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::EncoderNotLoaded, "cannot read weights " + path.string());
    char magic[sizeof kMagic];
    std::uint64_t n = 0;
    in.read(magic, sizeof magic);
    in.read(reinterpret_cast<char*>(&n), sizeof n);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        fail(ErrorCode::EncoderNotLoaded, path.string() + " is not an encoder weights file");
    if (n != m_params.size())
        fail(ErrorCode::DimensionMismatch, path.string() + " holds " + std::to_string(n) + " parameters, spec needs " +
                                               std::to_string(m_params.size()));
    in.read(reinterpret_cast<char*>(m_params.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) fail(ErrorCode::EncoderNotLoaded, "truncated weights file " + path.string());
}

}  // namespace cultdiff
