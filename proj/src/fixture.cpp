// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "cultdiff/fixture.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "cultdiff/error.hpp"
#include "cultdiff/image.hpp"
#include "cultdiff/rng.hpp"

namespace cultdiff {

namespace {

using Rgb = std::array<double, 3>;

enum class Shape { Disc, Square, Triangle, Cross };

struct Culture {
    Rgb background;
    std::array<Rgb, 3> palette;
    Shape shape;
};

Rgb hsv(double h, double s, double v) {
    const double c = v * s, hp = std::fmod(h, 1.0) * 6, x = c * (1 - std::fabs(std::fmod(hp, 2.0) - 1));
    Rgb rgb{};
    switch (static_cast<int>(hp)) {
        case 0: rgb = {c, x, 0}; break;
        case 1: rgb = {x, c, 0}; break;
        case 2: rgb = {0, c, x}; break;
        case 3: rgb = {0, x, c}; break;
        case 4: rgb = {x, 0, c}; break;
        default: rgb = {c, 0, x}; break;
    }
    for (auto& ch : rgb) ch += v - c;
    return rgb;
}

Culture culture(std::size_t k, std::uint64_t seed) {
    static const std::array<Culture, 4> fixed{{
        {{0.95, 0.90, 0.75}, {{{0.80, 0.15, 0.10}, {0.95, 0.55, 0.10}, {0.50, 0.25, 0.10}}}, Shape::Disc},
        {{0.15, 0.20, 0.35}, {{{0.10, 0.70, 0.70}, {0.90, 0.90, 0.95}, {0.95, 0.85, 0.20}}}, Shape::Square},
        {{0.20, 0.45, 0.20}, {{{0.95, 0.80, 0.10}, {0.60, 0.10, 0.50}, {0.10, 0.10, 0.10}}}, Shape::Triangle},
        {{0.85, 0.85, 0.90}, {{{0.20, 0.30, 0.80}, {0.90, 0.30, 0.60}, {0.30, 0.70, 0.30}}}, Shape::Cross},
    }};
    if (k < fixed.size()) return fixed[k];
    Rng rng(Rng::mix(seed ^ (k * 0x9e3779b97f4a7c15ULL)));
    const double h = rng.uniform();
    Culture c;
    c.background = hsv(h, 0.3, 0.3 + 0.6 * rng.uniform());
    for (std::size_t i = 0; i < 3; ++i) c.palette[i] = hsv(h + 0.15 * static_cast<double>(i + 1), 0.8, 0.9);
    c.shape = static_cast<Shape>(k % 4);
    return c;
}

struct Element {
    double x, y, r;
    std::size_t colour;
};

bool inside(Shape s, double dx, double dy, double r) {
    switch (s) {
        case Shape::Disc: return dx * dx + dy * dy <= r * r;
        case Shape::Square: return std::fabs(dx) <= 0.8 * r && std::fabs(dy) <= 0.8 * r;
        case Shape::Triangle: return dy <= 0.8 * r && dy >= -r && std::fabs(dx) <= (dy + r) * 0.6;
        case Shape::Cross: return (std::fabs(dx) <= 0.3 * r && std::fabs(dy) <= r) || (std::fabs(dy) <= 0.3 * r && std::fabs(dx) <= r);
    }
    return false;
}

/// Anchor layout of an artifact; categories differ in element count, size and arrangement.
std::vector<Element> layout(Category cat, Rng& rng) {
    std::vector<Element> out;
    switch (cat) {
        case Category::Architecture: {
            const int n = 2 + static_cast<int>(rng.index(2));
            for (int i = 0; i < n; ++i)
                out.push_back({(i + 0.5) / n, 0.62 + 0.08 * rng.uniform(), 0.2 + 0.05 * rng.uniform(), rng.index(3)});
            break;
        }
        case Category::Clothing:
            for (int i = 0; i < 3; ++i)
                out.push_back({0.5 + 0.06 * (rng.uniform() - 0.5), 0.2 + 0.3 * i, 0.14 + 0.03 * rng.uniform(), rng.index(3)});
            break;
        case Category::Food: {
            const int n = 4 + static_cast<int>(rng.index(2));
            const double phase = rng.uniform() * 6.283185307179586;
            for (int i = 0; i < n; ++i) {
                const double a = phase + 6.283185307179586 * i / n;
                out.push_back({0.5 + 0.27 * std::cos(a), 0.5 + 0.27 * std::sin(a), 0.1 + 0.03 * rng.uniform(), rng.index(3)});
            }
            break;
        }
    }
    return out;
}

Rgb mix(const Rgb& a, const Rgb& b, double t) {
    return {a[0] * t + b[0] * (1 - t), a[1] * t + b[1] * (1 - t), a[2] * t + b[2] * (1 - t)};
}

/// Renders the artifact's anchors. Each element keeps its own culture with probability q,
/// otherwise it takes the shape and palette of `other`; the background blends by q.
Image render(const std::vector<Element>& anchors, const Culture& own, const Culture& other, double q, int size,
             Rng& rng) {
    Image img(size, size);
    const Rgb bg = mix(own.background, other.background, q);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<float>(bg[static_cast<std::size_t>(c)]);
    for (const auto& e : anchors) {
        const bool keep = rng.uniform() < q;
        const Culture& src = keep ? own : other;
        const double cx = (e.x + 0.05 * (rng.uniform() - 0.5)) * size;
        const double cy = (e.y + 0.05 * (rng.uniform() - 0.5)) * size;
        const double r = e.r * (0.9 + 0.2 * rng.uniform()) * size;
        const Rgb col = src.palette[e.colour];
        for (int y = std::max(0, static_cast<int>(cy - r - 1)); y <= std::min(size - 1, static_cast<int>(cy + r + 1)); ++y)
            for (int x = std::max(0, static_cast<int>(cx - r - 1)); x <= std::min(size - 1, static_cast<int>(cx + r + 1)); ++x)
                if (inside(src.shape, x + 0.5 - cx, y + 0.5 - cy, r))
                    for (int c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<float>(col[static_cast<std::size_t>(c)]);
    }
    for (auto& p : img.pixels) p = std::clamp(p + static_cast<float>(0.03 * rng.normal()), 0.0f, 1.0f);
    return img;
}

int likert(double mean, Rng& rng, double noise) {
    return std::clamp(static_cast<int>(std::lround(mean + noise * rng.normal())), kLikertMin, kLikertMax);
}

}  // namespace

CatalogConfig fixture_catalog_config(const FixtureOptions& options) {
    CatalogConfig config;
    std::vector<CountryInfo> chosen;
    for (const auto& code : options.countries) {
        const auto it = std::find_if(config.countries.begin(), config.countries.end(),
                                     [&](const CountryInfo& c) { return c.code == code; });
        if (it == config.countries.end()) fail(ErrorCode::UnknownCountry, "fixture country '" + code + "' is not known");
        chosen.push_back(*it);
    }
    config.countries = chosen;
    return config;
}

FixtureTruth build_fixture_catalog(Catalog& catalog, const FixtureOptions& options) {
    if (options.countries.size() < 2) fail(ErrorCode::InvalidConfig, "the fixture needs at least two cultures");
    if (options.image_size < 8) fail(ErrorCode::InvalidConfig, "fixture images must be at least 8 pixels");
    FixtureTruth truth;
    Rng root(options.seed);
    const std::size_t n = options.countries.size();
    catalog.batch([&] {
        for (std::size_t k = 0; k < n; ++k) {
            const Culture own = culture(k, options.seed);
            for (Category cat : kAllCategories)
                for (int i = 0; i < options.artifacts_per_category; ++i) {
                    Rng rng = root.fork(Rng::mix(k * 1000003 + static_cast<std::size_t>(cat) * 1009 + static_cast<std::size_t>(i)));
                    const auto id = catalog.register_artifact(
                        options.countries[k], cat, std::string(to_string(cat)) + " motif " + std::to_string(i + 1));
                    const auto anchors = layout(cat, rng);
                    for (int r = 0; r < options.references_per_artifact; ++r)
                        catalog.register_image_bytes(id, ImageSource::Real,
                                                     encode_png(render(anchors, own, own, 1.0, options.image_size, rng)));
                    for (std::size_t m = 0; m < options.models.size(); ++m) {
                        const std::size_t other_k = (k + 1 + rng.index(n - 1)) % n;
                        const double q = rng.uniform();
                        const Image img = render(anchors, own, culture(other_k, options.seed), q, options.image_size, rng);
                        const auto gid = catalog.register_image_bytes(id, ImageSource::Generated, encode_png(img),
                                                                      options.models[m], static_cast<std::int64_t>(m));
                        truth.fidelity[gid] = q;
                    }
                }
        }
    });
    return truth;
}

std::vector<Survey> build_fixture_surveys(SurveyStore& store, const FixtureOptions& options) {
    SurveyOptions so;
    so.models = options.models;
    so.artifacts_per_category = options.artifacts_per_category;
    so.layout = SurveyLayout::AllModels;
    std::vector<Survey> out;
    for (std::size_t k = 0; k < options.countries.size(); ++k) {
        auto s = store.build_survey(options.countries[k], options.seed + k, so);
        for (int a = 1; a <= options.annotators; ++a) store.register_annotator(s.id, "oracle-" + std::to_string(a));
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<AnnotationRow> oracle_annotations(std::span<const Survey> surveys, const FixtureTruth& truth,
                                              const FixtureOptions& options) {
    std::vector<AnnotationRow> rows;
    Rng root(Rng::mix(options.seed + 17));
    for (const auto& s : surveys)
        for (int a = 1; a <= options.annotators; ++a) {
            Rng rng = root.fork(Rng::mix(static_cast<std::uint64_t>(s.id.value) * 131 + static_cast<std::uint64_t>(a)));
            for (const auto& q : s.questions) {
                const auto it = truth.fidelity.find(q.generated_image_id);
                if (it == truth.fidelity.end())
                    fail(ErrorCode::MissingArtifact, "no fidelity for image " + std::to_string(q.generated_image_id.value));
                const double mean = 1.0 + 4.0 * it->second;
                AnnotationRow row;
                row.row_number = rows.size() + 1;
                row.question_id = q.id.value;
                row.annotator_id = "oracle-" + std::to_string(a);
                for (auto& v : row.q1) v = likert(mean, rng, options.likert_noise);
                row.q2 = likert(mean, rng, options.likert_noise);
                row.q3 = likert(3.0, rng, 1.0);
                row.inappropriate = false;
                rows.push_back(std::move(row));
            }
        }
    return rows;
}

}  // namespace cultdiff
