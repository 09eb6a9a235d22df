// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "cultdiff/report.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "cultdiff/correlation.hpp"
#include "cultdiff/error.hpp"

namespace cultdiff {

std::vector<AnnotationView> annotation_views(const SurveyStore& store) {
    std::vector<AnnotationView> out;
    std::map<QuestionId, std::optional<AnnotationView>> context;
    for (const auto& rec : store.annotations()) {
        auto& ctx = context[rec.question_id];
        if (!ctx) {
            const auto q = store.question(rec.question_id);
            if (!q) fail(ErrorCode::UnknownQuestion, "annotation for unknown question " + std::to_string(rec.question_id.value));
            const auto art = store.catalog().artifact(q->artifact_id);
            if (!art) fail(ErrorCode::MissingArtifact, "question " + std::to_string(q->id.value) + " has no artifact");
            AnnotationView v;
            v.question = q->id;
            v.country = art->country;
            v.category = art->category;
            v.model_id = q->model_id;
            v.artifact = q->artifact_id;
            v.generated = q->generated_image_id;
            ctx = v;
        }
        AnnotationView v = *ctx;
        v.annotator_id = rec.annotator_id;
        v.answers = rec.answers();
        out.push_back(std::move(v));
    }
    return out;
}

int question_index(std::string_view key) {
    for (std::size_t i = 0; i < kQuestionKeys.size(); ++i)
        if (key == kQuestionKeys[i]) return static_cast<int>(i);
    fail(ErrorCode::InvalidConfig, "unknown question '" + std::string(key) + "'");
}

std::vector<int> question_set(std::string_view name) {
    if (name == "six" || name == "all") return {0, 1, 2, 3, 4, 5};
    if (name == "q1") return {0, 1, 2, 3};
    return {question_index(name)};
}

std::vector<CountryRank> rank_countries(std::span<const AnnotationView> annotations, int question,
                                        const std::optional<std::string>& model,
                                        const std::optional<Category>& category) {
    if (question < 0 || question >= static_cast<int>(kQuestionKeys.size()))
        fail(ErrorCode::InvalidConfig, "question index out of range");
    std::map<std::string, std::pair<long, std::size_t>> sums;
    for (const auto& a : annotations) {
        if (model && a.model_id != *model) continue;
        if (category && a.category != *category) continue;
        auto& [sum, n] = sums[a.country];
        sum += a.answers[static_cast<std::size_t>(question)];
        ++n;
    }
    if (sums.empty()) fail(ErrorCode::EmptySlice, "no annotations in the requested slice");

    std::vector<CountryRank> out;
    for (const auto& [country, sn] : sums)
        out.push_back({0, country, static_cast<double>(sn.first) / static_cast<double>(sn.second), sn.second, false});
    std::stable_sort(out.begin(), out.end(), [](const CountryRank& a, const CountryRank& b) {
        return a.mean != b.mean ? a.mean > b.mean : a.country < b.country;
    });
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].rank = static_cast<int>(i) + 1;
        out[i].tied = (i > 0 && out[i - 1].mean == out[i].mean) || (i + 1 < out.size() && out[i + 1].mean == out[i].mean);
    }
    return out;
}

std::optional<GroupKey> parse_group_key(std::string_view name) {
    if (name == "country") return GroupKey::Country;
    if (name == "category") return GroupKey::Category;
    if (name == "model") return GroupKey::Model;
    if (name == "question") return GroupKey::Question;
    return std::nullopt;
}

std::string_view to_string(GroupKey key) {
    switch (key) {
        case GroupKey::Country: return "country";
        case GroupKey::Category: return "category";
        case GroupKey::Model: return "model";
        case GroupKey::Question: return "question";
    }
    return "?";
}

std::optional<double> standard_error(std::span<const double> values) {
    const auto n = values.size();
    if (n < 2) return std::nullopt;
    double mean = 0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double var = ss / static_cast<double>(n - 1);
    return std::sqrt(var / static_cast<double>(n));
}

std::vector<AggregateRow> aggregate_report(std::span<const AnnotationView> annotations,
                                           std::span<const GroupKey> grouping, std::span<const int> questions) {
    if (questions.empty()) fail(ErrorCode::InvalidConfig, "no questions selected");
    for (int q : questions)
        if (q < 0 || q >= static_cast<int>(kQuestionKeys.size())) fail(ErrorCode::InvalidConfig, "question index out of range");
    const bool per_question = std::find(grouping.begin(), grouping.end(), GroupKey::Question) != grouping.end();

    struct Acc {
        long sum = 0;   // integer answer total
        long width = 1; // answers per observation
        std::vector<double> obs;
    };
    std::map<std::vector<std::string>, Acc> groups;
    auto key_of = [&](const AnnotationView& a, int q) {
        std::vector<std::string> key;
        for (auto g : grouping) {
            switch (g) {
                case GroupKey::Country: key.push_back(a.country); break;
                case GroupKey::Category: key.emplace_back(to_string(a.category)); break;
                case GroupKey::Model: key.push_back(a.model_id); break;
                case GroupKey::Question: key.emplace_back(kQuestionKeys[static_cast<std::size_t>(q)]); break;
            }
        }
        return key;
    };
    for (const auto& a : annotations) {
        if (per_question) {
            for (int q : questions) {
                auto& acc = groups[key_of(a, q)];
                const int v = a.answers[static_cast<std::size_t>(q)];
                acc.sum += v;
                acc.obs.push_back(v);
            }
        } else {
            auto& acc = groups[key_of(a, questions.front())];
            long s = 0;
            for (int q : questions) s += a.answers[static_cast<std::size_t>(q)];
            acc.sum += s;
            acc.width = static_cast<long>(questions.size());
            acc.obs.push_back(static_cast<double>(s) / static_cast<double>(questions.size()));
        }
    }

    std::vector<AggregateRow> out;
    for (const auto& [key, acc] : groups) {
        AggregateRow row;
        for (std::size_t i = 0; i < grouping.size(); ++i) row.group[std::string(to_string(grouping[i]))] = key[i];
        row.n = acc.obs.size();
        row.mean = static_cast<double>(acc.sum) / static_cast<double>(acc.width * static_cast<long>(row.n));
        row.sem = standard_error(acc.obs);
        out.push_back(std::move(row));
    }
    return out;
}

std::vector<QuestionCorrelation> question_correlations(std::span<const AnnotationView> annotations, int question_a,
                                                       int question_b) {
    for (int q : {question_a, question_b})
        if (q < 0 || q >= static_cast<int>(kQuestionKeys.size())) fail(ErrorCode::InvalidConfig, "question index out of range");
    struct Acc {
        long a = 0, b = 0, n = 0;
    };
    std::map<std::string, std::map<ArtifactId, Acc>> per_country;
    for (const auto& v : annotations) {
        auto& acc = per_country[v.country][v.artifact];
        acc.a += v.answers[static_cast<std::size_t>(question_a)];
        acc.b += v.answers[static_cast<std::size_t>(question_b)];
        ++acc.n;
    }
    std::vector<QuestionCorrelation> out;
    for (const auto& [country, arts] : per_country) {
        std::vector<double> xa, xb;
        for (const auto& [id, acc] : arts) {
            xa.push_back(static_cast<double>(acc.a) / static_cast<double>(acc.n));
            xb.push_back(static_cast<double>(acc.b) / static_cast<double>(acc.n));
        }
        QuestionCorrelation qc;
        qc.country = country;
        qc.n = xa.size();
        if (xa.size() >= 2) qc.pearson = pearson(xa, xb);
        out.push_back(std::move(qc));
    }
    return out;
}

namespace {

std::string num(std::optional<double> v) {
    if (!v) return "";
    std::ostringstream s;
    s << std::setprecision(17) << *v;
    return s.str();
}

}  // namespace

void write_rankings_csv(std::ostream& out, std::span<const CountryRank> ranks) {
    out << "rank,country,mean,n,tied\n";
    for (const auto& r : ranks)
        out << r.rank << ',' << r.country << ',' << num(r.mean) << ',' << r.n << ',' << (r.tied ? "true" : "false") << '\n';
}

void write_aggregate_csv(std::ostream& out, std::span<const AggregateRow> rows, std::span<const GroupKey> grouping) {
    for (auto g : grouping) out << to_string(g) << ',';
    out << "mean,sem,n\n";
    for (const auto& r : rows) {
        for (auto g : grouping) out << r.group.at(std::string(to_string(g))) << ',';
        out << num(r.mean) << ',' << num(r.sem) << ',' << r.n << '\n';
    }
}

void write_question_correlations_csv(std::ostream& out, std::span<const QuestionCorrelation> rows) {
    out << "country,pearson,n\n";
    for (const auto& r : rows) out << r.country << ',' << num(r.pearson) << ',' << r.n << '\n';
}

namespace {

constexpr int kWidth = 900, kHeight = 540, kLeft = 70, kRight = 20, kTop = 50, kBottom = 110;
const cv::Scalar kInk(40, 40, 40), kBar(180, 120, 60), kDot(60, 60, 200), kGrid(225, 225, 225);

void put(cv::Mat& img, const std::string& text, cv::Point at, double scale = 0.45) {
    cv::putText(img, text, at, cv::FONT_HERSHEY_SIMPLEX, scale, kInk, 1, cv::LINE_AA);
}

std::string fmt(double v) {
    std::ostringstream s;
    s << std::setprecision(3) << v;
    return s.str();
}

void save(const cv::Mat& img, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    if (!cv::imwrite(path.string(), img)) fail(ErrorCode::Io, "cannot write " + path.string());
}

/// Draws axes and horizontal grid lines; returns a value-to-pixel mapper for y.
auto draw_frame(cv::Mat& img, const std::string& title, double y_min, double y_max) {
    put(img, title, {kLeft, 30}, 0.6);
    const int plot_h = kHeight - kTop - kBottom;
    auto to_y = [=](double v) { return kTop + static_cast<int>(std::lround((y_max - v) / (y_max - y_min) * plot_h)); };
    for (int i = 0; i <= 4; ++i) {
        const double v = y_min + (y_max - y_min) * i / 4;
        cv::line(img, {kLeft, to_y(v)}, {kWidth - kRight, to_y(v)}, kGrid, 1);
        put(img, fmt(v), {8, to_y(v) + 4});
    }
    cv::line(img, {kLeft, kTop}, {kLeft, kHeight - kBottom}, kInk, 1);
    cv::line(img, {kLeft, kHeight - kBottom}, {kWidth - kRight, kHeight - kBottom}, kInk, 1);
    return to_y;
}

}  // namespace

void write_bar_chart(const std::filesystem::path& path, const std::string& title, std::span<const Bar> bars,
                     double y_min, double y_max) {
    if (!(y_max > y_min)) fail(ErrorCode::InvalidConfig, "bar chart needs y_max > y_min");
    cv::Mat img(kHeight, kWidth, CV_8UC3, cv::Scalar(255, 255, 255));
    const auto to_y = draw_frame(img, title, y_min, y_max);
    const int plot_w = kWidth - kLeft - kRight;
    const int slot = bars.empty() ? plot_w : plot_w / static_cast<int>(bars.size());
    for (std::size_t i = 0; i < bars.size(); ++i) {
        const auto& b = bars[i];
        const int x0 = kLeft + static_cast<int>(i) * slot + slot / 6;
        const int x1 = kLeft + static_cast<int>(i + 1) * slot - slot / 6;
        const double v = std::clamp(b.value, y_min, y_max);
        cv::rectangle(img, {x0, to_y(v)}, {x1, to_y(y_min)}, kBar, cv::FILLED);
        if (b.error) {
            const int xc = (x0 + x1) / 2;
            const int lo = to_y(std::clamp(b.value - *b.error, y_min, y_max));
            const int hi = to_y(std::clamp(b.value + *b.error, y_min, y_max));
            cv::line(img, {xc, lo}, {xc, hi}, kInk, 1);
            cv::line(img, {xc - 5, lo}, {xc + 5, lo}, kInk, 1);
            cv::line(img, {xc - 5, hi}, {xc + 5, hi}, kInk, 1);
        }
        put(img, b.label.substr(0, 14), {x0, kHeight - kBottom + 18 + static_cast<int>(i % 3) * 16}, 0.4);
    }
    save(img, path);
}

void write_scatter_plot(const std::filesystem::path& path, const std::string& title, std::span<const double> x,
                        std::span<const double> y, const std::string& annotation) {
    if (x.size() != y.size()) fail(ErrorCode::LengthMismatch, "scatter plot needs equal-length series");
    auto range = [](std::span<const double> v) {
        if (v.empty()) return std::pair{0.0, 1.0};
        auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        const double pad = *hi > *lo ? 0.05 * (*hi - *lo) : 0.5;
        return std::pair{*lo - pad, *hi + pad};
    };
    const auto [x_min, x_max] = range(x);
    const auto [y_min, y_max] = range(y);
    cv::Mat img(kHeight, kWidth, CV_8UC3, cv::Scalar(255, 255, 255));
    const auto to_y = draw_frame(img, title, y_min, y_max);
    const int plot_w = kWidth - kLeft - kRight;
    auto to_x = [&](double v) { return kLeft + static_cast<int>(std::lround((v - x_min) / (x_max - x_min) * plot_w)); };
    for (int i = 0; i <= 4; ++i) {
        const double v = x_min + (x_max - x_min) * i / 4;
        put(img, fmt(v), {to_x(v) - 10, kHeight - kBottom + 18});
    }
    for (std::size_t i = 0; i < x.size(); ++i) cv::circle(img, {to_x(x[i]), to_y(y[i])}, 3, kDot, cv::FILLED, cv::LINE_AA);
    put(img, annotation, {kWidth - kRight - 200, kTop + 20}, 0.6);
    save(img, path);
}

}  // namespace cultdiff
