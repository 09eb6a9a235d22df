// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "cultdiff/evalsuite.hpp"

#include <cmath>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <unordered_map>

#include "cultdiff/error.hpp"
#include "cultdiff/parallel.hpp"

namespace cultdiff {

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size()) fail(ErrorCode::DimensionMismatch, "embeddings differ in length");
    const double na = a.norm(), nb = b.norm();
    if (na == 0 || nb == 0) return 0.0;
    return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

double similarity_score(const Embedder& embedder, const Image& generated, std::span<const Image> references) {
    if (references.empty()) fail(ErrorCode::EmptyReferences, "no reference images");
    const auto g = embedder.embed(generated);
    double total = 0;
    for (const auto& r : references) total += cosine_similarity(g, embedder.embed(r));
    return total / static_cast<double>(references.size());
}

std::vector<PairScore> score_pairs(const Catalog& catalog, std::span<const ImagePair> pairs, const Embedder& embedder,
                                   const ScoreOptions& options) {
    embedder.encoder();
    auto fid_refs = [&](const ImagePair& p) {
        return options.fid_references ? options.fid_references(p) : std::vector<ImageId>{p.image_a};
    };

    std::set<ImageId> unique;
    for (const auto& p : pairs) {
        unique.insert(p.image_a);
        unique.insert(p.image_b);
        if (options.extractor)
            for (auto id : fid_refs(p)) unique.insert(id);
    }
    const std::vector<ImageId> ids(unique.begin(), unique.end());
    std::mutex load_mutex;
    auto load = [&](ImageId id) {
        std::lock_guard lock(load_mutex);
        return catalog.load(id);
    };

    std::vector<Eigen::VectorXd> emb(ids.size()), feat(ids.size());
    parallel_for(ids.size(), options.parallelism, [&](std::size_t i) {
        const Image img = load(ids[i]);
        emb[i] = embedder.embed(img);
        if (options.extractor) feat[i] = options.extractor->extract(img);
    });
    std::unordered_map<ImageId, std::size_t> index;
    for (std::size_t i = 0; i < ids.size(); ++i) index.emplace(ids[i], i);

    std::vector<PairScore> out(pairs.size());
    parallel_for(pairs.size(), options.parallelism, [&](std::size_t i) {
        const auto& p = pairs[i];
        PairScore s;
        s.pair_id = p.id;
        s.human = p.source_score;
        s.cultdiff_s = cosine_similarity(emb[index.at(p.image_b)], emb[index.at(p.image_a)]);
        const Image ref = load(p.image_a);
        const Image cand = load(p.image_b);
        s.lpips = lpips_distance(cand, ref);
        s.ssim = ssim(cand, ref);
        if (options.extractor) {
            std::vector<Eigen::VectorXd> rf;
            for (auto id : fid_refs(p)) rf.push_back(feat[index.at(id)]);
            s.fid = point_mass_fid(rf, feat[index.at(p.image_b)]);
        }
        out[i] = std::move(s);
    });
    return out;
}

namespace {

std::string cell(const std::optional<double>& v) {
    if (!v) return "";
    std::ostringstream s;
    s << std::setprecision(17) << *v;
    return s.str();
}

std::optional<double> parse_cell(const std::string& text, std::size_t line) {
    if (text.empty()) return std::nullopt;
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        fail(ErrorCode::SchemaViolation, "scores line " + std::to_string(line) + ": bad number '" + text + "'");
    }
}

}  // namespace

void write_scores_csv(std::ostream& out, std::span<const PairScore> scores) {
    out << "pair_id,cultdiff_s,fid,lpips,ssim,human\n";
    for (const auto& s : scores)
        out << s.pair_id << ',' << cell(s.cultdiff_s) << ',' << cell(s.fid) << ',' << cell(s.lpips) << ','
            << cell(s.ssim) << ',' << cell(s.human) << '\n';
}

std::vector<PairScore> read_scores_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) fail(ErrorCode::SchemaViolation, "empty scores file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "pair_id,cultdiff_s,fid,lpips,ssim,human") fail(ErrorCode::SchemaViolation, "unexpected scores header");
    std::vector<PairScore> out;
    for (std::size_t n = 2; std::getline(in, line); ++n) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
        if (line.back() == ',') cells.emplace_back();
        if (cells.size() != 6) fail(ErrorCode::SchemaViolation, "scores line " + std::to_string(n) + ": expected 6 cells");
        PairScore s;
        s.pair_id = cells[0];
        const auto cs = parse_cell(cells[1], n), lp = parse_cell(cells[3], n), ss_ = parse_cell(cells[4], n);
        if (!cs || !lp || !ss_) fail(ErrorCode::SchemaViolation, "scores line " + std::to_string(n) + ": missing metric");
        s.cultdiff_s = *cs;
        s.fid = parse_cell(cells[2], n);
        s.lpips = *lp;
        s.ssim = *ss_;
        s.human = parse_cell(cells[5], n);
        out.push_back(std::move(s));
    }
    return out;
}

namespace {

std::vector<CorrelationReport> correlate_all(std::span<const PairScore* const> scores) {
    std::vector<CorrelationReport> out;
    for (const char* metric : kMetricNames) {
        std::vector<double> m, h;
        for (const auto* s : scores) {
            if (!s->human) continue;
            const std::string name = metric;
            std::optional<double> v;
            if (name == "cultdiff_s") v = s->cultdiff_s;
            else if (name == "fid") v = s->fid;
            else if (name == "lpips") v = s->lpips;
            else v = s->ssim;
            if (!v) continue;
            m.push_back(*v);
            h.push_back(*s->human);
        }
        if (m.size() < 2) continue;
        out.push_back(correlate(metric, m, h));
    }
    return out;
}

}  // namespace

CorrelationTable correlation_table(std::span<const PairScore> scores,
                                   const std::function<std::string(const PairScore&)>& slice) {
    CorrelationTable t;
    std::vector<const PairScore*> all;
    std::map<std::string, std::vector<const PairScore*>> by_slice;
    for (const auto& s : scores) {
        all.push_back(&s);
        if (slice) by_slice[slice(s)].push_back(&s);
    }
    t.overall = correlate_all(all);
    for (const auto& [label, members] : by_slice) {
        auto reports = correlate_all(members);
        if (!reports.empty()) t.slices.emplace(label, std::move(reports));
    }
    return t;
}

nlohmann::json CorrelationTable::to_json() const {
    nlohmann::json j;
    j["overall"] = nlohmann::json::array();
    for (const auto& r : overall) j["overall"].push_back(r.to_json());
    j["slices"] = nlohmann::json::object();
    for (const auto& [label, reports] : slices) {
        auto& arr = j["slices"][label] = nlohmann::json::array();
        for (const auto& r : reports) arr.push_back(r.to_json());
    }
    return j;
}

void CorrelationTable::write_csv(std::ostream& out) const {
    out << "slice,metric,spearman,pearson,kendall_tau_b,kendall_tau_c,n\n";
    auto row = [&](const std::string& label, const CorrelationReport& r) {
        out << label << ',' << r.metric << ',' << cell(r.spearman) << ',' << cell(r.pearson) << ','
            << cell(r.kendall_tau_b) << ',' << cell(r.kendall_tau_c) << ',' << r.n << '\n';
    };
    for (const auto& r : overall) row("all", r);
    for (const auto& [label, reports] : slices)
        for (const auto& r : reports) row(label, r);
}

}  // namespace cultdiff
