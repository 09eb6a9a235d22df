// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "cultdiff/pairs.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "cultdiff/error.hpp"
#include "cultdiff/rng.hpp"

namespace cultdiff {

namespace {

std::string pair_id(PairOrigin origin, ImageId a, ImageId b) {
    return std::string(origin == PairOrigin::RealReal ? "rr:" : "rs:") + std::to_string(a.value) + ":" +
           std::to_string(b.value);
}

}  // namespace

nlohmann::json to_json(const ImagePair& p) {
    nlohmann::json j{{"id", p.id},
                     {"image_a", p.image_a.value},
                     {"image_b", p.image_b.value},
                     {"label", p.label},
                     {"weight", p.weight},
                     {"origin", to_string(p.origin)},
                     {"split", to_string(p.split)},
                     {"source_score", nullptr},
                     {"artifact_a", p.artifact_a.value},
                     {"artifact_b", p.artifact_b.value},
                     {"model_id", nullptr},
                     {"question_id", nullptr}};
    if (p.source_score) j["source_score"] = *p.source_score;
    if (p.model_id) j["model_id"] = *p.model_id;
    if (p.question_id) j["question_id"] = p.question_id->value;
    return j;
}

ImagePair pair_from_json(const nlohmann::json& j) {
    try {
        ImagePair p;
        p.id = j.at("id").get<std::string>();
        p.image_a = ImageId(j.at("image_a").get<std::int64_t>());
        p.image_b = ImageId(j.at("image_b").get<std::int64_t>());
        p.label = j.at("label").get<int>();
        p.weight = j.at("weight").get<double>();
        p.origin = parse_origin(j.at("origin").get<std::string>());
        p.split = parse_split(j.at("split").get<std::string>());
        if (j.contains("source_score") && !j["source_score"].is_null()) p.source_score = j["source_score"].get<double>();
        p.artifact_a = ArtifactId(j.at("artifact_a").get<std::int64_t>());
        p.artifact_b = ArtifactId(j.at("artifact_b").get<std::int64_t>());
        if (j.contains("model_id") && !j["model_id"].is_null()) p.model_id = j["model_id"].get<std::string>();
        if (j.contains("question_id") && !j["question_id"].is_null())
            p.question_id = QuestionId(j["question_id"].get<std::int64_t>());
        return p;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::SchemaViolation, std::string("malformed pair: ") + e.what());
    }
}

void write_pairs_jsonl(std::ostream& out, std::span<const ImagePair> pairs) {
    for (const auto& p : pairs) out << to_json(p).dump() << '\n';
}

std::vector<ImagePair> read_pairs_jsonl(std::istream& in) {
    std::vector<ImagePair> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(pair_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::parse_error& e) {
            fail(ErrorCode::SchemaViolation, "pairs line " + std::to_string(out.size() + 1) + ": " + e.what());
        }
    }
    return out;
}

double normalize_score(double mean_likert) {
    if (!(mean_likert >= 1.0 && mean_likert <= 5.0))
        fail(ErrorCode::OutOfRange, "mean Likert score " + std::to_string(mean_likert) + " is outside [1, 5]");
    return (mean_likert - 1.0) / 4.0;
}

double human_pair_score(std::span<const std::array<int, 4>> q1_answers) {
    if (q1_answers.empty()) fail(ErrorCode::NoAnnotations, "no annotations for this image");
    // Every annotator answers all four, so the mean of means is total / (4n), divided once.
    std::int64_t total = 0;
    for (const auto& a : q1_answers)
        for (int v : a) total += v;
    return static_cast<double>(total) / static_cast<double>(4 * q1_answers.size());
}

double human_pair_score(std::span<const AnnotationRecord> annotations) {
    std::vector<std::array<int, 4>> q1;
    q1.reserve(annotations.size());
    for (const auto& a : annotations) q1.push_back(a.q1);
    return human_pair_score(q1);
}

// ---- real-real ------------------------------------------------------------------------

std::vector<ImagePair> build_real_pairs(const Catalog& catalog, const RealPairOptions& options) {
    if (options.negatives_per_positive < 0) fail(ErrorCode::InvalidConfig, "negative ratio must be non-negative");
    if (options.same_country_fraction < 0 || options.same_country_fraction > 1)
        fail(ErrorCode::InvalidConfig, "same-country fraction must lie in [0, 1]");
    Rng rng(options.seed);

    struct Entry {
        Artifact artifact;
        std::vector<ImageId> images;
    };
    std::vector<Entry> entries;
    for (const auto& a : catalog.artifacts()) {
        if (options.allowed_artifacts && !options.allowed_artifacts->count(a.id)) continue;
        Entry e{a, {}};
        for (const auto& r : catalog.images_of(a.id, ImageSource::Real)) e.images.push_back(r.id);
        if (!e.images.empty()) entries.push_back(std::move(e));
    }

    std::vector<ImagePair> out;
    auto make = [](const Entry& x, ImageId a, const Entry& y, ImageId b, int label) {
        ImagePair p;
        p.id = pair_id(PairOrigin::RealReal, a, b);
        p.image_a = a;
        p.image_b = b;
        p.label = label;
        p.weight = 1.0;
        p.origin = PairOrigin::RealReal;
        p.artifact_a = x.artifact.id;
        p.artifact_b = y.artifact.id;
        return p;
    };

    for (const auto& e : entries) {
        std::vector<std::pair<ImageId, ImageId>> combos;
        for (std::size_t i = 0; i < e.images.size(); ++i)
            for (std::size_t j = i + 1; j < e.images.size(); ++j) combos.emplace_back(e.images[i], e.images[j]);
        if (options.max_positives_per_artifact > 0 &&
            combos.size() > static_cast<std::size_t>(options.max_positives_per_artifact)) {
            rng.shuffle(std::span(combos));
            combos.resize(static_cast<std::size_t>(options.max_positives_per_artifact));
            std::sort(combos.begin(), combos.end());
        }
        for (const auto& [a, b] : combos) out.push_back(make(e, a, e, b, 1));
    }
    const std::size_t positives = out.size();
    if (positives == 0 || entries.size() < 2) return out;

    const auto wanted = static_cast<std::size_t>(std::llround(options.negatives_per_positive * positives));
    const auto wanted_same = static_cast<std::size_t>(std::llround(options.same_country_fraction * wanted));

    std::map<std::string, std::vector<std::size_t>> by_country;
    for (std::size_t i = 0; i < entries.size(); ++i) by_country[entries[i].artifact.country].push_back(i);
    std::vector<std::size_t> same_anchor;  // artifacts with a same-country partner available
    for (std::size_t i = 0; i < entries.size(); ++i)
        if (by_country[entries[i].artifact.country].size() > 1) same_anchor.push_back(i);
    const bool cross_possible = by_country.size() > 1;

    std::set<std::pair<ImageId, ImageId>> seen;
    auto try_add = [&](std::size_t ia, std::size_t ib) {
        const auto& ea = entries[ia];
        const auto& eb = entries[ib];
        ImageId a = ea.images[rng.index(ea.images.size())];
        ImageId b = eb.images[rng.index(eb.images.size())];
        const auto key = std::minmax(a, b);
        if (!seen.insert({key.first, key.second}).second) return false;
        out.push_back(make(ea, a, eb, b, 0));
        return true;
    };

    // Rejection on duplicates is bounded; a tiny catalog may yield fewer negatives than asked.
    auto draw = [&](std::size_t count, bool same) {
        std::size_t made = 0, attempts = 0;
        while (made < count && attempts < 50 * count + 100) {
            ++attempts;
            if (same) {
                if (same_anchor.empty()) return made;
                const auto ia = same_anchor[rng.index(same_anchor.size())];
                const auto& peers = by_country[entries[ia].artifact.country];
                auto ib = peers[rng.index(peers.size())];
                if (ib == ia) continue;
                made += try_add(ia, ib);
            } else {
                if (!cross_possible) return made;
                const auto ia = rng.index(entries.size());
                const auto ib = rng.index(entries.size());
                if (entries[ia].artifact.country == entries[ib].artifact.country) continue;
                made += try_add(ia, ib);
            }
        }
        return made;
    };
    const auto same_made = draw(wanted_same, true);
    draw(wanted - same_made, false);
    return out;
}

// ---- real-synthetic -------------------------------------------------------------------

std::vector<ImagePair> synthetic_pairs_for(const AnnotatedImage& image, NegativeWeighting weighting) {
    const double score = human_pair_score(image.q1_answers);
    const int label = score >= 3.0 ? 1 : 0;
    double weight = normalize_score(score);
    if (weighting == NegativeWeighting::Inverted && label == 0) weight = 1.0 - weight;
    std::vector<ImagePair> out;
    for (const auto& ref : image.references) {
        ImagePair p;
        p.id = pair_id(PairOrigin::RealSynthetic, image.generated, ref);
        p.image_a = ref;
        p.image_b = image.generated;
        p.label = label;
        p.weight = weight;
        p.origin = PairOrigin::RealSynthetic;
        p.source_score = score;
        p.artifact_a = image.artifact;
        p.artifact_b = image.artifact;
        p.model_id = image.model_id;
        p.question_id = image.question;
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<AnnotatedImage> collect_annotated_images(const SurveyStore& store) {
    std::map<ImageId, AnnotatedImage> by_image;
    std::map<QuestionId, ImageId> question_image;
    for (const auto& survey : store.surveys())
        for (const auto& q : survey.questions) {
            question_image[q.id] = q.generated_image_id;
            auto [it, fresh] = by_image.try_emplace(q.generated_image_id);
            if (fresh || q.id < it->second.question) {
                it->second.generated = q.generated_image_id;
                it->second.artifact = q.artifact_id;
                it->second.model_id = q.model_id;
                it->second.question = q.id;
                it->second.references = q.reference_image_ids;
            }
        }
    for (const auto& a : store.annotations()) {
        const auto it = question_image.find(a.question_id);
        if (it != question_image.end()) by_image[it->second].q1_answers.push_back(a.q1);
    }
    std::vector<AnnotatedImage> out;
    for (auto& [id, img] : by_image) {
        for (const auto& ref : img.references)
            if (!store.catalog().image(ref))
                fail(ErrorCode::MissingReferences, "reference image " + std::to_string(ref.value) + " of question " +
                                                       std::to_string(img.question.value) + " is not in the catalog");
        out.push_back(std::move(img));
    }
    return out;
}

SyntheticPairResult build_synthetic_pairs(const SurveyStore& store, NegativeWeighting weighting) {
    SyntheticPairResult result;
    for (const auto& img : collect_annotated_images(store)) {
        if (img.q1_answers.empty()) {
            result.unannotated.push_back(img.generated);
            continue;
        }
        auto pairs = synthetic_pairs_for(img, weighting);
        result.pairs.insert(result.pairs.end(), pairs.begin(), pairs.end());
    }
    return result;
}

// ---- splits ---------------------------------------------------------------------------

std::optional<Split> SplitPlan::of(ArtifactId artifact) const {
    const auto it = assignment.find(artifact);
    if (it == assignment.end()) return std::nullopt;
    return it->second;
}

std::set<ArtifactId> SplitPlan::artifacts_in(Split split) const {
    std::set<ArtifactId> out;
    for (const auto& [a, s] : assignment)
        if (s == split) out.insert(a);
    return out;
}

nlohmann::json SplitPlan::to_json() const {
    nlohmann::json j{{"seed", seed},
                     {"counts", {{"train", counts.train}, {"val", counts.val}, {"test", counts.test}}},
                     {"train", nlohmann::json::array()},
                     {"val", nlohmann::json::array()},
                     {"test", nlohmann::json::array()}};
    for (const auto& [a, s] : assignment) j[std::string(to_string(s))].push_back(a.value);
    return j;
}

SplitPlan SplitPlan::from_json(const nlohmann::json& j) {
    SplitPlan plan;
    try {
        plan.seed = j.value("seed", std::uint64_t{0});
        if (j.contains("counts")) {
            const auto& c = j["counts"];
            plan.counts = {c.value("train", 30), c.value("val", 10), c.value("test", 10)};
        }
        for (Split s : {Split::Train, Split::Val, Split::Test}) {
            const std::string key(to_string(s));
            if (!j.contains(key)) continue;
            for (const auto& v : j[key]) {
                const ArtifactId a(v.get<std::int64_t>());
                const auto [it, fresh] = plan.assignment.emplace(a, s);
                if (!fresh && it->second != s)
                    fail(ErrorCode::SplitOverlap, "prompt of artifact " + std::to_string(a.value) + " is in both " +
                                                      std::string(to_string(it->second)) + " and " + key);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::InvalidConfig, std::string("malformed split plan: ") + e.what());
    }
    return plan;
}

SplitPlan make_split_plan(const Catalog& catalog, SplitCounts counts, std::uint64_t seed,
                          const std::vector<std::string>& countries) {
    if (counts.train < 0 || counts.val < 0 || counts.test < 0)
        fail(ErrorCode::InvalidConfig, "split counts must be non-negative");
    SplitPlan plan;
    plan.seed = seed;
    plan.counts = counts;
    std::map<std::pair<std::string, Category>, std::vector<ArtifactId>> cells;
    for (const auto& a : catalog.artifacts()) cells[{a.country, a.category}].push_back(a.id);
    Rng rng(seed);
    for (auto& [cell, ids] : cells) {
        if (!countries.empty() && std::find(countries.begin(), countries.end(), cell.first) == countries.end())
            continue;
        if (static_cast<int>(ids.size()) < counts.total())
            fail(ErrorCode::InvalidConfig, cell.first + "/" + std::string(to_string(cell.second)) + " has " +
                                               std::to_string(ids.size()) + " prompts, the split needs " +
                                               std::to_string(counts.total()));
        std::sort(ids.begin(), ids.end());
        auto cell_rng = rng.fork(std::hash<std::string>{}(cell.first) * 3 + static_cast<std::uint64_t>(cell.second));
        cell_rng.shuffle(std::span(ids));
        std::size_t i = 0;
        for (int k = 0; k < counts.train; ++k) plan.assignment[ids[i++]] = Split::Train;
        for (int k = 0; k < counts.val; ++k) plan.assignment[ids[i++]] = Split::Val;
        for (int k = 0; k < counts.test; ++k) plan.assignment[ids[i++]] = Split::Test;
    }
    return plan;
}

SplitResult split_dataset(std::span<const ImagePair> pairs, const SplitPlan& plan) {
    SplitResult result;
    std::map<ImageId, Split> image_split;
    auto claim = [&](ImageId img, Split s) {
        const auto [it, fresh] = image_split.emplace(img, s);
        if (!fresh && it->second != s)
            fail(ErrorCode::SplitOverlap, "image " + std::to_string(img.value) + " would appear in both " +
                                              std::string(to_string(it->second)) + " and " +
                                              std::string(to_string(s)));
    };
    auto split_of = [&](ArtifactId a) {
        const auto s = plan.of(a);
        if (!s) fail(ErrorCode::UnplannedPrompt, "artifact " + std::to_string(a.value) + " has no prompt in the split plan");
        return *s;
    };
    for (const auto& p : pairs) {
        const Split sa = split_of(p.artifact_a);
        const Split sb = split_of(p.artifact_b);
        Split target;
        if (p.origin == PairOrigin::RealReal) {
            if (sa != Split::Train || sb != Split::Train) {
                ++result.dropped_real_pairs;
                continue;
            }
            target = Split::Train;
        } else {
            if (sa != sb) fail(ErrorCode::SplitOverlap, "pair " + p.id + " spans two prompts in different splits");
            target = sa;
        }
        claim(p.image_a, target);
        claim(p.image_b, target);
        ImagePair q = p;
        q.split = target;
        result[target].push_back(std::move(q));
    }
    return result;
}

}  // namespace cultdiff
