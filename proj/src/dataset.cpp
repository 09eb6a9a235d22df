// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "cultdiff/dataset.hpp"

#include "cultdiff/error.hpp"

namespace cultdiff {

Dataset build_dataset(const Catalog& catalog, const SurveyStore& store, const DatasetOptions& options) {
    Dataset d;
    d.plan = make_split_plan(catalog, options.counts, options.split_seed, options.countries);
    auto synthetic = build_synthetic_pairs(store, options.weighting);
    d.unannotated = std::move(synthetic.unannotated);

    auto real_options = options.real;
    real_options.allowed_artifacts = d.plan.artifacts_in(Split::Train);
    auto real = build_real_pairs(catalog, real_options);

    d.synthetic_pairs = synthetic.pairs.size();
    d.real_pairs = real.size();
    std::vector<ImagePair> all = std::move(real);
    all.insert(all.end(), std::make_move_iterator(synthetic.pairs.begin()), std::make_move_iterator(synthetic.pairs.end()));
    d.splits = split_dataset(all, d.plan);
    return d;
}

std::function<std::vector<ImageId>(const ImagePair&)> question_references(const SurveyStore& store) {
    return [&store](const ImagePair& p) {
        if (!p.question_id) return std::vector<ImageId>{p.image_a};
        const auto q = store.question(*p.question_id);
        if (!q) fail(ErrorCode::UnknownQuestion, "pair " + p.id + " names an unknown question");
        return std::vector<ImageId>(q->reference_image_ids.begin(), q->reference_image_ids.end());
    };
}

}  // namespace cultdiff
