// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cultdiff/catalog.hpp"
#include "cultdiff/survey.hpp"

namespace cultdiff {

/// Procedural pseudo-cultures for end-to-end tests. Each culture owns a colour palette, a
/// background and a shape; categories differ in layout. Generated images blend an artifact's
/// own culture with another one according to a hidden fidelity in [0, 1].
struct FixtureOptions {
    std::vector<std::string> countries{"AZ", "CN", "ET", "ID"};
    int artifacts_per_category = 4;
    int references_per_artifact = 5;
    std::vector<std::string> models = default_models();  // one variant per model
    int image_size = 32;
    int annotators = 3;
    double likert_noise = 0.5;
    std::uint64_t seed = 2026;
};

/// Catalog configuration restricted to the fixture countries.
CatalogConfig fixture_catalog_config(const FixtureOptions& options);

struct FixtureTruth {
    /// Hidden fidelity of every generated image.
    std::map<ImageId, double> fidelity;
};

/// Registers artifacts, reference renders and one variant per model. Deterministic in the seed.
FixtureTruth build_fixture_catalog(Catalog& catalog, const FixtureOptions& options);

/// One AllModels survey per country with the oracle annotators registered.
std::vector<Survey> build_fixture_surveys(SurveyStore& store, const FixtureOptions& options);

/// Oracle annotator: every Likert answer is clamp(round(1 + 4 q + N(0, noise)), 1, 5), where q
/// is the candidate's fidelity (realism is centred at 3 and independent of q).
std::vector<AnnotationRow> oracle_annotations(std::span<const Survey> surveys, const FixtureTruth& truth,
                                              const FixtureOptions& options);

}  // namespace cultdiff
