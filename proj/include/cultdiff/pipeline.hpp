// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cultdiff/error.hpp"
#include "cultdiff/genpipe.hpp"
#include "cultdiff/pairs.hpp"
#include "cultdiff/simtrain.hpp"
#include "cultdiff/survey.hpp"

namespace cultdiff {

enum class Stage { Prompts, Collect, Generate, Survey, Pairs, Train, Eval };

inline constexpr std::array<Stage, 7> kAllStages = {Stage::Prompts, Stage::Collect, Stage::Generate, Stage::Survey,
                                                    Stage::Pairs,   Stage::Train,   Stage::Eval};

std::string_view to_string(Stage s) noexcept;
/// "all" or a comma-separated list. Throws Error(InvalidConfig).
std::vector<Stage> parse_stages(std::string_view text);
/// Stages whose outputs a stage reads.
std::vector<Stage> stage_dependencies(Stage s);

/// An external client: "stub" (offline, deterministic) or "http".
struct ClientConfig {
    std::string kind = "stub";
    std::string url;
    std::string token;
    /// <PREFIX>_URL and <PREFIX>_TOKEN override url and token.
    std::string env_prefix;

    nlohmann::json to_json() const;  // never includes the token
};

struct PipelineSeeds {
    std::uint64_t survey = 42;  // country k uses survey + k
    std::uint64_t split = 13;
    std::uint64_t real_pairs = 7;
    std::int64_t generation = 0;  // seed base
    nlohmann::json to_json() const;
};

struct PipelineConfig {
    std::filesystem::path workdir = "cultdiff-run";
    std::vector<std::string> countries;  // empty: the default ten
    std::vector<Category> categories{std::begin(kAllCategories), std::end(kAllCategories)};
    int artifacts_per_cell = 50;
    int references_per_artifact = 5;
    std::vector<std::string> models = default_models();
    SplitCounts split;
    PipelineSeeds seeds;

    /// catalog.json imported into an empty catalog by the prompts stage.
    std::optional<std::filesystem::path> artifacts;
    std::optional<std::filesystem::path> demonyms;
    /// Annotation CSV ingested by the survey stage.
    std::optional<std::filesystem::path> annotations;
    bool register_annotators = true;
    SurveyLayout survey_layout = SurveyLayout::AllModels;

    ClientConfig search{"stub", "", "", "CULTDIFF_SEARCH"};
    ClientConfig generation{"stub", "", "", "CULTDIFF_GENERATION"};
    int generation_width = 1024;
    int generation_height = 1024;
    int parallelism = 4;

    double neg_ratio = 1.0;
    int max_positives_per_artifact = 2;
    double same_country_fraction = 0.5;

    EncoderSpec encoder;
    TrainConfig train;

    Split eval_split = Split::Test;
    bool eval_fid = true;

    /// Throws Error(InvalidConfig).
    void validate() const;
    /// Relative paths in `j` resolve against base_dir.
    static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
    static PipelineConfig load(const std::filesystem::path& path);
    nlohmann::json to_json() const;
    /// Reads client endpoints and tokens from the environment.
    void apply_env();
    std::vector<std::string> effective_countries() const;
};

/// 0 success, 2 validation failure, 3 external-client failure.
int exit_code_for(ErrorCode code) noexcept;

struct RunOptions {
    /// Rerun stages even when their inputs are unchanged.
    bool force = false;
    /// Test hooks replacing the configured clients.
    SearchClient* search_client = nullptr;
    GenerationClient* generation_client = nullptr;
    std::ostream* log = nullptr;
};

struct StageOutcome {
    Stage stage;
    bool skipped = false;
    nlohmann::json manifest;
};

struct PipelineResult {
    int exit_code = 0;
    std::optional<Stage> failed_stage;
    std::string message;
    std::vector<StageOutcome> stages;

    bool ok() const { return exit_code == 0; }
};

/// Runs stages in pipeline order. Every stage writes manifests/<stage>.json with its input
/// fingerprint; a stage whose fingerprint and outputs are unchanged is skipped. A failing
/// stage keeps its partial outputs and leaves manifests/<stage>.incomplete behind.
/// One run per workdir at a time (workdir/.lock).
PipelineResult run_pipeline(const PipelineConfig& config, const std::vector<Stage>& stages,
                            const RunOptions& options = {});

/// Paths inside a workdir.
struct WorkdirLayout {
    std::filesystem::path root;
    std::filesystem::path manifest(Stage s) const { return root / "manifests" / (std::string(to_string(s)) + ".json"); }
    std::filesystem::path incomplete(Stage s) const {
        return root / "manifests" / (std::string(to_string(s)) + ".incomplete");
    }
    std::filesystem::path pairs_dir() const { return root / "pairs"; }
    std::filesystem::path checkpoint_dir() const { return root / "checkpoint"; }
    std::filesystem::path eval_dir() const { return root / "eval"; }
    std::filesystem::path lock() const { return root / ".lock"; }
};

/// Exclusive per-workdir lock; a lock left by a dead process is taken over.
class WorkdirLock {
public:
    /// Throws Error(Io) while another live process holds the lock.
    explicit WorkdirLock(const std::filesystem::path& root);
    ~WorkdirLock();
    WorkdirLock(const WorkdirLock&) = delete;
    WorkdirLock& operator=(const WorkdirLock&) = delete;

private:
    std::filesystem::path m_path;
};

/// Catalog configuration covering the config's countries.
CatalogConfig catalog_config_for(const PipelineConfig& config);

/// Fixture workdir: catalog, surveys, oracle annotations.csv, truth.json and a pipeline.json
/// configured for the scaled encoder. Returns the config written.
PipelineConfig write_fixture_workdir(const std::filesystem::path& dir, std::uint64_t seed = 2026);

}  // namespace cultdiff
