// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cultdiff/dataset.hpp"
#include "cultdiff/evalsuite.hpp"
#include "cultdiff/pipeline.hpp"
#include "cultdiff/report.hpp"
#include "cultdiff/survey_server.hpp"

using namespace cultdiff;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
    std::string config;
    std::string workdir;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config", c.config, "Pipeline configuration (JSON)");
    app->add_option("--workdir", c.workdir, "Working directory holding catalog.db (overrides the config)");
}

PipelineConfig load_config(const Common& c) {
    PipelineConfig cfg = c.config.empty() ? PipelineConfig{} : PipelineConfig::load(c.config);
    if (!c.workdir.empty()) cfg.workdir = c.workdir;
    cfg.apply_env();
    return cfg;
}

int run_stages(const PipelineConfig& cfg, const std::vector<Stage>& stages, bool force) {
    RunOptions ro;
    ro.force = force;
    const auto r = run_pipeline(cfg, stages, ro);
    json summary = json::array();
    for (const auto& s : r.stages)
        summary.push_back({{"stage", std::string(to_string(s.stage))},
                           {"skipped", s.skipped},
                           {"outputs", s.manifest.value("outputs", json::object())}});
    json out{{"exit_code", r.exit_code}, {"stages", summary}};
    if (!r.ok()) {
        out["error"] = r.message;
        if (r.failed_stage) out["failed_stage"] = std::string(to_string(*r.failed_stage));
    }
    std::cout << out.dump(2) << "\n";
    return r.exit_code;
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');)
        if (!item.empty()) out.push_back(item);
    return out;
}

json read_json_file(const fs::path& p) {
    std::ifstream in(p);
    if (!in) fail(ErrorCode::Io, "cannot read " + p.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorCode::SchemaViolation, p.string() + ": " + e.what());
    }
}

void write_file(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) fail(ErrorCode::Io, "cannot write " + p.string());
    out << text;
}

struct Opened {
    Catalog catalog;
    std::unique_ptr<SurveyStore> store;
};

Opened open_workdir(const PipelineConfig& cfg) {
    if (!fs::exists(cfg.workdir / "catalog.db"))
        fail(ErrorCode::StageDependency, "no catalog in " + cfg.workdir.string());
    Opened o{Catalog::open(cfg.workdir, catalog_config_for(cfg)), nullptr};
    o.store = std::make_unique<SurveyStore>(o.catalog);
    return o;
}

std::optional<ArtifactId> artifact_of_pair(const Catalog& catalog, const std::string& pair_id) {
    // "rs:<generated>:<reference>" or "rr:<a>:<b>"
    const auto a = pair_id.find(':');
    if (a == std::string::npos) return std::nullopt;
    const auto b = pair_id.find(':', a + 1);
    try {
        const ImageId id(std::stoll(pair_id.substr(a + 1, b - a - 1)));
        if (auto rec = catalog.image(id)) return rec->artifact_id;
    } catch (const std::exception&) {
    }
    return std::nullopt;
}

volatile std::sig_atomic_t g_stop = 0;
SurveyServer* g_server = nullptr;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cultdiff: culture-aware image similarity toolkit"};
    app.require_subcommand(1);
    Common common;

    // run
    auto* run = app.add_subcommand("run", "Run pipeline stages");
    add_common(run, common);
    std::string stages_arg = "all";
    bool force = false;
    run->add_option("--stages", stages_arg, "all or a comma-separated stage list");
    run->add_flag("--force", force, "Rerun stages whose inputs are unchanged");

    // prompts / collect / generate
    auto* prompts = app.add_subcommand("prompts", "Prompt rendering");
    prompts->require_subcommand(1);
    auto* prompts_render = prompts->add_subcommand("render", "Render prompts for every artifact");
    add_common(prompts_render, common);
    std::string demonyms;
    prompts_render->add_option("--demonyms", demonyms, "Demonym table (JSON)");

    auto* collect = app.add_subcommand("collect", "Fetch reference images");
    add_common(collect, common);
    int k = 5;
    collect->add_option("--k", k, "References per artifact");

    auto* generate = app.add_subcommand("generate", "Generate images for every (artifact, model)");
    add_common(generate, common);
    std::string models;
    std::int64_t seed_base = 0;
    bool seed_base_set = false;
    generate->add_option("--models", models, "Comma-separated model ids");
    generate->add_option_function<std::int64_t>(
        "--seed-base", [&](std::int64_t v) { seed_base = v, seed_base_set = true; }, "Seed base");

    // catalog
    auto* catalog_cmd = app.add_subcommand("catalog", "Catalog operations");
    catalog_cmd->require_subcommand(1);
    auto* cat_validate = catalog_cmd->add_subcommand("validate", "Report shape violations");
    add_common(cat_validate, common);
    std::string targets_file;
    cat_validate->add_option("--targets", targets_file, "Validation targets (JSON)");
    auto* cat_import = catalog_cmd->add_subcommand("import", "Import a catalog.json manifest");
    add_common(cat_import, common);
    std::string import_file;
    cat_import->add_option("manifest", import_file)->required();
    auto* cat_export = catalog_cmd->add_subcommand("export", "Write catalog.json");
    add_common(cat_export, common);
    std::string export_file;
    cat_export->add_option("--out", export_file);

    // survey
    auto* survey = app.add_subcommand("survey", "Survey construction and serving");
    survey->require_subcommand(1);
    auto* survey_build = survey->add_subcommand("build", "Build a survey for one country");
    add_common(survey_build, common);
    std::string country, layout = "random_model";
    std::uint64_t survey_seed = 42;
    int per_category = 50;
    std::vector<std::string> annotators;
    survey_build->add_option("--country", country)->required();
    survey_build->add_option("--seed", survey_seed);
    survey_build->add_option("--layout", layout)->check(CLI::IsMember({"random_model", "all_models"}));
    survey_build->add_option("--artifacts-per-category", per_category);
    survey_build->add_option("--annotator", annotators, "Register annotator ids");
    auto* survey_serve = survey->add_subcommand("serve", "Serve the survey HTTP API");
    add_common(survey_serve, common);
    int port = 8080;
    std::string host = "127.0.0.1";
    survey_serve->add_option("--port", port);
    survey_serve->add_option("--host", host);

    auto* annotations = app.add_subcommand("annotations", "Annotation ingestion");
    annotations->require_subcommand(1);
    auto* ann_import = annotations->add_subcommand("import", "Import an annotation CSV");
    add_common(ann_import, common);
    std::string ann_file;
    bool register_unknown = false;
    ann_import->add_option("file", ann_file)->required();
    ann_import->add_flag("--register-annotators", register_unknown, "Register unknown annotator ids");

    auto* agreement = app.add_subcommand("agreement", "Fleiss' kappa per country");
    add_common(agreement, common);
    bool per_country = false;
    std::string agreement_country;
    agreement->add_flag("--per-country", per_country, "Every configured country");
    agreement->add_option("--country", agreement_country);

    // pairs
    auto* pairs = app.add_subcommand("pairs", "Training pairs");
    pairs->require_subcommand(1);
    auto* pairs_build = pairs->add_subcommand("build", "Build pairs and splits into <workdir>/pairs");
    add_common(pairs_build, common);
    std::optional<std::uint64_t> pair_seed, split_seed;
    std::optional<double> neg_ratio;
    pairs_build->add_option("--seed", pair_seed, "Real-pair sampling seed");
    pairs_build->add_option("--split-seed", split_seed);
    pairs_build->add_option("--neg-ratio", neg_ratio, "Negatives per positive for real pairs");
    auto* pairs_split = pairs->add_subcommand("split", "Apply a split plan to a pairs manifest");
    add_common(pairs_split, common);
    std::string plan_file, pairs_in, pairs_out;
    pairs_split->add_option("--plan", plan_file)->required();
    pairs_split->add_option("--pairs", pairs_in, "Pairs JSONL (default: every <workdir>/pairs/*.jsonl)");
    pairs_split->add_option("--out-dir", pairs_out);

    auto* train_cmd = app.add_subcommand("train", "Train the encoder on <workdir>/pairs");
    add_common(train_cmd, common);
    train_cmd->add_flag("--force", force);

    // evaluation
    auto* score = app.add_subcommand("score", "Score pairs of a split with every metric");
    add_common(score, common);
    std::string checkpoint, split_name = "test", scores_out;
    bool no_fid = false;
    score->add_option("--checkpoint", checkpoint)->required();
    score->add_option("--split", split_name)->check(CLI::IsMember({"train", "val", "test"}));
    score->add_option("--out", scores_out);
    score->add_flag("--no-fid", no_fid);

    auto* eval = app.add_subcommand("eval", "Evaluation");
    eval->require_subcommand(1);
    auto* correlate = eval->add_subcommand("correlate", "Correlate metric scores with human scores");
    add_common(correlate, common);
    std::string scores_in, slice_by = "country", corr_out;
    correlate->add_option("--scores", scores_in);
    correlate->add_option("--by", slice_by)->check(CLI::IsMember({"country", "category", "model", "none"}));
    correlate->add_option("--out", corr_out);

    auto* report = app.add_subcommand("report", "Human-score reports");
    report->require_subcommand(1);
    auto* rankings = report->add_subcommand("rankings", "Rank countries by one question");
    add_common(rankings, common);
    std::string question = "q1_1", model_filter, category_filter, report_out, plot_out;
    rankings->add_option("--question", question);
    rankings->add_option("--model", model_filter);
    rankings->add_option("--category", category_filter);
    rankings->add_option("--out", report_out);
    rankings->add_option("--plot", plot_out);
    auto* aggregate = report->add_subcommand("aggregate", "Means and standard errors per group");
    add_common(aggregate, common);
    std::string questions = "six", group_by = "country";
    aggregate->add_option("--questions", questions, "six, all, q1 or one question key");
    aggregate->add_option("--by", group_by, "Comma-separated: country, category, model, question");
    aggregate->add_option("--out", report_out);
    aggregate->add_option("--plot", plot_out);

    auto* fixture = app.add_subcommand("fixture", "Write the synthetic-culture fixture workdir");
    std::string fixture_dir;
    std::uint64_t fixture_seed = 2026;
    fixture->add_option("--out", fixture_dir)->required();
    fixture->add_option("--seed", fixture_seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*run) return run_stages(load_config(common), parse_stages(stages_arg), force);
        if (*prompts_render) {
            auto cfg = load_config(common);
            if (!demonyms.empty()) cfg.demonyms = demonyms;
            return run_stages(cfg, {Stage::Prompts}, false);
        }
        if (*collect) {
            auto cfg = load_config(common);
            cfg.references_per_artifact = k;
            return run_stages(cfg, {Stage::Collect}, false);
        }
        if (*generate) {
            auto cfg = load_config(common);
            if (!models.empty()) cfg.models = split_csv(models);
            if (seed_base_set) cfg.seeds.generation = seed_base;
            return run_stages(cfg, {Stage::Generate}, false);
        }
        if (*pairs_build) {
            auto cfg = load_config(common);
            if (pair_seed) cfg.seeds.real_pairs = *pair_seed;
            if (split_seed) cfg.seeds.split = *split_seed;
            if (neg_ratio) cfg.neg_ratio = *neg_ratio;
            return run_stages(cfg, {Stage::Pairs}, false);
        }
        if (*train_cmd) return run_stages(load_config(common), {Stage::Train}, force);

        if (*fixture) {
            const auto cfg = write_fixture_workdir(fixture_dir, fixture_seed);
            std::cout << json{{"workdir", cfg.workdir.string()}, {"config", (cfg.workdir / "pipeline.json").string()}}.dump(2)
                      << "\n";
            return 0;
        }

        const auto cfg = load_config(common);
        if (*cat_import) {
            fs::create_directories(cfg.workdir);
            Catalog catalog = Catalog::open(cfg.workdir, catalog_config_for(cfg));
            catalog.import_manifest(read_json_file(import_file), fs::path(import_file).parent_path());
            std::cout << json{{"artifacts", catalog.artifacts().size()}, {"images", catalog.images().size()}}.dump(2)
                      << "\n";
            return 0;
        }
        auto opened = open_workdir(cfg);
        Catalog& catalog = opened.catalog;
        SurveyStore& store = *opened.store;

        if (*cat_validate) {
            ValidationTargets targets;
            if (!targets_file.empty()) targets = ValidationTargets::from_json(read_json_file(targets_file));
            const auto rep = catalog.validate(targets);
            std::cout << rep.to_json().dump(2) << "\n";
            return rep.ok() ? 0 : 2;
        }
        if (*cat_export) {
            const auto text = catalog.export_manifest().dump(2) + "\n";
            if (export_file.empty())
                std::cout << text;
            else
                write_file(export_file, text);
            return 0;
        }
        if (*survey_build) {
            SurveyOptions so;
            so.models = cfg.models;
            so.artifacts_per_category = per_category;
            so.layout = layout == "all_models" ? SurveyLayout::AllModels : SurveyLayout::RandomModel;
            const auto s = store.build_survey(country, survey_seed, so);
            for (const auto& a : annotators) store.register_annotator(s.id, a);
            std::cout << json{{"survey_id", s.id.value},
                              {"country", s.country},
                              {"seed", s.seed},
                              {"questions", s.questions.size()},
                              {"annotators", store.annotators(s.id)}}
                             .dump(2)
                      << "\n";
            return 0;
        }
        if (*survey_serve) {
            SurveyServerOptions so;
            so.port = port;
            so.host = host;
            SurveyServer server(store, so);
            g_server = &server;
            std::signal(SIGINT, [](int) {
                g_stop = 1;
                if (g_server) g_server->stop();
            });
            std::signal(SIGTERM, [](int) {
                g_stop = 1;
                if (g_server) g_server->stop();
            });
            const int bound = server.start();
            std::cerr << "serving surveys on http://" << host << ":" << bound << "\n";
            while (!g_stop) pause();
            server.stop();
            g_server = nullptr;
            return 0;
        }
        if (*ann_import) {
            const auto rows = read_annotation_csv(ann_file);
            const auto res = store.ingest(rows, register_unknown);
            json rejected = json::array();
            for (const auto& e : res.rejected)
                rejected.push_back(
                    {{"row", e.row_number}, {"error", std::string(to_string(e.code))}, {"reason", e.reason}});
            std::cout << json{{"accepted", res.accepted.size()}, {"rejected", rejected}}.dump(2) << "\n";
            return res.rejected.empty() ? 0 : 2;
        }
        if (*agreement) {
            std::vector<std::string> countries;
            if (!agreement_country.empty())
                countries.push_back(agreement_country);
            else
                for (const auto& s : store.surveys())
                    if (std::find(countries.begin(), countries.end(), s.country) == countries.end())
                        countries.push_back(s.country);
            json out = json::array();
            for (const auto& c : countries) {
                try {
                    out.push_back(store.agreement(c).to_json());
                } catch (const Error& e) {
                    out.push_back({{"country", c}, {"error", e.what()}});
                }
            }
            std::cout << (per_country || out.size() != 1 ? out : out[0]).dump(2) << "\n";
            return 0;
        }
        if (*pairs_split) {
            std::vector<ImagePair> all;
            auto read = [&](const fs::path& p) {
                std::ifstream in(p);
                if (!in) fail(ErrorCode::Io, "cannot read " + p.string());
                for (auto& x : read_pairs_jsonl(in)) all.push_back(std::move(x));
            };
            if (!pairs_in.empty()) {
                read(pairs_in);
            } else {
                for (const char* f : {"train.jsonl", "val.jsonl", "test.jsonl"}) read(cfg.workdir / "pairs" / f);
            }
            const auto plan = SplitPlan::from_json(read_json_file(plan_file));
            const auto res = split_dataset(all, plan);
            const fs::path dir = pairs_out.empty() ? cfg.workdir / "pairs" : fs::path(pairs_out);
            for (auto s : {Split::Train, Split::Val, Split::Test}) {
                std::ostringstream ss;
                write_pairs_jsonl(ss, res[s]);
                write_file(dir / (std::string(to_string(s)) + ".jsonl"), ss.str());
            }
            std::cout << json{{"train", res.train.size()},
                              {"val", res.val.size()},
                              {"test", res.test.size()},
                              {"dropped_real_pairs", res.dropped_real_pairs}}
                             .dump(2)
                      << "\n";
            return 0;
        }
        if (*score) {
            const auto embedder = load_checkpoint(checkpoint, true);
            std::ifstream in(cfg.workdir / "pairs" / (split_name + ".jsonl"));
            if (!in) fail(ErrorCode::StageDependency, "no pairs for split '" + split_name + "'; run `cultdiff pairs build`");
            std::vector<ImagePair> ps;
            for (auto& p : read_pairs_jsonl(in))
                if (p.origin == PairOrigin::RealSynthetic) ps.push_back(std::move(p));
            const HandcraftedFeatureExtractor fx;
            ScoreOptions so;
            so.parallelism = cfg.parallelism;
            so.extractor = no_fid ? nullptr : &fx;
            so.fid_references = question_references(store);
            const auto scores = score_pairs(catalog, ps, embedder, so);
            std::ostringstream ss;
            write_scores_csv(ss, scores);
            const fs::path out = scores_out.empty() ? cfg.workdir / "eval" / ("scores_" + split_name + ".csv")
                                                    : fs::path(scores_out);
            write_file(out, ss.str());
            std::cout << json{{"scores", out.string()}, {"pairs", scores.size()}}.dump(2) << "\n";
            return 0;
        }
        if (*correlate) {
            const fs::path in_path = scores_in.empty() ? cfg.workdir / "eval" / "scores.csv" : fs::path(scores_in);
            std::ifstream in(in_path);
            if (!in) fail(ErrorCode::StageDependency, "cannot read scores " + in_path.string());
            const auto scores = read_scores_csv(in);
            std::function<std::string(const PairScore&)> slice;
            if (slice_by != "none") {
                std::map<std::string, std::string> label;
                for (const auto& s : scores) {
                    const auto art = artifact_of_pair(catalog, s.pair_id);
                    const auto a = art ? catalog.artifact(*art) : std::nullopt;
                    std::string v = "unknown";
                    if (a && slice_by == "country") v = a->country;
                    if (a && slice_by == "category") v = std::string(to_string(a->category));
                    if (slice_by == "model") {
                        const auto colon = s.pair_id.find(':');
                        const auto rec = colon == std::string::npos
                                             ? std::nullopt
                                             : catalog.image(ImageId(std::stoll(s.pair_id.substr(colon + 1))));
                        if (rec && rec->model_id) v = *rec->model_id;
                    }
                    label[s.pair_id] = v;
                }
                slice = [label](const PairScore& s) { return label.at(s.pair_id); };
            }
            const auto table = correlation_table(scores, slice);
            if (!corr_out.empty()) {
                std::ostringstream ss;
                table.write_csv(ss);
                write_file(corr_out, ss.str());
            }
            std::cout << table.to_json().dump(2) << "\n";
            return 0;
        }
        if (*rankings || *aggregate) {
            const auto views = annotation_views(store);
            if (*rankings) {
                std::optional<std::string> m = model_filter.empty() ? std::nullopt : std::optional(model_filter);
                std::optional<Category> c;
                if (!category_filter.empty()) c = parse_category(category_filter);
                const auto ranks = rank_countries(views, question_index(question), m, c);
                std::ostringstream ss;
                write_rankings_csv(ss, ranks);
                if (report_out.empty())
                    std::cout << ss.str();
                else
                    write_file(report_out, ss.str());
                if (!plot_out.empty()) {
                    std::vector<Bar> bars;
                    for (const auto& r : ranks) bars.push_back({r.country, r.mean, std::nullopt});
                    write_bar_chart(plot_out, "Country ranking: " + question, bars, 1.0, 5.0);
                }
                return 0;
            }
            std::vector<GroupKey> keys;
            for (const auto& g : split_csv(group_by)) {
                const auto key = parse_group_key(g);
                if (!key) fail(ErrorCode::InvalidConfig, "unknown grouping '" + g + "'");
                keys.push_back(*key);
            }
            const auto rows = aggregate_report(views, keys, question_set(questions));
            std::ostringstream ss;
            write_aggregate_csv(ss, rows, keys);
            if (report_out.empty())
                std::cout << ss.str();
            else
                write_file(report_out, ss.str());
            if (!plot_out.empty()) {
                std::vector<Bar> bars;
                for (const auto& r : rows) {
                    std::string label;
                    for (const auto& [kname, v] : r.group) label += (label.empty() ? "" : "/") + v;
                    bars.push_back({label, r.mean, r.sem});
                }
                write_bar_chart(plot_out, "Mean score (" + questions + ")", bars, 1.0, 5.0);
            }
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
