// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "cultdiff/pipeline.hpp"

#include <signal.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "cultdiff/dataset.hpp"
#include "cultdiff/evalsuite.hpp"
#include "cultdiff/fixture.hpp"
#include "cultdiff/image.hpp"
#include "cultdiff/metrics.hpp"
#include "cultdiff/report.hpp"

namespace cultdiff {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Stage s) noexcept {
    switch (s) {
        case Stage::Prompts: return "prompts";
        case Stage::Collect: return "collect";
        case Stage::Generate: return "generate";
        case Stage::Survey: return "survey";
        case Stage::Pairs: return "pairs";
        case Stage::Train: return "train";
        case Stage::Eval: return "eval";
    }
    return "?";
}

std::vector<Stage> parse_stages(std::string_view text) {
    if (text == "all") return {kAllStages.begin(), kAllStages.end()};
    std::set<Stage> chosen;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find(',', start);
        if (end == std::string_view::npos) end = text.size();
        const auto name = text.substr(start, end - start);
        const auto it = std::find_if(kAllStages.begin(), kAllStages.end(), [&](Stage s) { return to_string(s) == name; });
        if (it == kAllStages.end()) fail(ErrorCode::InvalidConfig, "unknown stage '" + std::string(name) + "'");
        chosen.insert(*it);
        start = end + 1;
    }
    return {chosen.begin(), chosen.end()};
}

std::vector<Stage> stage_dependencies(Stage s) {
    switch (s) {
        case Stage::Prompts: return {};
        case Stage::Collect: return {Stage::Prompts};
        case Stage::Generate: return {Stage::Prompts};
        case Stage::Survey: return {Stage::Collect, Stage::Generate};
        case Stage::Pairs: return {Stage::Survey};
        case Stage::Train: return {Stage::Pairs};
        case Stage::Eval: return {Stage::Survey, Stage::Pairs, Stage::Train};
    }
    return {};
}

int exit_code_for(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::ClientUnavailable:
        case ErrorCode::QuotaExceeded:
        case ErrorCode::GenerationRejected: return 3;
        default: return 2;
    }
}

// ---- configuration ---------------------------------------------------------------------

json ClientConfig::to_json() const { return {{"kind", kind}, {"url", url}, {"env_prefix", env_prefix}}; }

json PipelineSeeds::to_json() const {
    return {{"survey", survey}, {"split", split}, {"real_pairs", real_pairs}, {"generation", generation}};
}

namespace {

std::string layout_key(SurveyLayout l) { return l == SurveyLayout::AllModels ? "all_models" : "random_model"; }

SurveyLayout parse_layout(const std::string& s) {
    if (s == "all_models") return SurveyLayout::AllModels;
    if (s == "random_model") return SurveyLayout::RandomModel;
    fail(ErrorCode::InvalidConfig, "survey_layout must be all_models or random_model, got '" + s + "'");
}

ClientConfig client_from_json(const json& j, ClientConfig base) {
    if (j.contains("kind")) base.kind = j["kind"].get<std::string>();
    if (j.contains("url")) base.url = j["url"].get<std::string>();
    if (j.contains("token")) base.token = j["token"].get<std::string>();
    if (j.contains("env_prefix")) base.env_prefix = j["env_prefix"].get<std::string>();
    return base;
}

fs::path resolve_path(const json& j, const fs::path& base) {
    fs::path p = j.get<std::string>();
    return p.is_absolute() || base.empty() ? p : base / p;
}

std::optional<std::string> getenv_str(const std::string& name) {
    const char* v = std::getenv(name.c_str());
    if (!v || !*v) return std::nullopt;
    return std::string(v);
}

}  // namespace

std::vector<std::string> PipelineConfig::effective_countries() const {
    if (!countries.empty()) return countries;
    std::vector<std::string> out;
    for (const auto& c : default_countries()) out.push_back(c.code);
    return out;
}

void PipelineConfig::validate() const {
    auto bad = [](const std::string& m) { fail(ErrorCode::InvalidConfig, m); };
    if (split.train < 0 || split.val < 0 || split.test < 0) bad("split counts must be non-negative");
    if (split.total() != artifacts_per_cell)
        bad("split counts sum to " + std::to_string(split.total()) + " but artifacts_per_cell is " +
            std::to_string(artifacts_per_cell));
    if (artifacts_per_cell < 1) bad("artifacts_per_cell must be positive");
    if (references_per_artifact < 3) bad("references_per_artifact must be at least 3");
    if (models.empty()) bad("models must not be empty");
    if (categories.empty()) bad("categories must not be empty");
    std::set<std::string> known;
    for (const auto& c : default_countries()) known.insert(c.code);
    for (const auto& c : countries)
        if (!known.count(c)) bad("unknown country '" + c + "'");
    for (const auto* c : {&search, &generation})
        if (c->kind != "stub" && c->kind != "http") bad("client kind must be stub or http, got '" + c->kind + "'");
    if (generation_width < 1 || generation_height < 1) bad("generation resolution must be positive");
    if (parallelism < 1) bad("parallelism must be at least 1");
    if (neg_ratio < 0) bad("neg_ratio must be non-negative");
    if (same_country_fraction < 0 || same_country_fraction > 1) bad("same_country_fraction must lie in [0, 1]");
    if (max_positives_per_artifact < 0) bad("max_positives_per_artifact must be non-negative");
    encoder.validate();
    train.validate();
}

PipelineConfig PipelineConfig::from_json(const json& j, const fs::path& base_dir) {
    static const std::set<std::string> keys{"workdir",   "countries",   "categories",  "artifacts_per_cell",
                                            "references_per_artifact", "models", "split", "seeds",
                                            "artifacts", "demonyms",    "annotations", "register_annotators",
                                            "survey_layout", "clients", "generation_resolution", "parallelism",
                                            "pairs",     "encoder",     "train",       "eval"};
    if (!j.is_object()) fail(ErrorCode::InvalidConfig, "pipeline config must be a JSON object");
    for (const auto& [k, v] : j.items())
        if (!keys.count(k)) fail(ErrorCode::InvalidConfig, "unknown config key '" + k + "'");
    PipelineConfig c;
    try {
        if (j.contains("workdir")) c.workdir = resolve_path(j["workdir"], base_dir);
        if (j.contains("countries")) c.countries = j["countries"].get<std::vector<std::string>>();
        if (j.contains("categories")) {
            c.categories.clear();
            for (const auto& s : j["categories"]) c.categories.push_back(parse_category(s.get<std::string>()));
        }
        c.artifacts_per_cell = j.value("artifacts_per_cell", c.artifacts_per_cell);
        c.references_per_artifact = j.value("references_per_artifact", c.references_per_artifact);
        if (j.contains("models")) c.models = j["models"].get<std::vector<std::string>>();
        if (j.contains("split")) {
            c.split.train = j["split"].value("train", c.split.train);
            c.split.val = j["split"].value("val", c.split.val);
            c.split.test = j["split"].value("test", c.split.test);
        }
        if (j.contains("seeds")) {
            const auto& s = j["seeds"];
            c.seeds.survey = s.value("survey", c.seeds.survey);
            c.seeds.split = s.value("split", c.seeds.split);
            c.seeds.real_pairs = s.value("real_pairs", c.seeds.real_pairs);
            c.seeds.generation = s.value("generation", c.seeds.generation);
        }
        if (j.contains("artifacts") && !j["artifacts"].is_null()) c.artifacts = resolve_path(j["artifacts"], base_dir);
        if (j.contains("demonyms") && !j["demonyms"].is_null()) c.demonyms = resolve_path(j["demonyms"], base_dir);
        if (j.contains("annotations") && !j["annotations"].is_null())
            c.annotations = resolve_path(j["annotations"], base_dir);
        c.register_annotators = j.value("register_annotators", c.register_annotators);
        if (j.contains("survey_layout")) c.survey_layout = parse_layout(j["survey_layout"].get<std::string>());
        if (j.contains("clients")) {
            if (j["clients"].contains("search")) c.search = client_from_json(j["clients"]["search"], c.search);
            if (j["clients"].contains("generation"))
                c.generation = client_from_json(j["clients"]["generation"], c.generation);
        }
        if (j.contains("generation_resolution")) {
            c.generation_width = j["generation_resolution"].value("width", c.generation_width);
            c.generation_height = j["generation_resolution"].value("height", c.generation_height);
        }
        c.parallelism = j.value("parallelism", c.parallelism);
        if (j.contains("pairs")) {
            const auto& p = j["pairs"];
            c.neg_ratio = p.value("neg_ratio", c.neg_ratio);
            c.max_positives_per_artifact = p.value("max_positives_per_artifact", c.max_positives_per_artifact);
            c.same_country_fraction = p.value("same_country_fraction", c.same_country_fraction);
        }
        if (j.contains("encoder")) c.encoder = EncoderSpec::from_json(j["encoder"]);
        if (j.contains("train")) c.train = TrainConfig::from_json(j["train"]);
        if (j.contains("eval")) {
            if (j["eval"].contains("split")) c.eval_split = parse_split(j["eval"]["split"].get<std::string>());
            c.eval_fid = j["eval"].value("fid", c.eval_fid);
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::InvalidConfig, std::string("malformed pipeline config: ") + e.what());
    }
    return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::Io, "cannot read config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorCode::InvalidConfig, path.string() + " is not valid JSON: " + e.what());
    }
    return from_json(j, path.parent_path());
}

json PipelineConfig::to_json() const {
    json cats = json::array();
    for (auto c : categories) cats.push_back(std::string(cultdiff::to_string(c)));
    json j{{"workdir", workdir.string()},
           {"countries", countries},
           {"categories", cats},
           {"artifacts_per_cell", artifacts_per_cell},
           {"references_per_artifact", references_per_artifact},
           {"models", models},
           {"split", {{"train", split.train}, {"val", split.val}, {"test", split.test}}},
           {"seeds", seeds.to_json()},
           {"register_annotators", register_annotators},
           {"survey_layout", layout_key(survey_layout)},
           {"clients", {{"search", search.to_json()}, {"generation", generation.to_json()}}},
           {"generation_resolution", {{"width", generation_width}, {"height", generation_height}}},
           {"parallelism", parallelism},
           {"pairs",
            {{"neg_ratio", neg_ratio},
             {"max_positives_per_artifact", max_positives_per_artifact},
             {"same_country_fraction", same_country_fraction}}},
           {"encoder", encoder.to_json()},
           {"train", train.to_json()},
           {"eval", {{"split", std::string(cultdiff::to_string(eval_split))}, {"fid", eval_fid}}}};
    if (artifacts) j["artifacts"] = artifacts->string();
    if (demonyms) j["demonyms"] = demonyms->string();
    if (annotations) j["annotations"] = annotations->string();
    return j;
}

void PipelineConfig::apply_env() {
    for (auto* c : {&search, &generation}) {
        if (c->env_prefix.empty()) continue;
        if (auto v = getenv_str(c->env_prefix + "_URL")) c->url = *v;
        if (auto v = getenv_str(c->env_prefix + "_TOKEN")) c->token = *v;
        if (auto v = getenv_str(c->env_prefix + "_KIND")) c->kind = *v;
    }
}

CatalogConfig catalog_config_for(const PipelineConfig& config) {
    CatalogConfig out;
    if (config.countries.empty()) return out;
    std::vector<CountryInfo> chosen;
    for (const auto& code : config.countries)
        for (const auto& c : out.countries)
            if (c.code == code) chosen.push_back(c);
    out.countries = chosen;
    return out;
}

// ---- lock ----------------------------------------------------------------------------

WorkdirLock::WorkdirLock(const fs::path& root) : m_path(root / ".lock") {
    fs::create_directories(root);
    for (int attempt = 0; attempt < 2; ++attempt) {
        std::FILE* f = std::fopen(m_path.c_str(), "wx");
        if (f) {
            std::fprintf(f, "%ld\n", static_cast<long>(::getpid()));
            std::fclose(f);
            return;
        }
        long pid = 0;
        if (std::ifstream in(m_path); in) in >> pid;
        if (pid > 0 && (::kill(static_cast<pid_t>(pid), 0) == 0 || errno == EPERM))
            fail(ErrorCode::Io, "workdir " + root.string() + " is locked by running process " + std::to_string(pid));
        std::error_code ec;
        fs::remove(m_path, ec);  // stale
    }
    fail(ErrorCode::Io, "cannot create lock file " + m_path.string());
}

WorkdirLock::~WorkdirLock() {
    std::error_code ec;
    fs::remove(m_path, ec);
}

// ---- stages ---------------------------------------------------------------------------

namespace {

std::string digest(const std::string& s) {
    return sha256_hex({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
}

std::string file_digest(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return "missing";
    std::ostringstream ss;
    ss << in.rdbuf();
    return digest(ss.str());
}

void write_text(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) fail(ErrorCode::Io, "cannot write " + p.string());
    out << text;
    if (!out) fail(ErrorCode::Io, "write failed for " + p.string());
}

std::vector<ImagePair> read_pairs_file(const fs::path& p) {
    std::ifstream in(p);
    if (!in) fail(ErrorCode::StageDependency, "missing pairs file " + p.string());
    return read_pairs_jsonl(in);
}

struct Context {
    const PipelineConfig& cfg;
    WorkdirLayout layout;
    Catalog& catalog;
    SurveyStore& store;
    const RunOptions& opts;
    std::ostream& log;
};

// Output fingerprints describe what a stage left behind; a downstream stage folds them into
// its input fingerprint.
std::string output_fingerprint(Stage s, const Context& c) {
    json j = json::array();
    switch (s) {
        case Stage::Prompts:
            for (const auto& p : c.catalog.prompts()) j.push_back({p.artifact_id.value, p.text, p.template_version});
            break;
        case Stage::Collect:
            for (const auto& r : c.catalog.images())
                if (r.source == ImageSource::Real) j.push_back({r.artifact_id.value, r.checksum});
            break;
        case Stage::Generate:
            for (const auto& r : c.catalog.images())
                if (r.source == ImageSource::Generated)
                    j.push_back({r.artifact_id.value, r.model_id.value_or(""), r.seed.value_or(0), r.checksum});
            break;
        case Stage::Survey: {
            for (const auto& sv : c.store.surveys()) j.push_back(to_json(sv));
            std::vector<json> rows;
            for (const auto& r : c.store.annotations()) {
                json a = to_json(r);
                a.erase("submitted_at");
                rows.push_back(std::move(a));
            }
            std::sort(rows.begin(), rows.end(), [](const json& a, const json& b) { return a.dump() < b.dump(); });
            j.push_back(rows);
            break;
        }
        case Stage::Pairs:
            for (const char* f : {"train.jsonl", "val.jsonl", "test.jsonl", "plan.json"})
                j.push_back(file_digest(c.layout.pairs_dir() / f));
            break;
        case Stage::Train:
            for (const char* f : {"config.json", "weights.bin", "weights_best.bin"})
                j.push_back(file_digest(c.layout.checkpoint_dir() / f));
            break;
        case Stage::Eval:
            for (const char* f : {"scores.csv", "correlations.csv"}) j.push_back(file_digest(c.layout.eval_dir() / f));
            break;
    }
    return digest(j.dump());
}

json stage_params(Stage s, const Context& c) {
    const auto& cfg = c.cfg;
    switch (s) {
        case Stage::Prompts: {
            json arts = json::array();
            for (const auto& a : c.catalog.artifacts())
                arts.push_back({a.id.value, a.country, std::string(to_string(a.category)), a.name});
            return {{"template_version", kPromptTemplateVersion},
                    {"artifacts", digest(arts.dump())},
                    {"artifacts_file", cfg.artifacts ? file_digest(*cfg.artifacts) : "none"},
                    {"demonyms", cfg.demonyms ? file_digest(*cfg.demonyms) : "default"}};
        }
        case Stage::Collect:
            return {{"k", cfg.references_per_artifact}, {"client", cfg.search.to_json()}};
        case Stage::Generate:
            return {{"models", cfg.models},
                    {"seed_base", cfg.seeds.generation},
                    {"width", cfg.generation_width},
                    {"height", cfg.generation_height},
                    {"client", cfg.generation.to_json()}};
        case Stage::Survey:
            return {{"countries", cfg.effective_countries()},
                    {"seed", cfg.seeds.survey},
                    {"layout", layout_key(cfg.survey_layout)},
                    {"models", cfg.models},
                    {"artifacts_per_category", cfg.artifacts_per_cell},
                    {"annotations", cfg.annotations ? file_digest(*cfg.annotations) : "none"},
                    {"register_annotators", cfg.register_annotators}};
        case Stage::Pairs:
            return {{"split", {cfg.split.train, cfg.split.val, cfg.split.test}},
                    {"split_seed", cfg.seeds.split},
                    {"real_pairs_seed", cfg.seeds.real_pairs},
                    {"neg_ratio", cfg.neg_ratio},
                    {"max_positives_per_artifact", cfg.max_positives_per_artifact},
                    {"same_country_fraction", cfg.same_country_fraction},
                    {"countries", cfg.effective_countries()}};
        case Stage::Train:
            return {{"encoder", cfg.encoder.to_json()}, {"train", cfg.train.to_json()}};
        case Stage::Eval:
            return {{"split", std::string(to_string(cfg.eval_split))}, {"fid", cfg.eval_fid}};
    }
    return {};
}

std::unique_ptr<SearchClient> make_search(const ClientConfig& c) {
    if (c.kind == "http") {
        if (c.url.empty()) fail(ErrorCode::ClientUnavailable, "search client url is not configured");
        auto ep = HttpEndpoint::parse(c.url);
        ep.token = c.token;
        return std::make_unique<HttpSearchClient>(ep);
    }
    return std::make_unique<StubSearchClient>();
}

std::unique_ptr<GenerationClient> make_generation(const ClientConfig& c) {
    if (c.kind == "http") {
        if (c.url.empty()) fail(ErrorCode::ClientUnavailable, "generation client url is not configured");
        auto ep = HttpEndpoint::parse(c.url);
        ep.token = c.token;
        return std::make_unique<HttpGenerationClient>(ep);
    }
    return std::make_unique<StubGenerationClient>(64);
}

json run_prompts(Context& c) {
    json out;
    if (c.catalog.artifacts().empty()) {
        if (!c.cfg.artifacts)
            fail(ErrorCode::InvalidConfig, "catalog has no artifacts and the config names no artifacts file");
        std::ifstream in(*c.cfg.artifacts);
        if (!in) fail(ErrorCode::Io, "cannot read " + c.cfg.artifacts->string());
        c.catalog.import_manifest(json::parse(in), c.cfg.artifacts->parent_path());
        out["imported_artifacts"] = c.catalog.artifacts().size();
    }
    DemonymTable table = default_demonym_table();
    if (c.cfg.demonyms) {
        std::ifstream in(*c.cfg.demonyms);
        if (!in) fail(ErrorCode::Io, "cannot read " + c.cfg.demonyms->string());
        table = load_demonym_table(json::parse(in));
    }
    out["rendered"] = render_all_prompts(c.catalog, table);
    out["template_version"] = kPromptTemplateVersion;
    return out;
}

json run_collect(Context& c) {
    std::unique_ptr<SearchClient> owned;
    SearchClient* client = c.opts.search_client;
    if (!client) client = (owned = make_search(c.cfg.search)).get();
    const auto summary = collect_all(c.catalog, *client, c.cfg.references_per_artifact, c.cfg.parallelism);
    for (const auto& w : summary.warnings) c.log << "  warning: " << w << "\n";
    std::size_t real = 0;
    for (const auto& r : c.catalog.images())
        if (r.source == ImageSource::Real) ++real;
    return {{"registered", summary.registered}, {"shortfall_warnings", summary.warnings}, {"real_images", real}};
}

json run_generate(Context& c) {
    std::unique_ptr<GenerationClient> owned;
    GenerationClient* client = c.opts.generation_client;
    if (!client) client = (owned = make_generation(c.cfg.generation)).get();
    GenerationPlan plan;
    plan.models = c.cfg.models;
    plan.seed_base = c.cfg.seeds.generation;
    plan.width = c.cfg.generation_width;
    plan.height = c.cfg.generation_height;
    plan.parallelism = c.cfg.parallelism;
    const auto summary = generate_all(c.catalog, *client, plan);
    if (!summary.failures.empty())
        fail(ErrorCode::GenerationRejected, std::to_string(summary.failures.size()) + " request(s) rejected; first: " +
                                                summary.failures.front());
    return {{"generated", summary.generated}, {"skipped_existing", summary.skipped}};
}

json run_survey(Context& c) {
    SurveyOptions so;
    so.models = c.cfg.models;
    so.artifacts_per_category = c.cfg.artifacts_per_cell;
    so.layout = c.cfg.survey_layout;
    const auto existing = c.store.surveys();
    json surveys = json::array();
    const auto countries = c.cfg.effective_countries();
    for (std::size_t k = 0; k < countries.size(); ++k) {
        const auto seed = c.cfg.seeds.survey + k;
        auto it = std::find_if(existing.begin(), existing.end(), [&](const Survey& s) {
            return s.country == countries[k] && s.seed == seed && s.layout == so.layout;
        });
        const Survey s = it != existing.end() ? *it : c.store.build_survey(countries[k], seed, so);
        surveys.push_back({{"id", s.id.value},
                           {"country", s.country},
                           {"seed", s.seed},
                           {"questions", s.questions.size()},
                           {"reused", it != existing.end()}});
    }
    json out{{"surveys", surveys}};
    if (c.cfg.annotations) {
        const auto rows = read_annotation_csv(*c.cfg.annotations);
        const auto res = c.store.ingest(rows, c.cfg.register_annotators);
        std::size_t duplicates = 0;
        const IngestError* first = nullptr;
        for (const auto& e : res.rejected) {
            if (e.code == ErrorCode::DuplicateResponse) {
                ++duplicates;
            } else if (!first) {
                first = &e;
            }
        }
        out["accepted"] = res.accepted.size();
        out["already_present"] = duplicates;
        if (first)
            fail(first->code, "annotation row " + std::to_string(first->row_number) + ": " + first->reason + " (" +
                                  std::to_string(res.rejected.size() - duplicates) + " row(s) rejected)");
    }
    out["annotations"] = c.store.annotations().size();
    return out;
}

json run_pairs(Context& c) {
    DatasetOptions opts;
    opts.counts = c.cfg.split;
    opts.split_seed = c.cfg.seeds.split;
    opts.real.negatives_per_positive = c.cfg.neg_ratio;
    opts.real.seed = c.cfg.seeds.real_pairs;
    opts.real.max_positives_per_artifact = c.cfg.max_positives_per_artifact;
    opts.real.same_country_fraction = c.cfg.same_country_fraction;
    opts.countries = c.cfg.effective_countries();
    const auto d = build_dataset(c.catalog, c.store, opts);
    const auto dir = c.layout.pairs_dir();
    for (auto s : {Split::Train, Split::Val, Split::Test}) {
        std::ostringstream ss;
        write_pairs_jsonl(ss, d.splits[s]);
        write_text(dir / (std::string(to_string(s)) + ".jsonl"), ss.str());
    }
    write_text(dir / "plan.json", d.plan.to_json().dump(2) + "\n");
    return {{"train", d.splits.train.size()},
            {"val", d.splits.val.size()},
            {"test", d.splits.test.size()},
            {"real_pairs", d.real_pairs},
            {"synthetic_pairs", d.synthetic_pairs},
            {"unannotated_images", d.unannotated.size()},
            {"dropped_real_pairs", d.splits.dropped_real_pairs}};
}

json run_train(Context& c) {
    const auto train_pairs = read_pairs_file(c.layout.pairs_dir() / "train.jsonl");
    const auto val_pairs = read_pairs_file(c.layout.pairs_dir() / "val.jsonl");
    TrainOptions to;
    to.checkpoint_dir = c.layout.checkpoint_dir();
    to.on_epoch = [&](const EpochRecord& e) {
        c.log << "  epoch " << e.epoch << " train_loss " << e.train_loss << " val_loss " << e.val_loss << "\n";
    };
    const auto r = train(c.catalog, train_pairs, val_pairs, c.cfg.encoder, c.cfg.train, to);
    const auto& last = r.history.epochs.back();
    return {{"epochs", r.history.epochs.size()},
            {"best_epoch", r.history.best_epoch},
            {"final_train_loss", last.train_loss},
            {"final_val_loss", last.val_loss},
            {"data_fingerprint", r.data_fingerprint},
            {"train_pairs", train_pairs.size()},
            {"val_pairs", val_pairs.size()}};
}

json run_eval(Context& c) {
    const auto embedder = load_checkpoint(c.layout.checkpoint_dir(), true);
    std::vector<ImagePair> pairs;
    for (auto& p : read_pairs_file(c.layout.pairs_dir() / (std::string(to_string(c.cfg.eval_split)) + ".jsonl")))
        if (p.origin == PairOrigin::RealSynthetic) pairs.push_back(std::move(p));
    if (pairs.empty()) fail(ErrorCode::EmptySplit, "no real-synthetic pairs in the evaluation split");

    const HandcraftedFeatureExtractor fx;
    ScoreOptions so;
    so.parallelism = c.cfg.parallelism;
    so.extractor = c.cfg.eval_fid ? &fx : nullptr;
    so.fid_references = question_references(c.store);
    const auto scores = score_pairs(c.catalog, pairs, embedder, so);

    const auto dir = c.layout.eval_dir();
    fs::create_directories(dir);
    {
        std::ostringstream ss;
        write_scores_csv(ss, scores);
        write_text(dir / "scores.csv", ss.str());
    }
    std::map<std::string, std::string> country_of;
    for (const auto& p : pairs)
        if (auto a = c.catalog.artifact(p.artifact_a)) country_of[p.id] = a->country;
    const auto table = correlation_table(scores, [&](const PairScore& s) { return country_of.at(s.pair_id); });
    {
        std::ostringstream ss;
        table.write_csv(ss);
        write_text(dir / "correlations.csv", ss.str());
        write_text(dir / "correlations.json", table.to_json().dump(2) + "\n");
    }
    json headline;
    for (const auto& r : table.overall)
        headline[r.metric] = r.spearman ? json(*r.spearman) : json(nullptr);

    std::vector<double> xs, ys;
    for (const auto& s : scores)
        if (s.human) {
            xs.push_back(s.cultdiff_s);
            ys.push_back(*s.human);
        }
    std::ostringstream ann;
    ann << "rho = " << (headline["cultdiff_s"].is_number() ? headline["cultdiff_s"].get<double>() : 0.0);
    write_scatter_plot(dir / "scatter_cultdiff_s.png", "CultDiff-S vs human score", xs, ys, ann.str());

    const auto views = annotation_views(c.store);
    json reports = json::array({"scores.csv", "correlations.csv", "correlations.json", "scatter_cultdiff_s.png"});
    if (!views.empty()) {
        const auto ranks = rank_countries(views, 0, std::nullopt, std::nullopt);
        std::ostringstream r;
        write_rankings_csv(r, ranks);
        write_text(dir / "rankings_q1_1.csv", r.str());
        std::vector<Bar> bars;
        for (const auto& x : ranks) bars.push_back({x.country, x.mean, std::nullopt});
        write_bar_chart(dir / "rankings_q1_1.png", "Overall similarity by country", bars, 1.0, 5.0);

        const std::vector<GroupKey> by{GroupKey::Country};
        const auto six = question_set("six");
        const auto rows = aggregate_report(views, by, six);
        std::ostringstream a;
        write_aggregate_csv(a, rows, by);
        write_text(dir / "aggregate_country.csv", a.str());
        bars.clear();
        for (const auto& x : rows) bars.push_back({x.group.at("country"), x.mean, x.sem});
        write_bar_chart(dir / "aggregate_country.png", "Mean score by country (six questions)", bars, 1.0, 5.0);

        json agreement = json::array();
        for (const auto& country : c.cfg.effective_countries()) {
            try {
                agreement.push_back(c.store.agreement(country).to_json());
            } catch (const Error& e) {
                agreement.push_back({{"country", country}, {"error", e.what()}});
            }
        }
        write_text(dir / "agreement.json", agreement.dump(2) + "\n");
        for (const char* f : {"rankings_q1_1.csv", "rankings_q1_1.png", "aggregate_country.csv",
                              "aggregate_country.png", "agreement.json"})
            reports.push_back(f);
    }
    return {{"pairs_scored", scores.size()},
            {"split", std::string(to_string(c.cfg.eval_split))},
            {"spearman", headline},
            {"fid_features", c.cfg.eval_fid ? json(fx.name()) : json(nullptr)},
            {"files", reports}};
}

json run_stage(Stage s, Context& c) {
    switch (s) {
        case Stage::Prompts: return run_prompts(c);
        case Stage::Collect: return run_collect(c);
        case Stage::Generate: return run_generate(c);
        case Stage::Survey: return run_survey(c);
        case Stage::Pairs: return run_pairs(c);
        case Stage::Train: return run_train(c);
        case Stage::Eval: return run_eval(c);
    }
    return {};
}

std::optional<json> read_manifest(const fs::path& p) {
    std::ifstream in(p);
    if (!in) return std::nullopt;
    try {
        return json::parse(in);
    } catch (const json::exception&) {
        return std::nullopt;
    }
}

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& config, const std::vector<Stage>& stages, const RunOptions& options) {
    PipelineResult result;
    std::ostream& log = options.log ? *options.log : std::cerr;
    std::optional<Stage> current;
    try {
        config.validate();
        WorkdirLock lock(config.workdir);
        const WorkdirLayout layout{config.workdir};
        fs::create_directories(layout.root / "manifests");

        std::set<Stage> requested(stages.begin(), stages.end());
        // Fail fast on missing upstream outputs before touching anything.
        for (auto s : requested)
            for (auto dep : stage_dependencies(s)) {
                if (requested.count(dep)) continue;
                if (!fs::exists(layout.manifest(dep)) || fs::exists(layout.incomplete(dep)))
                    fail(ErrorCode::StageDependency,
                         "stage '" + std::string(to_string(s)) + "' needs the outputs of stage '" +
                             std::string(to_string(dep)) + "' (" + layout.manifest(dep).string() +
                             " is missing or incomplete); run it first or add it to --stages");
            }

        Catalog catalog = Catalog::open(layout.root, catalog_config_for(config));
        SurveyStore store(catalog);
        Context ctx{config, layout, catalog, store, options, log};

        const json seeds{{"pipeline", config.seeds.to_json()},
                         {"train", config.train.seed},
                         {"encoder_init", config.encoder.init_seed}};
        for (auto s : kAllStages) {
            if (!requested.count(s)) continue;
            current = s;
            json upstream = json::object();
            for (auto dep : stage_dependencies(s)) upstream[std::string(to_string(dep))] = output_fingerprint(dep, ctx);
            const json inputs{{"params", stage_params(s, ctx)}, {"upstream", upstream}};
            const auto input_fp = digest(inputs.dump());

            const auto previous = read_manifest(layout.manifest(s));
            if (!options.force && previous && !fs::exists(layout.incomplete(s)) &&
                previous->value("input_fingerprint", "") == input_fp &&
                previous->value("output_fingerprint", "") == output_fingerprint(s, ctx)) {
                log << "[" << to_string(s) << "] skipped (inputs unchanged)\n";
                result.stages.push_back({s, true, *previous});
                continue;
            }

            log << "[" << to_string(s) << "] running\n";
            write_text(layout.incomplete(s), "running\n");
            json outputs;
            try {
                outputs = run_stage(s, ctx);
            } catch (const std::exception& e) {
                write_text(layout.incomplete(s), std::string(e.what()) + "\n");
                throw;
            }
            json manifest{{"stage", std::string(to_string(s))},
                          {"inputs", inputs},
                          {"input_fingerprint", input_fp},
                          {"seeds", seeds},
                          {"outputs", outputs},
                          {"output_fingerprint", output_fingerprint(s, ctx)},
                          {"created_at", utc_now()}};
            write_text(layout.manifest(s), manifest.dump(2) + "\n");
            fs::remove(layout.incomplete(s));
            log << "[" << to_string(s) << "] done\n";
            result.stages.push_back({s, false, std::move(manifest)});
        }
        current.reset();
    } catch (const Error& e) {
        result.exit_code = exit_code_for(e.code());
        result.failed_stage = current;
        result.message = (current ? "stage " + std::string(to_string(*current)) + " failed: " : std::string()) + e.what();
    } catch (const std::exception& e) {
        result.exit_code = 2;
        result.failed_stage = current;
        result.message = (current ? "stage " + std::string(to_string(*current)) + " failed: " : std::string()) + e.what();
    }
    if (!result.ok()) log << result.message << "\n";
    return result;
}

// ---- fixture workdir ------------------------------------------------------------------

PipelineConfig write_fixture_workdir(const fs::path& dir, std::uint64_t seed) {
    FixtureOptions fo;
    fo.seed = seed;
    fs::create_directories(dir);
    if (fs::exists(dir / "catalog.db")) fail(ErrorCode::Io, dir.string() + " already holds a catalog");

    PipelineConfig cfg;
    cfg.workdir = dir;
    cfg.countries = fo.countries;
    cfg.artifacts_per_cell = fo.artifacts_per_category;
    cfg.references_per_artifact = fo.references_per_artifact;
    cfg.models = fo.models;
    cfg.split = {2, 1, 1};
    cfg.seeds.survey = fo.seed;
    cfg.annotations = dir / "annotations.csv";
    cfg.generation_width = fo.image_size;
    cfg.generation_height = fo.image_size;
    cfg.encoder.image_size = 32;
    cfg.encoder.patch_size = 8;
    cfg.encoder.hidden_dim = 64;
    cfg.encoder.layers = 2;
    cfg.encoder.heads = 4;
    cfg.encoder.mlp_dim = 128;
    cfg.encoder.init_seed = fo.seed;
    cfg.train.epochs = 5;
    cfg.train.seed = fo.seed;

    {
        Catalog catalog = Catalog::open(dir, fixture_catalog_config(fo));
        const auto truth = build_fixture_catalog(catalog, fo);
        SurveyStore store(catalog);
        const auto surveys = build_fixture_surveys(store, fo);
        const auto rows = oracle_annotations(surveys, truth, fo);
        std::vector<AnnotationRecord> records;
        for (const auto& r : rows) {
            AnnotationRecord a;
            a.question_id = QuestionId(*r.question_id);
            a.annotator_id = r.annotator_id;
            for (int i = 0; i < 4; ++i) a.q1[i] = *r.q1[i];
            a.q2 = *r.q2;
            a.q3 = *r.q3;
            a.inappropriate = r.inappropriate.value_or(false);
            records.push_back(a);
        }
        std::ostringstream csv;
        write_annotation_csv(csv, records);
        write_text(dir / "annotations.csv", csv.str());
        json t = json::object();
        for (const auto& [id, q] : truth.fidelity) t[std::to_string(id.value)] = q;
        write_text(dir / "truth.json", t.dump(2) + "\n");
    }
    json j = cfg.to_json();
    j["workdir"] = ".";
    j["annotations"] = "annotations.csv";
    write_text(dir / "pipeline.json", j.dump(2) + "\n");
    return cfg;
}

}  // namespace cultdiff
