// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "cultdiff/catalog.hpp"

#include <algorithm>
#include <cctype>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <unordered_map>

#include "cultdiff/error.hpp"

namespace cultdiff {

std::vector<CountryInfo> default_countries() {
    return {
        {"AZ", "Azerbaijan", {}},
        {"CN", "China", {}},
        {"ET", "Ethiopia", {}},
        {"ID", "Indonesia", {}},
        {"MX", "Mexico", {}},
        {"PK", "Pakistan", {}},
        {"KR", "South Korea", {"S. Korea", "Korea"}},
        {"ES", "Spain", {}},
        {"GB", "United Kingdom", {"UK", "the United Kingdom"}},
        {"US", "United States", {"USA", "the United States"}},
    };
}

std::vector<std::string> default_models() {
    return {"sdxl", "sd3m", "flux"};
}

ValidationTargets ValidationTargets::from_json(const nlohmann::json& j) {
    ValidationTargets t;
    t.artifacts_per_cell = j.value("artifacts_per_cell", t.artifacts_per_cell);
    t.real_per_artifact = j.value("real_per_artifact", t.real_per_artifact);
    if (j.contains("models")) t.models = j.at("models").get<std::vector<std::string>>();
    if (j.contains("countries")) t.countries = j.at("countries").get<std::vector<std::string>>();
    if (j.contains("categories")) {
        t.categories.clear();
        for (const auto& c : j.at("categories")) t.categories.push_back(parse_category(c.get<std::string>()));
    }
    return t;
}

std::string Violation::describe() const {
    std::string where = country + "/" + std::string(to_string(category));
    switch (kind) {
    case Kind::CellArtifactCount:
        return where + ": " + std::to_string(actual) + " artifacts, expected " + std::to_string(expected);
    case Kind::RealImageShortfall:
        return where + " artifact " + std::to_string(artifact->value) + ": " + std::to_string(actual) +
               " real images, expected at least " + std::to_string(expected);
    case Kind::MissingGenerated:
        return where + " artifact " + std::to_string(artifact->value) + ": no image generated by " + *model;
    }
    return where;
}

nlohmann::json CatalogValidationReport::to_json() const {
    nlohmann::json out;
    out["ok"] = ok();
    auto& cells = out["artifacts_per_cell"] = nlohmann::json::array();
    for (const auto& [key, n] : artifacts_per_cell)
        cells.push_back({{"country", key.first}, {"category", to_string(key.second)}, {"count", n}});
    auto& list = out["violations"] = nlohmann::json::array();
    for (const auto& v : violations) {
        static constexpr const char* kinds[] = {"cell_artifact_count", "real_image_shortfall", "missing_generated"};
        nlohmann::json row{{"kind", kinds[static_cast<int>(v.kind)]},
                           {"country", v.country},
                           {"category", to_string(v.category)},
                           {"expected", v.expected},
                           {"actual", v.actual},
                           {"message", v.describe()}};
        if (v.artifact) row["artifact_id"] = v.artifact->value;
        if (v.model) row["model_id"] = *v.model;
        list.push_back(std::move(row));
    }
    return out;
}

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::ranges::transform(out, out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::string extension_for(std::span<const std::uint8_t> bytes) {
    if (bytes.size() >= 8 && bytes[0] == 0x89 && bytes[1] == 'P' && bytes[2] == 'N' && bytes[3] == 'G') return ".png";
    if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) return ".jpg";
    if (bytes.size() >= 2 && bytes[0] == 'B' && bytes[1] == 'M') return ".bmp";
    if (bytes.size() >= 12 && bytes[8] == 'W' && bytes[9] == 'E' && bytes[10] == 'B' && bytes[11] == 'P') return ".webp";
    return ".img";
}

constexpr const char* kSchema = R"sql(
CREATE TABLE IF NOT EXISTS artifacts (
    id INTEGER PRIMARY KEY,
    country TEXT NOT NULL,
    category TEXT NOT NULL,
    name TEXT NOT NULL,
    prompt_id INTEGER,
    UNIQUE (country, category, name)
);
CREATE TABLE IF NOT EXISTS prompts (
    id INTEGER PRIMARY KEY,
    artifact_id INTEGER NOT NULL UNIQUE REFERENCES artifacts(id),
    text TEXT NOT NULL,
    template_version TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS images (
    id INTEGER PRIMARY KEY,
    artifact_id INTEGER NOT NULL REFERENCES artifacts(id),
    source TEXT NOT NULL CHECK (source IN ('real', 'generated')),
    uri TEXT NOT NULL,
    checksum TEXT NOT NULL,
    model_id TEXT,
    seed INTEGER,
    width INTEGER NOT NULL,
    height INTEGER NOT NULL,
    prompt_id INTEGER,
    CHECK ((source = 'generated') = (model_id IS NOT NULL))
);
CREATE INDEX IF NOT EXISTS images_by_artifact ON images (artifact_id);
)sql";

}  // namespace

struct Catalog::Impl {
    CatalogConfig config;
    std::shared_ptr<Database> db;
    std::optional<std::filesystem::path> root;

    mutable std::shared_mutex mirror_mutex;
    std::vector<Artifact> artifacts;  // ordered by id
    std::vector<ImageRecord> images;  // ordered by id
    std::vector<PromptRecord> prompts;
    std::unordered_map<ArtifactId, std::size_t> artifact_index;
    std::unordered_map<ImageId, std::size_t> image_index;
    std::map<std::tuple<std::string, Category, std::string>, ArtifactId> by_triple;
    std::unordered_map<ArtifactId, std::vector<std::size_t>> images_by_artifact;
    std::unordered_map<std::string, std::vector<std::uint8_t>> memory_blobs;  // in-memory catalogs only

    void reload() {
        std::unique_lock lock(mirror_mutex);
        artifacts.clear();
        images.clear();
        prompts.clear();
        artifact_index.clear();
        image_index.clear();
        by_triple.clear();
        images_by_artifact.clear();
        load();
    }

    void load() {
        auto a = db->prepare("SELECT id, country, category, name, prompt_id FROM artifacts ORDER BY id");
        while (a.step()) {
            Artifact art{ArtifactId(a.column_int(0)), a.column_text(1), parse_category(a.column_text(2)),
                         a.column_text(3), a.column_opt_int(4)};
            add_artifact(std::move(art));
        }
        auto p = db->prepare("SELECT id, artifact_id, text, template_version FROM prompts ORDER BY id");
        while (p.step())
            prompts.push_back({p.column_int(0), ArtifactId(p.column_int(1)), p.column_text(2), p.column_text(3)});
        auto i = db->prepare(
            "SELECT id, artifact_id, source, uri, checksum, model_id, seed, width, height, prompt_id "
            "FROM images ORDER BY id");
        while (i.step()) {
            ImageRecord rec{ImageId(i.column_int(0)), ArtifactId(i.column_int(1)), parse_source(i.column_text(2)),
                            i.column_text(3), i.column_text(4), i.column_opt_text(5), i.column_opt_int(6),
                            static_cast<int>(i.column_int(7)), static_cast<int>(i.column_int(8)),
                            i.column_opt_int(9)};
            add_image(std::move(rec));
        }
    }

    void add_artifact(Artifact art) {
        artifact_index[art.id] = artifacts.size();
        by_triple[{art.country, art.category, art.name}] = art.id;
        artifacts.push_back(std::move(art));
    }

    void add_image(ImageRecord rec) {
        image_index[rec.id] = images.size();
        images_by_artifact[rec.artifact_id].push_back(images.size());
        images.push_back(std::move(rec));
    }

    std::filesystem::path resolve(const std::string& uri) const {
        std::filesystem::path p(uri);
        if (p.is_relative() && root) return *root / p;
        return p;
    }

    /// Writes content into the store; returns the uri to record.
    std::string store(std::span<const std::uint8_t> bytes, const std::string& checksum) {
        const std::string name = checksum + extension_for(bytes);
        if (!root) {
            const std::string uri = "mem:" + name;
            memory_blobs.try_emplace(uri, bytes.begin(), bytes.end());
            return uri;
        }
        const std::string uri = "images/" + checksum.substr(0, 2) + "/" + name;
        const auto path = *root / uri;
        if (!std::filesystem::exists(path)) write_file_bytes(path, bytes);
        return uri;
    }

    std::vector<std::uint8_t> bytes_of(const std::string& uri) const {
        if (uri.starts_with("mem:")) {
            std::shared_lock lock(mirror_mutex);
            auto it = memory_blobs.find(uri);
            if (it == memory_blobs.end()) fail(ErrorCode::UnreadableImage, "missing blob " + uri);
            return it->second;
        }
        try {
            return read_file_bytes(resolve(uri));
        } catch (const Error&) {
            fail(ErrorCode::UnreadableImage, "cannot read " + uri);
        }
    }
};

Catalog::Catalog(std::unique_ptr<Impl> impl) : m_impl(std::move(impl)) {}
Catalog::Catalog(Catalog&&) noexcept = default;
Catalog& Catalog::operator=(Catalog&&) noexcept = default;
Catalog::~Catalog() = default;

Catalog Catalog::open(const std::filesystem::path& root, CatalogConfig config) {
    std::filesystem::create_directories(root);
    auto impl = std::make_unique<Impl>();
    impl->config = std::move(config);
    impl->root = std::filesystem::absolute(root);
    impl->db = Database::open(root / "catalog.db");
    impl->db->exec(kSchema);
    impl->load();
    return Catalog(std::move(impl));
}

Catalog Catalog::in_memory(CatalogConfig config) {
    auto impl = std::make_unique<Impl>();
    impl->config = std::move(config);
    impl->db = Database::in_memory();
    impl->db->exec(kSchema);
    return Catalog(std::move(impl));
}

const CatalogConfig& Catalog::config() const {
    return m_impl->config;
}

std::optional<std::string> Catalog::resolve_country(std::string_view country) const {
    const std::string key = lower(trim(country));
    for (const auto& c : m_impl->config.countries) {
        if (lower(c.code) == key || lower(c.name) == key) return c.code;
        for (const auto& alias : c.aliases)
            if (lower(alias) == key) return c.code;
    }
    return std::nullopt;
}

ArtifactId Catalog::register_artifact(std::string_view country, Category category, std::string_view name) {
    const auto code = resolve_country(country);
    if (!code) fail(ErrorCode::UnknownCountry, "'" + std::string(country) + "' is not a configured country");
    const std::string clean = trim(name);
    if (clean.empty()) fail(ErrorCode::EmptyName, "artifact name is empty");

    auto& impl = *m_impl;
    std::lock_guard writer(impl.db->writer());
    if (find_artifact(*code, category, clean))
        fail(ErrorCode::DuplicateArtifact, *code + "/" + std::string(to_string(category)) + "/" + clean);
    impl.db->prepare("INSERT INTO artifacts (country, category, name) VALUES (?, ?, ?)")
        .bind(1, *code)
        .bind(2, to_string(category))
        .bind(3, clean)
        .run();
    ArtifactId id(impl.db->last_insert_id());
    std::unique_lock lock(impl.mirror_mutex);
    impl.add_artifact({id, *code, category, clean, std::nullopt});
    return id;
}

std::optional<ArtifactId> Catalog::find_artifact(std::string_view country, Category category,
                                                 std::string_view name) const {
    const auto code = resolve_country(country);
    if (!code) return std::nullopt;
    std::shared_lock lock(m_impl->mirror_mutex);
    auto it = m_impl->by_triple.find({*code, category, trim(name)});
    if (it == m_impl->by_triple.end()) return std::nullopt;
    return it->second;
}

ImageId Catalog::register_image(ArtifactId artifact, ImageSource source, const std::filesystem::path& uri,
                                std::optional<std::string> model_id, std::optional<std::int64_t> seed,
                                std::optional<std::int64_t> prompt_id) {
    if (!this->artifact(artifact))
        fail(ErrorCode::MissingArtifact, "artifact " + std::to_string(artifact.value) + " is not registered");
    if (source == ImageSource::Generated && !model_id)
        fail(ErrorCode::MissingModelId, "generated image " + uri.string() + " has no model id");
    std::vector<std::uint8_t> bytes;
    try {
        bytes = read_file_bytes(m_impl->resolve(uri.string()));
    } catch (const Error&) {
        fail(ErrorCode::UnreadableImage, "cannot read " + uri.string());
    }
    return register_image_bytes(artifact, source, bytes, std::move(model_id), seed, prompt_id);
}

ImageId Catalog::register_image_bytes(ArtifactId artifact, ImageSource source, std::span<const std::uint8_t> bytes,
                                      std::optional<std::string> model_id, std::optional<std::int64_t> seed,
                                      std::optional<std::int64_t> prompt_id) {
    if (!this->artifact(artifact))
        fail(ErrorCode::MissingArtifact, "artifact " + std::to_string(artifact.value) + " is not registered");
    if (source == ImageSource::Generated && !model_id)
        fail(ErrorCode::MissingModelId, "generated image has no model id");
    if (source == ImageSource::Real) {
        model_id.reset();
        seed.reset();
    }
    const Image decoded = decode_image(bytes);
    const std::string checksum = sha256_hex(bytes);

    auto& impl = *m_impl;
    std::lock_guard writer(impl.db->writer());
    std::string stored;
    {
        std::unique_lock lock(impl.mirror_mutex);
        stored = impl.store(bytes, checksum);
    }
    impl.db
        ->prepare("INSERT INTO images (artifact_id, source, uri, checksum, model_id, seed, width, height, prompt_id) "
                  "VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?)")
        .bind(1, artifact.value)
        .bind(2, to_string(source))
        .bind(3, stored)
        .bind(4, checksum)
        .bind(5, model_id)
        .bind(6, seed)
        .bind(7, decoded.width)
        .bind(8, decoded.height)
        .bind(9, prompt_id)
        .run();
    ImageId id(impl.db->last_insert_id());
    std::unique_lock lock(impl.mirror_mutex);
    impl.add_image({id, artifact, source, stored, checksum, std::move(model_id), seed, decoded.width, decoded.height,
                    prompt_id});
    return id;
}

std::int64_t Catalog::upsert_prompt(ArtifactId artifact, std::string_view text, std::string_view template_version) {
    auto& impl = *m_impl;
    std::lock_guard writer(impl.db->writer());
    if (!this->artifact(artifact))
        fail(ErrorCode::MissingArtifact, "artifact " + std::to_string(artifact.value) + " is not registered");
    impl.db
        ->prepare("INSERT INTO prompts (artifact_id, text, template_version) VALUES (?, ?, ?) "
                  "ON CONFLICT(artifact_id) DO UPDATE SET text = excluded.text, "
                  "template_version = excluded.template_version")
        .bind(1, artifact.value)
        .bind(2, text)
        .bind(3, template_version)
        .run();
    auto q = impl.db->prepare("SELECT id FROM prompts WHERE artifact_id = ?");
    q.bind(1, artifact.value).step();
    const std::int64_t id = q.column_int(0);
    impl.db->prepare("UPDATE artifacts SET prompt_id = ? WHERE id = ?").bind(1, id).bind(2, artifact.value).run();

    std::unique_lock lock(impl.mirror_mutex);
    impl.artifacts[impl.artifact_index.at(artifact)].prompt_id = id;
    auto it = std::ranges::find_if(impl.prompts, [&](const PromptRecord& p) { return p.artifact_id == artifact; });
    if (it == impl.prompts.end())
        impl.prompts.push_back({id, artifact, std::string(text), std::string(template_version)});
    else
        *it = {id, artifact, std::string(text), std::string(template_version)};
    return id;
}

std::optional<PromptRecord> Catalog::prompt_for(ArtifactId artifact) const {
    std::shared_lock lock(m_impl->mirror_mutex);
    for (const auto& p : m_impl->prompts)
        if (p.artifact_id == artifact) return p;
    return std::nullopt;
}

std::vector<PromptRecord> Catalog::prompts() const {
    std::shared_lock lock(m_impl->mirror_mutex);
    return m_impl->prompts;
}

std::vector<Artifact> Catalog::artifacts() const {
    std::shared_lock lock(m_impl->mirror_mutex);
    return m_impl->artifacts;
}

std::optional<Artifact> Catalog::artifact(ArtifactId id) const {
    std::shared_lock lock(m_impl->mirror_mutex);
    auto it = m_impl->artifact_index.find(id);
    if (it == m_impl->artifact_index.end()) return std::nullopt;
    return m_impl->artifacts[it->second];
}

std::vector<ImageRecord> Catalog::images() const {
    std::shared_lock lock(m_impl->mirror_mutex);
    return m_impl->images;
}

std::vector<ImageRecord> Catalog::images_of(ArtifactId artifact) const {
    std::shared_lock lock(m_impl->mirror_mutex);
    std::vector<ImageRecord> out;
    auto it = m_impl->images_by_artifact.find(artifact);
    if (it == m_impl->images_by_artifact.end()) return out;
    for (std::size_t idx : it->second) out.push_back(m_impl->images[idx]);
    return out;
}

std::vector<ImageRecord> Catalog::images_of(ArtifactId artifact, ImageSource source) const {
    auto all = images_of(artifact);
    std::erase_if(all, [&](const ImageRecord& r) { return r.source != source; });
    return all;
}

std::optional<ImageRecord> Catalog::image(ImageId id) const {
    std::shared_lock lock(m_impl->mirror_mutex);
    auto it = m_impl->image_index.find(id);
    if (it == m_impl->image_index.end()) return std::nullopt;
    return m_impl->images[it->second];
}

std::vector<std::uint8_t> Catalog::load_bytes(ImageId id) const {
    const auto rec = image(id);
    if (!rec) fail(ErrorCode::UnreadableImage, "image " + std::to_string(id.value) + " is not registered");
    return m_impl->bytes_of(rec->uri);
}

Image Catalog::load(ImageId id) const {
    return decode_image(load_bytes(id));
}

std::filesystem::path Catalog::resolve(const std::string& uri) const {
    return m_impl->resolve(uri);
}

std::optional<std::filesystem::path> Catalog::root() const {
    return m_impl->root;
}

CatalogValidationReport Catalog::validate(const ValidationTargets& targets) const {
    CatalogValidationReport report;
    std::vector<std::string> countries = targets.countries;
    if (countries.empty())
        for (const auto& c : m_impl->config.countries) countries.push_back(c.code);
    for (auto& c : countries)
        if (auto code = resolve_country(c)) c = *code;

    const auto arts = artifacts();
    std::map<std::pair<std::string, Category>, std::vector<const Artifact*>> cells;
    for (const auto& a : arts) cells[{a.country, a.category}].push_back(&a);

    for (const auto& country : countries) {
        for (Category cat : targets.categories) {
            const auto& members = cells[{country, cat}];
            const int n = static_cast<int>(members.size());
            report.artifacts_per_cell[{country, cat}] = n;
            if (n != targets.artifacts_per_cell)
                report.violations.push_back({Violation::Kind::CellArtifactCount, country, cat, std::nullopt,
                                             std::nullopt, targets.artifacts_per_cell, n});
            for (const Artifact* a : members) {
                int real = 0;
                std::map<std::string, int> generated;
                for (const auto& img : images_of(a->id)) {
                    if (img.source == ImageSource::Real)
                        ++real;
                    else
                        ++generated[*img.model_id];
                }
                report.real_images[a->id] = real;
                if (real < targets.real_per_artifact)
                    report.violations.push_back({Violation::Kind::RealImageShortfall, country, cat, a->id,
                                                 std::nullopt, targets.real_per_artifact, real});
                for (const auto& model : targets.models) {
                    const int g = generated.contains(model) ? generated[model] : 0;
                    report.generated_images[{a->id, model}] = g;
                    if (g < 1)
                        report.violations.push_back(
                            {Violation::Kind::MissingGenerated, country, cat, a->id, model, 1, g});
                }
            }
        }
    }
    return report;
}

nlohmann::json Catalog::export_manifest() const {
    nlohmann::json out;
    auto& arts = out["artifacts"] = nlohmann::json::array();
    for (const auto& a : artifacts()) {
        nlohmann::json row{{"id", a.id.value},
                           {"country", a.country},
                           {"category", to_string(a.category)},
                           {"name", a.name},
                           {"prompt_id", nullptr}};
        if (a.prompt_id) row["prompt_id"] = *a.prompt_id;
        arts.push_back(std::move(row));
    }
    auto& imgs = out["images"] = nlohmann::json::array();
    for (const auto& i : images()) {
        nlohmann::json row{{"id", i.id.value},         {"artifact_id", i.artifact_id.value},
                           {"source", to_string(i.source)}, {"uri", i.uri},
                           {"checksum", i.checksum},    {"model_id", nullptr},
                           {"seed", nullptr},           {"width", i.width},
                           {"height", i.height}};
        if (i.model_id) row["model_id"] = *i.model_id;
        if (i.seed) row["seed"] = *i.seed;
        imgs.push_back(std::move(row));
    }
    return out;
}

void Catalog::import_manifest(const nlohmann::json& manifest, const std::filesystem::path& base_dir) {
    batch([&] {
        std::unordered_map<std::int64_t, ArtifactId> remap;
        for (const auto& a : manifest.at("artifacts")) {
            const auto category = parse_category(a.at("category").get<std::string>());
            const auto country = a.at("country").get<std::string>();
            const auto name = a.at("name").get<std::string>();
            ArtifactId id;
            if (auto existing = find_artifact(country, category, name))
                id = *existing;
            else
                id = register_artifact(country, category, name);
            remap[a.value("id", id.value)] = id;
        }
        if (!manifest.contains("images")) return;
        for (const auto& i : manifest.at("images")) {
            const auto old = i.at("artifact_id").get<std::int64_t>();
            auto it = remap.find(old);
            if (it == remap.end()) fail(ErrorCode::MissingArtifact, "image references artifact " + std::to_string(old));
            std::filesystem::path path = i.at("uri").get<std::string>();
            if (path.is_relative()) path = base_dir / path;
            std::optional<std::string> model;
            if (i.contains("model_id") && !i.at("model_id").is_null()) model = i.at("model_id").get<std::string>();
            std::optional<std::int64_t> seed;
            if (i.contains("seed") && !i.at("seed").is_null()) seed = i.at("seed").get<std::int64_t>();
            register_image(it->second, parse_source(i.at("source").get<std::string>()), path, model, seed);
        }
    });
}

void Catalog::batch(const std::function<void()>& fn) {
    try {
        m_impl->db->transaction(fn);
    } catch (...) {
        m_impl->reload();
        throw;
    }
}

Database& Catalog::database() const {
    return *m_impl->db;
}

std::shared_ptr<Database> Catalog::shared_database() const {
    return m_impl->db;
}

}  // namespace cultdiff
