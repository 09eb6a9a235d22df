// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "cultdiff/db.hpp"
#include "cultdiff/image.hpp"
#include "cultdiff/types.hpp"

namespace cultdiff {

struct CountryInfo {
    std::string code;  // e.g. "KR"
    std::string name;  // e.g. "South Korea"
    std::vector<std::string> aliases;
};

/// The ten countries surveyed by default.
std::vector<CountryInfo> default_countries();

/// Default generator identifiers.
std::vector<std::string> default_models();

struct CatalogConfig {
    std::vector<CountryInfo> countries = default_countries();
};

struct Artifact {
    ArtifactId id;
    std::string country;  // country code
    Category category = Category::Architecture;
    std::string name;
    std::optional<std::int64_t> prompt_id;
};

struct ImageRecord {
    ImageId id;
    ArtifactId artifact_id;
    ImageSource source = ImageSource::Real;
    std::string uri;
    std::string checksum;
    std::optional<std::string> model_id;
    std::optional<std::int64_t> seed;
    int width = 0;
    int height = 0;
    std::optional<std::int64_t> prompt_id;
};

struct PromptRecord {
    std::int64_t id = 0;
    ArtifactId artifact_id;
    std::string text;
    std::string template_version;
};

struct ValidationTargets {
    int artifacts_per_cell = 50;
    int real_per_artifact = 5;
    std::vector<std::string> models = default_models();
    std::vector<std::string> countries;  // empty: every configured country
    std::vector<Category> categories{std::begin(kAllCategories), std::end(kAllCategories)};

    static ValidationTargets from_json(const nlohmann::json& j);
};

struct Violation {
    enum class Kind { CellArtifactCount, RealImageShortfall, MissingGenerated };
    Kind kind;
    std::string country;
    Category category;
    std::optional<ArtifactId> artifact;
    std::optional<std::string> model;
    int expected = 0;
    int actual = 0;

    std::string describe() const;
};

struct CatalogValidationReport {
    std::map<std::pair<std::string, Category>, int> artifacts_per_cell;
    std::map<ArtifactId, int> real_images;
    std::map<std::pair<ArtifactId, std::string>, int> generated_images;
    std::vector<Violation> violations;

    bool ok() const noexcept { return violations.empty(); }
    nlohmann::json to_json() const;
};

/// Registry of artifacts and images backed by one SQLite file plus a
/// content-addressed image directory. Single writer, many readers.
class Catalog {
public:
    /// Opens (or creates) `root/catalog.db`; images are stored under `root/images/`.
    static Catalog open(const std::filesystem::path& root, CatalogConfig config = {});
    /// Non-persistent catalog; image uris are kept as given.
    static Catalog in_memory(CatalogConfig config = {});

    Catalog(Catalog&&) noexcept;
    Catalog& operator=(Catalog&&) noexcept;
    ~Catalog();

    const CatalogConfig& config() const;
    /// Resolves a code, name or alias (case-insensitive) to a country code.
    std::optional<std::string> resolve_country(std::string_view country) const;

    ArtifactId register_artifact(std::string_view country, Category category, std::string_view name);
    std::optional<ArtifactId> find_artifact(std::string_view country, Category category,
                                            std::string_view name) const;

    ImageId register_image(ArtifactId artifact, ImageSource source, const std::filesystem::path& uri,
                           std::optional<std::string> model_id = std::nullopt,
                           std::optional<std::int64_t> seed = std::nullopt,
                           std::optional<std::int64_t> prompt_id = std::nullopt);
    /// Stores raw bytes in the content directory (or memory) and registers them.
    ImageId register_image_bytes(ArtifactId artifact, ImageSource source, std::span<const std::uint8_t> bytes,
                                 std::optional<std::string> model_id = std::nullopt,
                                 std::optional<std::int64_t> seed = std::nullopt,
                                 std::optional<std::int64_t> prompt_id = std::nullopt);

    std::int64_t upsert_prompt(ArtifactId artifact, std::string_view text, std::string_view template_version);
    std::optional<PromptRecord> prompt_for(ArtifactId artifact) const;
    std::vector<PromptRecord> prompts() const;

    std::vector<Artifact> artifacts() const;
    std::optional<Artifact> artifact(ArtifactId id) const;
    std::vector<ImageRecord> images() const;
    std::vector<ImageRecord> images_of(ArtifactId artifact) const;
    std::vector<ImageRecord> images_of(ArtifactId artifact, ImageSource source) const;
    std::optional<ImageRecord> image(ImageId id) const;

    /// Decodes a registered image. Throws Error(UnreadableImage).
    Image load(ImageId id) const;
    std::vector<std::uint8_t> load_bytes(ImageId id) const;
    std::filesystem::path resolve(const std::string& uri) const;
    std::optional<std::filesystem::path> root() const;

    CatalogValidationReport validate(const ValidationTargets& targets = {}) const;

    nlohmann::json export_manifest() const;
    /// Imports artifacts/images from a manifest; relative image paths resolve against base_dir.
    void import_manifest(const nlohmann::json& manifest, const std::filesystem::path& base_dir);

    /// Runs fn as one write transaction. On failure the transaction is rolled back and
    /// the in-memory view is reloaded from the store.
    void batch(const std::function<void()>& fn);

    Database& database() const;
    std::shared_ptr<Database> shared_database() const;

private:
    struct Impl;
    explicit Catalog(std::unique_ptr<Impl> impl);
    std::unique_ptr<Impl> m_impl;
};

}  // namespace cultdiff
