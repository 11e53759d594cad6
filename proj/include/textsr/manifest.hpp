#ifndef TEXTSR_MANIFEST_HPP
#define TEXTSR_MANIFEST_HPP

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "atlas.hpp"
#include "degrade.hpp"

namespace textsr {

// One JSONL record per sample. Paths are relative to the manifest directory.
struct ManifestRecord {
    std::string id;
    std::string hq_path;
    std::string lq_path;  // empty until degradation ran
    std::string transcript;
    Group group = Group::EnglishProxy;
    int64_t height = 0, width = 0;  // HQ dims
    std::optional<DegradationRecipe> recipe;
};

namespace detail {

inline nlohmann::json recipe_to_json(const DegradationRecipe& r) {
    nlohmann::json j;
    j["blur_sigma"] = r.blur_sigma;
    j["downscale_factor"] = r.downscale_factor;
    j["resample_kind"] = to_string(r.resample_kind);
    j["noise_sigma"] = r.noise_sigma;
    if (r.compression_quality)
        j["compression_quality"] = *r.compression_quality;
    else
        j["compression_quality"] = nullptr;
    j["seed"] = r.seed;
    return j;
}

inline DegradationRecipe recipe_from_json(const nlohmann::json& j) {
    DegradationRecipe r;
    r.blur_sigma = j.at("blur_sigma").get<float>();
    r.downscale_factor = j.at("downscale_factor").get<int>();
    r.resample_kind = resample_from_string(j.at("resample_kind").get<std::string>());
    r.noise_sigma = j.at("noise_sigma").get<float>();
    if (!j.at("compression_quality").is_null())
        r.compression_quality = j.at("compression_quality").get<int>();
    r.seed = j.at("seed").get<uint64_t>();
    return r;
}

}  // namespace detail

inline void write_manifest(const std::vector<ManifestRecord>& records, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write manifest to " + path);
    for (const auto& r : records) {
        nlohmann::json j;
        j["id"] = r.id;
        j["hq_path"] = r.hq_path;
        j["lq_path"] = r.lq_path;
        j["transcript"] = r.transcript;
        j["group"] = to_string(r.group);
        j["height"] = r.height;
        j["width"] = r.width;
        j["recipe"] = r.recipe ? detail::recipe_to_json(*r.recipe) : nlohmann::json(nullptr);
        f << j.dump() << "\n";
    }
}

inline std::vector<ManifestRecord> read_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot read manifest from " + path);
    std::vector<ManifestRecord> out;
    std::string line;
    int64_t lineno = 0;
    while (std::getline(f, line)) {
        lineno++;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
            ManifestRecord r;
            r.id = j.at("id").get<std::string>();
            r.hq_path = j.at("hq_path").get<std::string>();
            r.lq_path = j.at("lq_path").get<std::string>();
            r.transcript = j.at("transcript").get<std::string>();
            r.group = group_from_string(j.at("group").get<std::string>());
            r.height = j.at("height").get<int64_t>();
            r.width = j.at("width").get<int64_t>();
            if (!j.at("recipe").is_null()) r.recipe = detail::recipe_from_json(j.at("recipe"));
            out.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("manifest " + path + " line " + std::to_string(lineno) + ": " +
                             e.what());
        }
    }
    return out;
}

// Resolves a manifest-relative path against the manifest location.
inline std::string resolve_path(const std::string& manifest_path, const std::string& rel) {
    std::filesystem::path p(rel);
    if (p.is_absolute()) return rel;
    return (std::filesystem::path(manifest_path).parent_path() / p).string();
}

}  // namespace textsr

#endif  // TEXTSR_MANIFEST_HPP
