#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "copyscope/ablation.hpp"
#include "copyscope/fid.hpp"
#include "copyscope/game.hpp"
#include "copyscope/metrics.hpp"

namespace copyscope {

enum class FeatureSource { BuiltinPixel, External };

std::string_view to_string(FeatureSource s) noexcept;
FeatureSource parse_feature_source(std::string_view s);

// Either side may be missing; which one is required depends on the command.
struct DataLocation {
    std::optional<std::filesystem::path> image_dir;
    std::optional<std::filesystem::path> feature_file;
};

struct CoalitionEntry {
    std::string label;
    Coalition members;
    DataLocation data;
};

// JSON manifest describing the players and one image directory (or feature
// file) per coalition. Relative paths resolve against the manifest's folder.
//
// Base-model replacement: a BaseModel player such as "SDMv10" means "swap the
// baseline base model for this one", so the baseline pipeline is the empty
// coalition and both base-model variants fit in one power set.
struct CoalitionManifest {
    std::vector<Player> players;
    std::string baseline_label = "baseline";
    std::vector<CoalitionEntry> coalitions;
    DataLocation original;
    FeatureSource feature_source = FeatureSource::BuiltinPixel;
};

CoalitionManifest parse_manifest(const nlohmann::json& doc, const std::filesystem::path& base_dir);
CoalitionManifest load_manifest(const std::filesystem::path& path);

enum class AttributeMethod { Shapley, Loo, Both, Sampled, All };
AttributeMethod parse_attribute_method(std::string_view s);
std::string_view to_string(AttributeMethod m) noexcept;

struct RunConfig {
    int metric_resolution = kDefaultMetricResolution;
    SsimParams ssim;
    double fid_eps_scale = 1e-6;
    Normalization normalization = Normalization::ShareOfTotal;
    std::uint64_t seed = 0;
    std::uint64_t permutations = 10000;
    Orientation orientation = Orientation::LowerIsBetter;
    std::string baseline_label = "baseline";
    std::optional<FeatureSource> feature_source; // overrides the manifest when set
    std::filesystem::path out_dir;
    // Execution detail only: results do not depend on it, so it is not
    // serialized into reports.
    unsigned threads = 1;

    void validate() const;
    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] MetricOptions metric_options() const;
    [[nodiscard]] FidOptions fid_options() const;
};

struct CommandOutput {
    nlohmann::json json;
    std::string csv;
};

// FID of every manifest coalition against the original set.
ValueTable fid_value_table(const CoalitionManifest& manifest, const RunConfig& config);

CommandOutput cmd_metrics(const CoalitionManifest& manifest, const RunConfig& config);
FidResult cmd_fid(const std::filesystem::path& real, const std::filesystem::path& gen, const RunConfig& config);
CommandOutput cmd_attribute(const ValueTable& table, AttributeMethod method, const RunConfig& config,
                            const std::string& source = "");
CommandOutput cmd_ablate(const ValueTable& table, const RunConfig& config, const std::string& source = "");
CommandOutput cmd_report(const ValueTable& table, AttributeMethod method, const RunConfig& config,
                         const std::string& source = "");

nlohmann::json to_json(const AttributionResult& r);
nlohmann::json to_json(const AxiomReport& r);
nlohmann::json to_json(const AblationReport& r);
nlohmann::json to_json(const MetricReport& r);

// Writes <dir>/<stem>.json (pretty, trailing newline) and <dir>/<stem>.csv.
void write_output(const CommandOutput& out, const std::filesystem::path& dir, const std::string& stem);

std::string dump_json(const nlohmann::json& j);

} // namespace copyscope
