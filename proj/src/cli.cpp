#include "copyscope/cli.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "copyscope/error.hpp"
#include "copyscope/version.hpp"

namespace copyscope {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(FeatureSource s) noexcept {
    return s == FeatureSource::BuiltinPixel ? "BuiltinPixel" : "External";
}

FeatureSource parse_feature_source(std::string_view s) {
    if (s == "BuiltinPixel" || s == "builtin") return FeatureSource::BuiltinPixel;
    if (s == "External" || s == "external") return FeatureSource::External;
    fail(ErrorKind::Argument, "unknown feature source '" + std::string(s) + "'");
}

AttributeMethod parse_attribute_method(std::string_view s) {
    if (s == "shapley") return AttributeMethod::Shapley;
    if (s == "loo") return AttributeMethod::Loo;
    if (s == "both") return AttributeMethod::Both;
    if (s == "sampled") return AttributeMethod::Sampled;
    if (s == "all") return AttributeMethod::All;
    fail(ErrorKind::Argument, "unknown attribution method '" + std::string(s) + "'");
}

std::string_view to_string(AttributeMethod m) noexcept {
    switch (m) {
        case AttributeMethod::Shapley: return "shapley";
        case AttributeMethod::Loo: return "loo";
        case AttributeMethod::Both: return "both";
        case AttributeMethod::Sampled: return "sampled";
        case AttributeMethod::All: return "all";
    }
    return "";
}

namespace {

std::optional<fs::path> optional_path(const json& obj, const char* key, const fs::path& base) {
    if (!obj.contains(key) || obj[key].is_null()) return std::nullopt;
    if (!obj[key].is_string()) fail(ErrorKind::Schema, std::string("manifest field '") + key + "' must be a string");
    fs::path p = obj[key].get<std::string>();
    return p.is_absolute() ? p : base / p;
}

DataLocation parse_location(const json& obj, const fs::path& base) {
    return {optional_path(obj, "image_dir", base), optional_path(obj, "feature_file", base)};
}

Coalition parse_members(const json& m) {
    if (m.is_string()) return Coalition::parse(m.get<std::string>());
    if (!m.is_array()) fail(ErrorKind::Schema, "coalition members must be an array of ids or a ';'-joined string");
    std::vector<std::string> ids;
    for (const auto& id : m) {
        if (!id.is_string()) fail(ErrorKind::Schema, "coalition member ids must be strings");
        ids.push_back(id.get<std::string>());
    }
    return Coalition(std::move(ids));
}

std::string fmt_num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

json header(const std::string& command, const RunConfig& config) {
    return {{"tool", "copyscope"}, {"version", kVersion}, {"command", command}, {"config", config.to_json()}};
}

json table_json(const ValueTable& table, const std::string& source) {
    json players = json::array();
    for (const auto& p : table.players()) {
        players.push_back({{"id", p.id}, {"kind", p.kind ? json(std::string(to_string(*p.kind))) : json(nullptr)}});
    }
    json j = {{"source", source},
              {"players", players},
              {"orientation", std::string(to_string(table.orientation()))},
              {"baseline_label", table.baseline_label()},
              {"coalitions", table.entry_count()}};
    if (table.contains(0)) j["baseline_raw"] = table.raw(0);
    if (table.contains(table.grand())) j["grand_raw"] = table.raw(table.grand());
    if (table.contains(0) && table.contains(table.grand())) j["grand_utility"] = table.utility(table.grand());
    return j;
}

FeatureSource effective_source(const CoalitionManifest& manifest, const RunConfig& config) {
    return config.feature_source.value_or(manifest.feature_source);
}

FeatureInput load_input(const DataLocation& loc, FeatureSource source, const std::string& label, unsigned threads) {
    if (source == FeatureSource::External) {
        if (!loc.feature_file) {
            fail(ErrorKind::Configuration, "coalition '" + label + "' has no feature_file for external features");
        }
        return load_features(*loc.feature_file);
    }
    if (!loc.image_dir) fail(ErrorKind::Configuration, "coalition '" + label + "' has no image_dir");
    try {
        return load_image_set(*loc.image_dir, threads);
    } catch (const Error& e) {
        throw Error(e.kind(), "coalition '" + label + "': " + e.what());
    }
}

// Embeds image inputs once so a reference set reused across coalitions is not
// re-embedded each time.
FeatureInput embedded(FeatureInput input, unsigned threads) {
    if (const auto* set = std::get_if<ImageSet>(&input)) return embed_image_set(*set, threads);
    return input;
}

ImageSet load_images_for(const DataLocation& loc, const std::string& label, unsigned threads) {
    if (!loc.image_dir) fail(ErrorKind::Dataset, "coalition '" + label + "' has no image_dir");
    try {
        return load_image_set(*loc.image_dir, threads);
    } catch (const Error& e) {
        throw Error(e.kind(), "coalition '" + label + "': " + e.what());
    }
}

} // namespace

CoalitionManifest parse_manifest(const json& doc, const fs::path& base_dir) {
    if (!doc.is_object()) fail(ErrorKind::Schema, "manifest must be a JSON object");
    CoalitionManifest m;
    try {
        if (doc.contains("baseline_label")) m.baseline_label = doc.at("baseline_label").get<std::string>();
        if (doc.contains("feature_source")) {
            m.feature_source = parse_feature_source(doc.at("feature_source").get<std::string>());
        }
        std::set<std::string> ids;
        for (const auto& p : doc.at("players")) {
            Player player{p.at("id").get<std::string>(), std::nullopt};
            if (p.contains("kind")) player.kind = parse_component_kind(p.at("kind").get<std::string>());
            if (!ids.insert(player.id).second) fail(ErrorKind::Schema, "duplicate player id '" + player.id + "'");
            m.players.push_back(std::move(player));
        }
        m.original = parse_location(doc.at("original"), base_dir);

        std::set<std::string> labels;
        std::set<Coalition> member_sets;
        bool has_baseline = false;
        for (const auto& c : doc.at("coalitions")) {
            CoalitionEntry entry;
            entry.members = parse_members(c.at("members"));
            entry.label = c.contains("label") ? c.at("label").get<std::string>()
                                              : (entry.members.empty() ? m.baseline_label : entry.members.joined());
            entry.data = parse_location(c, base_dir);
            for (const auto& id : entry.members.members()) {
                if (!ids.count(id)) {
                    fail(ErrorKind::Schema, "coalition '" + entry.label + "' references unknown player '" + id + "'");
                }
            }
            if (!labels.insert(entry.label).second) fail(ErrorKind::Schema, "duplicate coalition label '" + entry.label + "'");
            if (!member_sets.insert(entry.members).second) {
                fail(ErrorKind::Schema, "coalition {" + entry.members.joined() + "} listed twice");
            }
            has_baseline = has_baseline || entry.members.empty();
            m.coalitions.push_back(std::move(entry));
        }
        if (!has_baseline) fail(ErrorKind::Schema, "manifest has no baseline coalition (empty members)");
    } catch (const json::exception& e) {
        fail(ErrorKind::Schema, std::string("malformed manifest: ") + e.what());
    }
    return m;
}

CoalitionManifest load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open manifest: " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorKind::Schema, "manifest " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_manifest(doc, path.parent_path());
}

void RunConfig::validate() const {
    if (metric_resolution < 8 || metric_resolution > 4096) {
        fail(ErrorKind::Argument, "metric resolution must lie in [8, 4096]");
    }
    ssim.validate();
    if (!(fid_eps_scale >= 0.0) || fid_eps_scale > 1e-2) fail(ErrorKind::Argument, "FID epsilon scale must lie in [0, 1e-2]");
    if (permutations < 1) fail(ErrorKind::Argument, "permutation count must be >= 1");
    if (threads < 1) fail(ErrorKind::Argument, "thread count must be >= 1");
}

json RunConfig::to_json() const {
    return {{"metric_resolution", metric_resolution},
            {"ssim",
             {{"k1", ssim.k1}, {"k2", ssim.k2}, {"dynamic_range", ssim.dynamic_range}, {"window", ssim.window},
              {"sigma", ssim.sigma}}},
            {"fid_eps_scale", fid_eps_scale},
            {"normalization", std::string(to_string(normalization))},
            {"seed", seed},
            {"permutations", permutations},
            {"orientation", std::string(to_string(orientation))},
            {"baseline_label", baseline_label},
            {"feature_source", feature_source ? json(std::string(to_string(*feature_source))) : json(nullptr)},
            {"out_dir", out_dir.string()}};
}

MetricOptions RunConfig::metric_options() const {
    MetricOptions o;
    o.resolution = metric_resolution;
    o.ssim = ssim;
    return o;
}

FidOptions RunConfig::fid_options() const { return FidOptions{fid_eps_scale}; }

json to_json(const AttributionResult& r) {
    json values = json::object();
    json normalized = json::object();
    for (std::size_t i = 0; i < r.players.size(); ++i) {
        values[r.players[i]] = r.values[i];
        if (!r.normalized.empty()) normalized[r.players[i]] = r.normalized[i];
    }
    json j = {{"method", std::string(to_string(r.method))},
              {"orientation", std::string(to_string(r.orientation))},
              {"values", values},
              {"sum", r.total()},
              {"ranking", r.ranking},
              {"normalized", normalized},
              {"normalization",
               {{"mode", std::string(to_string(r.normalization))},
                {"fallback_to_minmax", r.normalization_fallback},
                {"degenerate", r.normalization_degenerate}}}};
    if (!r.std_error.empty()) {
        json se = json::object();
        for (std::size_t i = 0; i < r.players.size(); ++i) se[r.players[i]] = r.std_error[i];
        j["std_error"] = se;
    }
    if (r.seed) j["seed"] = *r.seed;
    if (r.permutations) j["permutations"] = *r.permutations;
    return j;
}

json to_json(const AxiomReport& r) {
    json pairs = json::array();
    for (const auto& [a, b] : r.symmetric_pairs) pairs.push_back({a, b});
    return {{"efficiency",
             {{"holds", r.efficiency},
              {"value_sum", r.value_sum},
              {"grand_utility", r.grand_utility},
              {"tolerance", r.efficiency_tolerance}}},
            {"null_player", {{"holds", r.null_player}, {"detected", r.null_players}}},
            {"symmetry", {{"holds", r.symmetry}, {"detected_pairs", pairs}}},
            {"additivity",
             r.additivity ? json{{"holds", *r.additivity}, {"max_error", r.additivity_max_error}}
                          : json{{"holds", nullptr}, {"checked", false}}}};
}

json to_json(const AblationReport& r) {
    json entries = json::array();
    for (const auto& e : r.entries) {
        entries.push_back({{"player", e.player},
                           {"mean_raw_without", e.mean_raw_without},
                           {"deviation", e.deviation},
                           {"coalitions", e.coalitions}});
    }
    return {{"grand_raw", r.grand_raw}, {"baseline_excluded", r.baseline_excluded}, {"entries", entries}};
}

json to_json(const MetricReport& r) {
    return {{"coalition", r.coalition_label}, {"cosine", r.cosine}, {"hist", r.hist},  {"dhash", r.dhash},
            {"ssim", r.ssim},                 {"rgb_ssim", r.rgb_ssim}, {"fid", r.fid}, {"pairs", r.pairs},
            {"ssim_window", r.ssim_window}};
}

ValueTable fid_value_table(const CoalitionManifest& manifest, const RunConfig& config) {
    const FeatureSource source = effective_source(manifest, config);
    const FeatureInput original =
        embedded(load_input(manifest.original, source, "original", config.threads), config.threads);
    ValueTable table(manifest.players, Orientation::LowerIsBetter, manifest.baseline_label);
    for (const auto& entry : manifest.coalitions) {
        const FeatureInput gen = load_input(entry.data, source, entry.label, config.threads);
        table.set(entry.members, fid_between_sets(original, gen, config.fid_options(), config.threads).value);
    }
    table.require_complete();
    return table;
}

CommandOutput cmd_metrics(const CoalitionManifest& manifest, const RunConfig& config) {
    config.validate();
    const FeatureSource source = effective_source(manifest, config);
    const ImageSet original = load_images_for(manifest.original, "original", config.threads);
    const FeatureInput original_features =
        source == FeatureSource::External ? load_input(manifest.original, source, "original", config.threads)
                                          : FeatureInput{embed_image_set(original, config.threads)};

    CommandOutput out;
    out.json = header("metrics", config);
    out.json["feature_source"] = std::string(to_string(source));
    out.json["directions"] = {{"cosine", "higher"}, {"hist", "higher"}, {"dhash", "higher"},
                              {"ssim", "higher"},   {"rgb_ssim", "higher"}, {"fid", "lower"}};
    out.json["notes"] = {"rgb_ssim is the mean of SSIM over the R, G and B channels",
                         "scores average every (generated, original) image pair",
                         "cosine, hist, ssim and rgb_ssim compare images resized to metric_resolution squared"};
    json rows = json::array();
    std::ostringstream csv;
    csv << "coalition,members,Cosine↑,Hist↑,DHash↑,SSIM↑,RGB-SSIM↑,FID↓\n";
    for (const auto& entry : manifest.coalitions) {
        const ImageSet gen = load_images_for(entry.data, entry.label, config.threads);
        const FeatureInput gen_features =
            source == FeatureSource::External ? load_input(entry.data, source, entry.label, config.threads)
                                              : FeatureInput{gen};
        const FidResult f = fid_between_sets(original_features, gen_features, config.fid_options(), config.threads);
        MetricReport rep = metric_report(gen, original, f.value, config.metric_options(), config.threads);
        rep.coalition_label = entry.label;
        json row = to_json(rep);
        row["members"] = entry.members.members();
        row["fid_epsilon"] = f.epsilon;
        rows.push_back(row);
        csv << csv_quote(entry.label) << ',' << csv_quote(entry.members.joined()) << ',' << fmt_num(rep.cosine) << ','
            << fmt_num(rep.hist) << ',' << fmt_num(rep.dhash) << ',' << fmt_num(rep.ssim) << ','
            << fmt_num(rep.rgb_ssim) << ',' << fmt_num(rep.fid) << '\n';
    }
    out.json["rows"] = rows;
    out.csv = csv.str();
    return out;
}

FidResult cmd_fid(const fs::path& real, const fs::path& gen, const RunConfig& config) {
    config.validate();
    auto resolve = [&](const fs::path& p) -> FeatureInput {
        const bool is_dir = fs::is_directory(p);
        const FeatureSource src =
            config.feature_source.value_or(is_dir ? FeatureSource::BuiltinPixel : FeatureSource::External);
        if (src == FeatureSource::BuiltinPixel) {
            if (!is_dir) fail(ErrorKind::Configuration, "builtin features need an image directory: " + p.string());
            return load_image_set(p, config.threads);
        }
        if (is_dir) fail(ErrorKind::Configuration, "external features need a feature file: " + p.string());
        return load_features(p);
    };
    return fid_between_sets(resolve(real), resolve(gen), config.fid_options(), config.threads);
}

namespace {

std::vector<AttributionResult> run_methods(const ValueTable& table, AttributeMethod method, const RunConfig& config) {
    std::vector<AttributionResult> results;
    const bool exact = method == AttributeMethod::Shapley || method == AttributeMethod::Both || method == AttributeMethod::All;
    const bool sampled = method == AttributeMethod::Sampled || method == AttributeMethod::All;
    const bool leave_one_out = method == AttributeMethod::Loo || method == AttributeMethod::Both || method == AttributeMethod::All;
    if (exact) results.push_back(normalize(shapley_exact(table), config.normalization));
    if (sampled) {
        results.push_back(
            normalize(shapley_sampled(table, config.permutations, config.seed, config.threads), config.normalization));
    }
    if (leave_one_out) results.push_back(normalize(loo(table), config.normalization));
    return results;
}

json attribution_json(const ValueTable& table, const std::vector<AttributionResult>& results, std::string& csv_out) {
    json j = json::object();
    json arr = json::array();
    std::ostringstream csv;
    csv << "method,player,value,normalized,rank,std_error\n";
    for (const auto& r : results) {
        json rj = to_json(r);
        if (r.method == Method::ShapleyExact) {
            const auto axioms = check_axioms(table, r);
            rj["axioms"] = to_json(axioms);
            if (!axioms.efficiency) {
                fail(ErrorKind::InternalConsistency, "efficiency violated: sum of Shapley values " +
                                                         fmt_num(axioms.value_sum) + " vs grand utility " +
                                                         fmt_num(axioms.grand_utility));
            }
        }
        arr.push_back(rj);
        for (std::size_t rank = 0; rank < r.ranking.size(); ++rank) {
            const auto& id = r.ranking[rank];
            std::size_t i = 0;
            while (r.players[i] != id) ++i;
            csv << to_string(r.method) << ',' << csv_quote(id) << ',' << fmt_num(r.values[i]) << ','
                << (r.normalized.empty() ? "" : fmt_num(r.normalized[i])) << ',' << rank + 1 << ','
                << (r.std_error.empty() ? "" : fmt_num(r.std_error[i])) << '\n';
        }
    }
    j["results"] = arr;
    csv_out = csv.str();
    return j;
}

std::string ablation_csv(const AblationReport& rep) {
    std::ostringstream csv;
    csv << "player,mean_raw_without,grand_raw,deviation,coalitions\n";
    for (const auto& e : rep.entries) {
        csv << csv_quote(e.player) << ',' << fmt_num(e.mean_raw_without) << ',' << fmt_num(rep.grand_raw) << ','
            << fmt_num(e.deviation) << ',' << e.coalitions << '\n';
    }
    return csv.str();
}

} // namespace

CommandOutput cmd_attribute(const ValueTable& table, AttributeMethod method, const RunConfig& config,
                            const std::string& source) {
    config.validate();
    table.require_complete();
    CommandOutput out;
    out.json = header("attribute", config);
    out.json["table"] = table_json(table, source);
    out.json["method"] = std::string(to_string(method));
    const auto results = run_methods(table, method, config);
    out.json.update(attribution_json(table, results, out.csv));
    return out;
}

CommandOutput cmd_ablate(const ValueTable& table, const RunConfig& config, const std::string& source) {
    config.validate();
    const auto rep = ablate(table);
    CommandOutput out;
    out.json = header("ablate", config);
    out.json["table"] = table_json(table, source);
    out.json["ablation"] = to_json(rep);
    out.json["notes"] = {"means average raw scores over nonempty coalitions; the baseline (empty) coalition is excluded"};
    out.csv = ablation_csv(rep);
    return out;
}

CommandOutput cmd_report(const ValueTable& table, AttributeMethod method, const RunConfig& config,
                         const std::string& source) {
    config.validate();
    table.require_complete();
    CommandOutput out;
    out.json = header("report", config);
    out.json["table"] = table_json(table, source);
    out.json["method"] = std::string(to_string(method));
    std::string attribution_csv;
    out.json.update(attribution_json(table, run_methods(table, method, config), attribution_csv));
    const auto rep = ablate(table);
    out.json["ablation"] = to_json(rep);
    out.csv = attribution_csv + "\n" + ablation_csv(rep);
    return out;
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

void write_output(const CommandOutput& out, const fs::path& dir, const std::string& stem) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(ErrorKind::Io, "cannot create output directory " + dir.string() + ": " + ec.message());
    auto write = [](const fs::path& p, const std::string& body) {
        std::ofstream f(p, std::ios::binary | std::ios::trunc);
        if (!f) fail(ErrorKind::Io, "cannot write " + p.string());
        f << body;
    };
    write(dir / (stem + ".json"), dump_json(out.json));
    if (!out.csv.empty()) write(dir / (stem + ".csv"), out.csv);
}

} // namespace copyscope
