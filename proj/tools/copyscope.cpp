#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "copyscope/cli.hpp"
#include "copyscope/error.hpp"
#include "copyscope/version.hpp"

namespace fs = std::filesystem;
using namespace copyscope;

namespace {

struct Options {
    std::string manifest;
    std::string table;
    std::string method = "both";
    std::string norm = "share";
    std::string orientation = "lower";
    std::string baseline = "SDv1-5";
    std::string features;
    std::string out;
    std::uint64_t seed = 0;
    std::uint64_t perms = 10000;
    int resolution = kDefaultMetricResolution;
    double eps_scale = 1e-6;
    unsigned threads = 1;
    std::string real;
    std::string gen;
};

void add_common(CLI::App* cmd, Options& o) {
    cmd->add_option("--out", o.out, "Output directory (default: $COPYSCOPE_OUT_DIR, else stdout)");
    cmd->add_option("--threads", o.threads, "Worker threads")->check(CLI::Range(1u, 1024u));
}

void add_table_source(CLI::App* cmd, Options& o) {
    auto* manifest = cmd->add_option("--manifest", o.manifest, "Coalition manifest (JSON)");
    auto* table = cmd->add_option("--table", o.table, "Value table CSV (members,value)");
    manifest->excludes(table);
    cmd->add_option("--orientation", o.orientation, "Value-table orientation: lower|higher")
        ->check(CLI::IsMember({"lower", "higher"}));
    cmd->add_option("--baseline", o.baseline, "Label of the baseline (empty) coalition");
    cmd->add_option("--features", o.features, "Feature source for FID: builtin|external")
        ->check(CLI::IsMember({"builtin", "external"}));
    cmd->add_option("--eps-scale", o.eps_scale, "FID diagonal-loading scale");
}

void add_attribution(CLI::App* cmd, Options& o) {
    cmd->add_option("--method", o.method, "shapley|loo|both|sampled|all")
        ->check(CLI::IsMember({"shapley", "loo", "both", "sampled", "all"}));
    cmd->add_option("--norm", o.norm, "Normalization: share|minmax|none")->check(CLI::IsMember({"share", "minmax", "none"}));
    cmd->add_option("--seed", o.seed, "Seed for sampled Shapley");
    cmd->add_option("--perms", o.perms, "Permutations for sampled Shapley")->check(CLI::PositiveNumber);
}

RunConfig make_config(const Options& o) {
    RunConfig c;
    c.metric_resolution = o.resolution;
    c.fid_eps_scale = o.eps_scale;
    c.normalization = parse_normalization(o.norm);
    c.seed = o.seed;
    c.permutations = o.perms;
    c.orientation = parse_orientation(o.orientation);
    c.baseline_label = o.baseline;
    if (!o.features.empty()) c.feature_source = parse_feature_source(o.features);
    c.threads = o.threads;
    if (!o.out.empty()) {
        c.out_dir = o.out;
    } else if (const char* env = std::getenv("COPYSCOPE_OUT_DIR"); env && *env) {
        c.out_dir = env;
    }
    c.validate();
    return c;
}

ValueTable obtain_table(const Options& o, const RunConfig& config, std::string& source) {
    if (!o.table.empty()) {
        source = o.table;
        return load_value_table(o.table, config.orientation, config.baseline_label);
    }
    if (!o.manifest.empty()) {
        source = o.manifest;
        return fid_value_table(load_manifest(o.manifest), config);
    }
    fail(ErrorKind::Argument, "one of --table or --manifest is required");
}

void emit(const CommandOutput& out, const RunConfig& config, const std::string& stem) {
    if (config.out_dir.empty()) {
        std::cout << dump_json(out.json);
        return;
    }
    write_output(out, config.out_dir, stem);
    std::cerr << "wrote " << (config.out_dir / (stem + ".json")).string() << "\n";
}

int report_error(ErrorKind kind, const std::string& message) {
    const int code = exit_code_for(kind);
    nlohmann::json err = {{"error", {{"kind", std::string(to_string(kind))}, {"message", message}, {"exit_code", code}}}};
    std::cerr << err.dump() << "\n";
    return code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"copyscope: image-similarity metrics and coalition attribution for generation workflows"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    Options o;

    auto* metrics = app.add_subcommand("metrics", "Similarity metrics for every manifest coalition");
    metrics->add_option("--manifest", o.manifest, "Coalition manifest (JSON)")->required();
    metrics->add_option("--resolution", o.resolution, "Metric resolution (square side)");
    metrics->add_option("--features", o.features, "Feature source for FID: builtin|external")
        ->check(CLI::IsMember({"builtin", "external"}));
    metrics->add_option("--eps-scale", o.eps_scale, "FID diagonal-loading scale");
    add_common(metrics, o);

    auto* fid_cmd = app.add_subcommand("fid", "FID between two image directories or feature files");
    fid_cmd->add_option("real", o.real, "Reference image directory or feature file")->required();
    fid_cmd->add_option("gen", o.gen, "Generated image directory or feature file")->required();
    fid_cmd->add_option("--features", o.features, "builtin|external (default: by path type)")
        ->check(CLI::IsMember({"builtin", "external"}));
    fid_cmd->add_option("--eps-scale", o.eps_scale, "FID diagonal-loading scale");
    fid_cmd->add_option("--threads", o.threads, "Worker threads")->check(CLI::Range(1u, 1024u));

    auto* attribute = app.add_subcommand("attribute", "Shapley / leave-one-out attribution");
    add_table_source(attribute, o);
    add_attribution(attribute, o);
    add_common(attribute, o);

    auto* ablate_cmd = app.add_subcommand("ablate", "Dropout ablation over a value table");
    add_table_source(ablate_cmd, o);
    add_common(ablate_cmd, o);

    auto* report = app.add_subcommand("report", "Attribution and ablation in one report");
    add_table_source(report, o);
    add_attribution(report, o);
    add_common(report, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        const RunConfig config = make_config(o);
        std::string source;
        if (metrics->parsed()) {
            emit(cmd_metrics(load_manifest(o.manifest), config), config, "metrics");
        } else if (fid_cmd->parsed()) {
            const FidResult r = cmd_fid(o.real, o.gen, config);
            std::printf("%.6f\n", r.value);
        } else if (attribute->parsed()) {
            const ValueTable table = obtain_table(o, config, source);
            emit(cmd_attribute(table, parse_attribute_method(o.method), config, source), config, "attribution");
        } else if (ablate_cmd->parsed()) {
            const ValueTable table = obtain_table(o, config, source);
            emit(cmd_ablate(table, config, source), config, "ablation");
        } else if (report->parsed()) {
            const ValueTable table = obtain_table(o, config, source);
            emit(cmd_report(table, parse_attribute_method(o.method), config, source), config, "report");
        }
    } catch (const Error& e) {
        return report_error(e.kind(), e.what());
    } catch (const std::exception& e) {
        return report_error(ErrorKind::InternalConsistency, e.what());
    }
    return 0;
}
