#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <nlohmann/json.hpp>

#include "copyscope/error.hpp"
#include "copyscope/fid.hpp"

namespace copyscope {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'C', 'S', 'F', '1'};

std::uint32_t read_u32_le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void write_u32_le(std::ostream& out, std::uint32_t v) {
    const char bytes[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                           static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
    out.write(bytes, 4);
}

std::string read_all(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open feature file: " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// The exporter writes `<file>.meta.json` naming the backbone; fall back to a
// generic external tag when it is absent.
std::string external_tag(const fs::path& path) {
    const fs::path sidecar = path.string() + ".meta.json";
    std::ifstream in(sidecar);
    if (in) {
        try {
            const auto meta = nlohmann::json::parse(in);
            for (const char* key : {"backbone", "model", "backbone_name"}) {
                if (meta.contains(key) && meta[key].is_string()) return "external:" + meta[key].get<std::string>();
            }
        } catch (const nlohmann::json::exception&) {
            fail(ErrorKind::Schema, "malformed feature sidecar: " + sidecar.string());
        }
    }
    return "external:unknown";
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, sep)) out.push_back(field);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

} // namespace

FeatureSet read_feature_file(const fs::path& path) {
    const std::string bytes = read_all(path);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        fail(ErrorKind::Schema, "not a CSF1 feature file: " + path.string());
    }
    const std::uint32_t n = read_u32_le(p + 4);
    const std::uint32_t d = read_u32_le(p + 8);
    if (d == 0) fail(ErrorKind::Schema, "feature dimension must be >= 1 in " + path.string());
    const std::size_t payload = static_cast<std::size_t>(n) * d * 4;
    if (bytes.size() < 12 + payload) fail(ErrorKind::Schema, "truncated feature matrix in " + path.string());

    FeatureSet fs;
    fs.matrix.resize(n, d);
    const unsigned char* cursor = p + 12;
    for (std::uint32_t i = 0; i < n; ++i) {
        for (std::uint32_t j = 0; j < d; ++j, cursor += 4) {
            const float v = std::bit_cast<float>(read_u32_le(cursor));
            if (!std::isfinite(v)) fail(ErrorKind::Numeric, "non-finite feature value in " + path.string());
            fs.matrix(i, j) = static_cast<double>(v);
        }
    }

    std::string tail = bytes.substr(12 + payload);
    if (!tail.empty() && tail.back() == '\n') tail.pop_back();
    if (n > 0) fs.labels = split(tail, '\n');
    else if (!tail.empty()) fail(ErrorKind::Schema, "labels present for an empty feature file " + path.string());
    if (fs.labels.size() != n) {
        fail(ErrorKind::Schema, "expected " + std::to_string(n) + " labels, found " +
                                    std::to_string(fs.labels.size()) + " in " + path.string());
    }
    fs.source_tag = external_tag(path);
    return fs;
}

void write_feature_file(const FeatureSet& features, const fs::path& path) {
    if (static_cast<std::size_t>(features.n()) != features.labels.size()) {
        fail(ErrorKind::Argument, "label count must equal the number of feature rows");
    }
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorKind::Io, "cannot create feature file: " + path.string());
        out.write(kMagic, 4);
        write_u32_le(out, static_cast<std::uint32_t>(features.n()));
        write_u32_le(out, static_cast<std::uint32_t>(features.d()));
        for (Eigen::Index i = 0; i < features.n(); ++i) {
            for (Eigen::Index j = 0; j < features.d(); ++j) {
                write_u32_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(features.matrix(i, j))));
            }
        }
        for (const auto& label : features.labels) out << label << '\n';
        if (!out) fail(ErrorKind::Io, "failed writing feature file: " + path.string());
    }
    fs::rename(tmp, path);
}

FeatureSet read_feature_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open feature CSV: " + path.string());
    std::string line;
    if (!std::getline(in, line)) fail(ErrorKind::Schema, "empty feature CSV: " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split(line, ',');
    if (header.size() < 2 || header[0] != "label") {
        fail(ErrorKind::Schema, "feature CSV header must be label,f0,...: " + path.string());
    }
    const std::size_t d = header.size() - 1;
    for (std::size_t j = 0; j < d; ++j) {
        if (header[j + 1] != "f" + std::to_string(j)) {
            fail(ErrorKind::Schema, "unexpected feature CSV column '" + header[j + 1] + "' in " + path.string());
        }
    }

    std::vector<std::vector<double>> rows;
    std::vector<std::string> labels;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split(line, ',');
        if (fields.size() != d + 1) {
            fail(ErrorKind::Schema, "feature CSV row has " + std::to_string(fields.size()) + " fields, expected " +
                                        std::to_string(d + 1) + " in " + path.string());
        }
        std::vector<double> row(d);
        for (std::size_t j = 0; j < d; ++j) {
            const char* s = fields[j + 1].c_str();
            char* end = nullptr;
            row[j] = std::strtod(s, &end);
            if (end == s || *end != '\0') fail(ErrorKind::Schema, "bad number '" + fields[j + 1] + "' in " + path.string());
            if (!std::isfinite(row[j])) fail(ErrorKind::Numeric, "non-finite feature value in " + path.string());
        }
        labels.push_back(fields[0]);
        rows.push_back(std::move(row));
    }

    FeatureSet fs;
    fs.matrix.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < d; ++j) fs.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    fs.labels = std::move(labels);
    fs.source_tag = external_tag(path);
    return fs;
}

FeatureSet load_features(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open feature file: " + path.string());
    char magic[4] = {};
    in.read(magic, 4);
    if (in.gcount() == 4 && std::memcmp(magic, kMagic, 4) == 0) return read_feature_file(path);
    return read_feature_csv(path);
}

} // namespace copyscope
