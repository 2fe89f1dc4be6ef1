#pragma once

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "copyscope/image.hpp"

namespace copyscope {

inline constexpr int kPixelEmbeddingSide = 32;
inline constexpr const char* kBuiltinPixelTag = "builtin-pixel";

// n x d feature matrix, one row per image.
struct FeatureSet {
    Eigen::MatrixXd matrix;
    std::vector<std::string> labels;
    std::string source_tag = kBuiltinPixelTag;

    [[nodiscard]] Eigen::Index n() const noexcept { return matrix.rows(); }
    [[nodiscard]] Eigen::Index d() const noexcept { return matrix.cols(); }
};

struct GaussianStats {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    Eigen::Index n = 0;
};

struct FidOptions {
    // Diagonal loading is eps_scale * mean(trace) / d, applied only when a
    // covariance has an eigenvalue below that level.
    double eps_scale = 1e-6;
};

struct FidResult {
    double value = 0.0;
    double epsilon = 0.0; // diagonal loading actually applied (0 when none)
};

// Gray 32x32 thumbnail scaled to [0,1], flattened row-major (d = 1024).
Eigen::VectorXd embed_pixels(const Image& img);
FeatureSet embed_image_set(const ImageSet& set, unsigned threads = 1);

// Column means and unbiased (n-1) covariance, symmetrized.
GaussianStats fit_gaussian(const FeatureSet& features);

// Principal square root of a symmetric PSD matrix via eigendecomposition.
// Eigenvalues in [-tol, 0) are clamped to zero, tol = 1e-8 * sum|lambda| / d.
Eigen::MatrixXd matrix_sqrt_psd(const Eigen::MatrixXd& m);

FidResult fid_detailed(const GaussianStats& real, const GaussianStats& gen, const FidOptions& opts = {});
double fid(const GaussianStats& real, const GaussianStats& gen, const FidOptions& opts = {});

using FeatureInput = std::variant<ImageSet, FeatureSet>;

FidResult fid_between_sets(const FeatureInput& real, const FeatureInput& gen, const FidOptions& opts = {},
                           unsigned threads = 1);

// Interchange file: "CSF1", u32 n, u32 d, n*d float32 row-major (all little
// endian), then n newline-terminated UTF-8 labels.
FeatureSet read_feature_file(const std::filesystem::path& path);
void write_feature_file(const FeatureSet& features, const std::filesystem::path& path);

// CSV with header `label,f0,...,f{d-1}`.
FeatureSet read_feature_csv(const std::filesystem::path& path);

// Dispatches on the "CSF1" magic; anything else is parsed as CSV.
FeatureSet load_features(const std::filesystem::path& path);

} // namespace copyscope
