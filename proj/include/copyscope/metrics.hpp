#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "copyscope/image.hpp"

namespace copyscope {

inline constexpr int kDefaultMetricResolution = 256;

struct SsimParams {
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 255.0;
    int window = 11;
    double sigma = 1.5;

    [[nodiscard]] double c1() const noexcept { return (k1 * dynamic_range) * (k1 * dynamic_range); }
    [[nodiscard]] double c2() const noexcept { return (k2 * dynamic_range) * (k2 * dynamic_range); }

    // Throws Argument unless k1, k2, L, sigma > 0 and window is odd and >= 3.
    void validate() const;
};

// Images are compared at resolution x resolution. nullopt compares at native
// size; if the two sizes differ, the second image is resized to the first.
struct MetricOptions {
    std::optional<int> resolution = kDefaultMetricResolution;
    SsimParams ssim;
};

struct SsimResult {
    double score;
    int window; // window side actually used, after any shrink to fit the image
};

double cosine_similarity(const Image& a, const Image& b, const MetricOptions& opts = {});

std::uint64_t dhash(const Image& img);
double dhash_similarity(const Image& a, const Image& b);

double hist_similarity(const Image& a, const Image& b, const MetricOptions& opts = {});

// Gaussian-windowed SSIM over gray versions of a and b.
SsimResult ssim_detailed(const Image& a, const Image& b, const MetricOptions& opts = {});
double ssim(const Image& a, const Image& b, const MetricOptions& opts = {});

// Mean of per-channel SSIM over R, G, B.
double rgb_ssim(const Image& a, const Image& b, const MetricOptions& opts = {});

// SSIM between two same-size single-channel images, no resizing.
SsimResult ssim_plane(const Image& a, const Image& b, const SsimParams& p);

struct MetricReport {
    std::string coalition_label;
    double cosine = 0.0;
    double hist = 0.0;
    double dhash = 0.0;
    double ssim = 0.0;
    double rgb_ssim = 0.0;
    double fid = 0.0;
    std::size_t pairs = 0;
    int ssim_window = 0;
};

// Mean of each similarity metric over all (generated_i, original_j) pairs.
// Pair scores are reduced in fixed index order, so the result does not depend
// on `threads`.
MetricReport metric_report(const ImageSet& generated, const ImageSet& original, double fid,
                           const MetricOptions& opts = {}, unsigned threads = 1);

} // namespace copyscope
