#include "copyscope/metrics.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <vector>

#include "copyscope/error.hpp"
#include "copyscope/parallel.hpp"

namespace copyscope {

void SsimParams::validate() const {
    if (!(k1 > 0.0) || !(k2 > 0.0)) fail(ErrorKind::Argument, "SSIM k1 and k2 must be positive");
    if (!(dynamic_range > 0.0)) fail(ErrorKind::Argument, "SSIM dynamic range must be positive");
    if (!(sigma > 0.0)) fail(ErrorKind::Argument, "SSIM window sigma must be positive");
    if (window < 3 || window % 2 == 0) fail(ErrorKind::Argument, "SSIM window side must be odd and >= 3");
}

namespace {

std::vector<double> gaussian_kernel(int side, double sigma) {
    std::vector<double> g(static_cast<std::size_t>(side));
    const int half = side / 2;
    double sum = 0.0;
    for (int i = 0; i < side; ++i) {
        const double d = i - half;
        g[static_cast<std::size_t>(i)] = std::exp(-(d * d) / (2.0 * sigma * sigma));
        sum += g[static_cast<std::size_t>(i)];
    }
    for (auto& v : g) v /= sum;
    return g;
}

// "Valid" separable filtering: output is (w - k + 1) x (h - k + 1).
std::vector<double> filter_valid(const std::vector<double>& src, int w, int h, const std::vector<double>& k) {
    const int side = static_cast<int>(k.size());
    const int ow = w - side + 1;
    const int oh = h - side + 1;
    std::vector<double> rows(static_cast<std::size_t>(ow) * h);
    for (int y = 0; y < h; ++y) {
        const double* in = src.data() + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < side; ++i) acc += k[static_cast<std::size_t>(i)] * in[x + i];
            rows[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(ow) * oh);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < side; ++i) {
                acc += k[static_cast<std::size_t>(i)] * rows[static_cast<std::size_t>(y + i) * ow + x];
            }
            out[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    }
    return out;
}

int effective_window(int requested, int w, int h) {
    const int limit = std::min(w, h);
    if (requested <= limit) return requested;
    return limit % 2 == 1 ? limit : limit - 1;
}

// Per-plane quantities reused across every pair the plane takes part in.
struct Plane {
    int w = 0;
    int h = 0;
    int window = 0;
    std::vector<double> kernel;
    std::vector<double> values;
    std::vector<double> mean; // filtered x
    std::vector<double> sq;   // filtered x^2
};

Plane make_plane(const Image& gray, const SsimParams& p) {
    Plane pl;
    pl.w = gray.width();
    pl.h = gray.height();
    pl.window = effective_window(p.window, pl.w, pl.h);
    pl.kernel = gaussian_kernel(pl.window, p.sigma);
    const auto d = gray.data();
    pl.values.assign(d.begin(), d.end());
    std::vector<double> squared(pl.values.size());
    for (std::size_t i = 0; i < squared.size(); ++i) squared[i] = pl.values[i] * pl.values[i];
    pl.mean = filter_valid(pl.values, pl.w, pl.h, pl.kernel);
    pl.sq = filter_valid(squared, pl.w, pl.h, pl.kernel);
    return pl;
}

SsimResult ssim_planes(const Plane& a, const Plane& b, const SsimParams& p) {
    if (a.w != b.w || a.h != b.h) fail(ErrorKind::Argument, "SSIM planes must have equal dimensions");
    std::vector<double> prod(a.values.size());
    for (std::size_t i = 0; i < prod.size(); ++i) prod[i] = a.values[i] * b.values[i];
    const auto cross = filter_valid(prod, a.w, a.h, a.kernel);
    const double c1 = p.c1();
    const double c2 = p.c2();
    double total = 0.0;
    for (std::size_t i = 0; i < cross.size(); ++i) {
        const double ma = a.mean[i];
        const double mb = b.mean[i];
        const double va = a.sq[i] - ma * ma;
        const double vb = b.sq[i] - mb * mb;
        const double cov = cross[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    return {total / static_cast<double>(cross.size()), a.window};
}

struct Prepared {
    Image rgb;
    Image gray;
    Plane gray_plane;
    std::array<Plane, 3> channel_planes;
    std::array<std::array<std::uint64_t, 256>, 3> hist{};
    double norm_sq = 0.0;
};

Image at_resolution(const Image& img, const MetricOptions& opts, int native_w, int native_h) {
    if (opts.resolution) {
        if (*opts.resolution < 1) fail(ErrorKind::Argument, "metric resolution must be >= 1");
        return resize(img, *opts.resolution, *opts.resolution);
    }
    return resize(img, native_w, native_h);
}

Prepared prepare(const Image& img, const MetricOptions& opts, int native_w, int native_h) {
    Prepared pr{to_rgb(at_resolution(img, opts, native_w, native_h)), Image(1, 1, 1, std::uint8_t{0}), {}, {}, {}, 0.0};
    pr.gray = to_grayscale(pr.rgb);
    pr.gray_plane = make_plane(pr.gray, opts.ssim);
    for (int c = 0; c < 3; ++c) {
        pr.channel_planes[static_cast<std::size_t>(c)] = make_plane(extract_channel(pr.rgb, c), opts.ssim);
    }
    const auto d = pr.rgb.data();
    for (std::size_t i = 0; i < d.size(); ++i) ++pr.hist[i % 3][d[i]];
    double n = 0.0;
    for (double v : pr.gray_plane.values) n += v * v;
    pr.norm_sq = n;
    return pr;
}

double cosine_prepared(const Prepared& a, const Prepared& b) {
    if (a.norm_sq == 0.0 || b.norm_sq == 0.0) {
        fail(ErrorKind::UndefinedSimilarity, "cosine similarity undefined for an all-zero (black) image");
    }
    double dot = 0.0;
    const auto& va = a.gray_plane.values;
    const auto& vb = b.gray_plane.values;
    for (std::size_t i = 0; i < va.size(); ++i) dot += va[i] * vb[i];
    return std::clamp(dot / std::sqrt(a.norm_sq * b.norm_sq), 0.0, 1.0);
}

double hist_prepared(const Prepared& a, const Prepared& b) {
    const std::uint64_t na = a.rgb.pixel_count();
    const std::uint64_t nb = b.rgb.pixel_count();
    double total = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
        std::uint64_t acc = 0;
        for (std::size_t i = 0; i < 256; ++i) acc += std::min(a.hist[c][i] * nb, b.hist[c][i] * na);
        total += static_cast<double>(acc) / (static_cast<double>(na) * static_cast<double>(nb));
    }
    return total / 3.0;
}

double rgb_ssim_prepared(const Prepared& a, const Prepared& b, const SsimParams& p) {
    double total = 0.0;
    for (std::size_t c = 0; c < 3; ++c) total += ssim_planes(a.channel_planes[c], b.channel_planes[c], p).score;
    return total / 3.0;
}

std::pair<Prepared, Prepared> prepare_pair(const Image& a, const Image& b, const MetricOptions& opts) {
    opts.ssim.validate();
    return {prepare(a, opts, a.width(), a.height()), prepare(b, opts, a.width(), a.height())};
}

} // namespace

double cosine_similarity(const Image& a, const Image& b, const MetricOptions& opts) {
    const auto [pa, pb] = prepare_pair(a, b, opts);
    return cosine_prepared(pa, pb);
}

std::uint64_t dhash(const Image& img) {
    const Image thumb = resize(to_grayscale(img), 9, 8);
    std::uint64_t hash = 0;
    for (int r = 0; r < 8; ++r) {
        for (int c = 0; c < 8; ++c) {
            hash <<= 1;
            if (thumb.at(c, r) < thumb.at(c + 1, r)) hash |= 1u;
        }
    }
    return hash;
}

double dhash_similarity(const Image& a, const Image& b) {
    return 1.0 - static_cast<double>(std::popcount(dhash(a) ^ dhash(b))) / 64.0;
}

double hist_similarity(const Image& a, const Image& b, const MetricOptions& opts) {
    const auto [pa, pb] = prepare_pair(a, b, opts);
    return hist_prepared(pa, pb);
}

SsimResult ssim_plane(const Image& a, const Image& b, const SsimParams& p) {
    p.validate();
    if (a.channels() != 1 || b.channels() != 1) fail(ErrorKind::Argument, "ssim_plane expects single-channel images");
    return ssim_planes(make_plane(a, p), make_plane(b, p), p);
}

SsimResult ssim_detailed(const Image& a, const Image& b, const MetricOptions& opts) {
    const auto [pa, pb] = prepare_pair(a, b, opts);
    return ssim_planes(pa.gray_plane, pb.gray_plane, opts.ssim);
}

double ssim(const Image& a, const Image& b, const MetricOptions& opts) {
    return ssim_detailed(a, b, opts).score;
}

double rgb_ssim(const Image& a, const Image& b, const MetricOptions& opts) {
    const auto [pa, pb] = prepare_pair(a, b, opts);
    return rgb_ssim_prepared(pa, pb, opts.ssim);
}

MetricReport metric_report(const ImageSet& generated, const ImageSet& original, double fid,
                           const MetricOptions& opts, unsigned threads) {
    if (generated.images.empty() || original.images.empty()) {
        fail(ErrorKind::Dataset, "metric_report requires nonempty generated and original sets");
    }
    opts.ssim.validate();

    // Native comparisons are made at the first original's size.
    const int ref_w = original.images.front().width();
    const int ref_h = original.images.front().height();

    std::vector<std::optional<Prepared>> gen(generated.size());
    std::vector<std::optional<Prepared>> orig(original.size());
    parallel_for(gen.size(), threads, [&](std::size_t i) { gen[i] = prepare(generated.images[i], opts, ref_w, ref_h); });
    parallel_for(orig.size(), threads, [&](std::size_t j) { orig[j] = prepare(original.images[j], opts, ref_w, ref_h); });
    std::vector<std::uint64_t> gen_hash(generated.size());
    std::vector<std::uint64_t> orig_hash(original.size());
    for (std::size_t i = 0; i < gen_hash.size(); ++i) gen_hash[i] = dhash(generated.images[i]);
    for (std::size_t j = 0; j < orig_hash.size(); ++j) orig_hash[j] = dhash(original.images[j]);

    const std::size_t pairs = generated.size() * original.size();
    struct PairScores {
        double cosine, hist, dhash, ssim, rgb_ssim;
        int window;
    };
    std::vector<PairScores> scores(pairs);
    parallel_for(pairs, threads, [&](std::size_t k) {
        const auto& g = *gen[k / original.size()];
        const auto& o = *orig[k % original.size()];
        const auto s = ssim_planes(g.gray_plane, o.gray_plane, opts.ssim);
        const auto diff = std::popcount(gen_hash[k / original.size()] ^ orig_hash[k % original.size()]);
        scores[k] = {cosine_prepared(g, o), hist_prepared(g, o), 1.0 - static_cast<double>(diff) / 64.0, s.score,
                     rgb_ssim_prepared(g, o, opts.ssim), s.window};
    });

    MetricReport report;
    report.fid = fid;
    report.pairs = pairs;
    report.ssim_window = opts.ssim.window;
    for (const auto& s : scores) {
        report.cosine += s.cosine;
        report.hist += s.hist;
        report.dhash += s.dhash;
        report.ssim += s.ssim;
        report.rgb_ssim += s.rgb_ssim;
        report.ssim_window = std::min(report.ssim_window, s.window);
    }
    const double n = static_cast<double>(pairs);
    report.cosine /= n;
    report.hist /= n;
    report.dhash /= n;
    report.ssim /= n;
    report.rgb_ssim /= n;
    return report;
}

} // namespace copyscope
