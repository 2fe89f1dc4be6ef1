#include "copyscope/fid.hpp"

#include <algorithm>
#include <cmath>

#include "copyscope/error.hpp"
#include "copyscope/parallel.hpp"

namespace copyscope {

Eigen::VectorXd embed_pixels(const Image& img) {
    const Image thumb = resize(to_grayscale(img), kPixelEmbeddingSide, kPixelEmbeddingSide);
    const auto d = thumb.data();
    Eigen::VectorXd v(static_cast<Eigen::Index>(d.size()));
    for (std::size_t i = 0; i < d.size(); ++i) v(static_cast<Eigen::Index>(i)) = d[i] / 255.0;
    return v;
}

FeatureSet embed_image_set(const ImageSet& set, unsigned threads) {
    constexpr Eigen::Index dim = kPixelEmbeddingSide * kPixelEmbeddingSide;
    FeatureSet fs;
    fs.matrix.resize(static_cast<Eigen::Index>(set.size()), dim);
    fs.labels = set.labels;
    fs.source_tag = kBuiltinPixelTag;
    parallel_for(set.size(), threads, [&](std::size_t i) {
        fs.matrix.row(static_cast<Eigen::Index>(i)) = embed_pixels(set.images[i]).transpose();
    });
    return fs;
}

GaussianStats fit_gaussian(const FeatureSet& features) {
    const auto& x = features.matrix;
    if (x.rows() < 2) fail(ErrorKind::InsufficientSamples, "covariance estimation needs at least 2 samples");
    if (x.cols() < 1) fail(ErrorKind::Argument, "feature dimension must be >= 1");
    if (!x.allFinite()) fail(ErrorKind::Numeric, "feature matrix contains non-finite values");

    GaussianStats st;
    st.n = x.rows();
    st.mean = x.colwise().mean().transpose();
    const Eigen::MatrixXd centered = x.rowwise() - st.mean.transpose();
    Eigen::MatrixXd cov = (centered.adjoint() * centered) / static_cast<double>(x.rows() - 1);
    st.cov = 0.5 * (cov + cov.transpose());
    return st;
}

namespace {

void require_symmetric(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) fail(ErrorKind::Argument, "matrix must be square");
    if (m.size() == 0) fail(ErrorKind::Argument, "matrix must be nonempty");
    if (!m.allFinite()) fail(ErrorKind::Numeric, "matrix contains non-finite values");
    const double scale = m.cwiseAbs().maxCoeff();
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-10 * scale) fail(ErrorKind::Argument, "matrix is not symmetric within tolerance");
}

// Throws NotPsd if an eigenvalue lies below -1e-8 * sum|lambda| / d, then
// clamps the remaining negatives to zero.
Eigen::VectorXd clamped_eigenvalues(const Eigen::VectorXd& lambda) {
    const double tol = 1e-8 * lambda.cwiseAbs().sum() / static_cast<double>(lambda.size());
    if (lambda.minCoeff() < -tol) fail(ErrorKind::NotPsd, "matrix has an eigenvalue below the PSD tolerance");
    return lambda.cwiseMax(0.0);
}

// Eigenvalues and eigenvectors of a symmetric PSD covariance.
struct SymEig {
    Eigen::VectorXd lambda;
    Eigen::MatrixXd q;
};

SymEig sym_eig(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success) fail(ErrorKind::Numeric, "eigendecomposition failed");
    return {es.eigenvalues(), es.eigenvectors()};
}

// Square roots of the clamped eigenvalues of m + shift * I.
Eigen::VectorXd shifted_root_values(const SymEig& e, double shift) {
    return (clamped_eigenvalues(e.lambda).array() + shift).sqrt().matrix();
}

FeatureSet resolve(const FeatureInput& input, unsigned threads) {
    if (const auto* set = std::get_if<ImageSet>(&input)) return embed_image_set(*set, threads);
    return std::get<FeatureSet>(input);
}

} // namespace

Eigen::MatrixXd matrix_sqrt_psd(const Eigen::MatrixXd& m) {
    require_symmetric(m);
    const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    if (es.info() != Eigen::Success) fail(ErrorKind::Numeric, "eigendecomposition failed");
    const Eigen::VectorXd root = clamped_eigenvalues(es.eigenvalues()).cwiseSqrt();
    const Eigen::MatrixXd& q = es.eigenvectors();
    Eigen::MatrixXd out = q * root.asDiagonal() * q.transpose();
    return 0.5 * (out + out.transpose());
}

FidResult fid_detailed(const GaussianStats& real, const GaussianStats& gen, const FidOptions& opts) {
    const Eigen::Index d = real.mean.size();
    if (gen.mean.size() != d || real.cov.rows() != d || real.cov.cols() != d || gen.cov.rows() != d ||
        gen.cov.cols() != d) {
        fail(ErrorKind::Argument, "feature dimensions of the two distributions differ");
    }
    if (d == 0) fail(ErrorKind::Argument, "feature dimension must be >= 1");
    if (!real.mean.allFinite() || !gen.mean.allFinite() || !real.cov.allFinite() || !gen.cov.allFinite()) {
        fail(ErrorKind::Numeric, "Gaussian statistics contain non-finite values");
    }

    require_symmetric(real.cov);
    require_symmetric(gen.cov);
    const SymEig eig_r = sym_eig(real.cov);
    const SymEig eig_g = sym_eig(gen.cov);
    const double eps_level = opts.eps_scale * 0.5 * (real.cov.trace() + gen.cov.trace()) / static_cast<double>(d);
    double eps = 0.0;
    if (eps_level > 0.0 && (eig_r.lambda.minCoeff() < eps_level || eig_g.lambda.minCoeff() < eps_level)) {
        eps = eps_level;
    }
    // Tr sqrt(R^1/2 G R^1/2) is the sum of singular values of R^1/2 G^1/2,
    // which are those of diag(sqrt(lr)) Qr' Qg diag(sqrt(lg)). Singular values
    // avoid square-rooting rounding noise in near-zero eigenvalues.
    const Eigen::MatrixXd b = shifted_root_values(eig_r, eps).asDiagonal() * (eig_r.q.transpose() * eig_g.q) *
                              shifted_root_values(eig_g, eps).asDiagonal();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(b);
    if (svd.info() != Eigen::Success) fail(ErrorKind::Numeric, "singular value decomposition failed");
    const double cross_trace = svd.singularValues().sum();

    const double mean_term = (real.mean - gen.mean).squaredNorm();
    const double trace_r = real.cov.trace() + eps * static_cast<double>(d);
    const double trace_g = gen.cov.trace() + eps * static_cast<double>(d);
    double value = mean_term + trace_r + trace_g - 2.0 * cross_trace;
    if (!std::isfinite(value)) fail(ErrorKind::Numeric, "FID evaluated to a non-finite value");
    if (value < 0.0) {
        if (value < -1e-6) fail(ErrorKind::Numeric, "FID evaluated to a negative value beyond rounding");
        value = 0.0;
    }
    return {value, eps};
}

double fid(const GaussianStats& real, const GaussianStats& gen, const FidOptions& opts) {
    return fid_detailed(real, gen, opts).value;
}

FidResult fid_between_sets(const FeatureInput& real, const FeatureInput& gen, const FidOptions& opts,
                           unsigned threads) {
    const FeatureSet fr = resolve(real, threads);
    const FeatureSet fg = resolve(gen, threads);
    if (fr.source_tag != fg.source_tag) {
        fail(ErrorKind::Configuration,
             "feature sources differ: '" + fr.source_tag + "' vs '" + fg.source_tag + "'");
    }
    if (fr.d() != fg.d()) {
        fail(ErrorKind::Configuration, "feature dimensions differ: " + std::to_string(fr.d()) + " vs " +
                                           std::to_string(fg.d()));
    }
    return fid_detailed(fit_gaussian(fr), fit_gaussian(fg), opts);
}

} // namespace copyscope
