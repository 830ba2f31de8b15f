#pragma once

#include "pica/types.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>

namespace pica::ica {

// Per-channel mean plus sphering matrix; cov(V * (X - mean)) = I on the data
// it was fitted to.
struct WhiteningTransform {
    Vector mean;
    Matrix V;
};

// Orthonormal unmixing matrix acting on whitened data.
struct SeparationMatrix {
    Matrix W;

    Eigen::Index size() const { return W.rows(); }
};

// W_new * W_prev^T - I and its scalar reduction used as the convergence test.
struct IterationDelta {
    Matrix delta_matrix;
    double scalar = 0.0;
};

// max_i | |diag(W_new * W_prev^T)_i| - 1 |, invariant to per-row sign flips.
inline double convergence_scalar(const SeparationMatrix& w_new,
                                 const SeparationMatrix& w_prev) {
    const Vector d = (w_new.W * w_prev.W.transpose()).diagonal();
    double worst = 0.0;
    for (Eigen::Index i = 0; i < d.size(); ++i)
        worst = std::max(worst, std::abs(std::abs(d[i]) - 1.0));
    return worst;
}

namespace detail {

// (M)^{-1/2} for symmetric positive definite M, via eigendecomposition.
inline Matrix inverse_sqrt_spd(const Matrix& M) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(M);
    if (eig.info() != Eigen::Success)
        throw NumericError("inverse_sqrt_spd: eigendecomposition failed");
    const Vector& ev = eig.eigenvalues();
    if (ev.minCoeff() <= 0.0)
        throw NumericError("inverse_sqrt_spd: matrix is singular");
    return eig.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() *
           eig.eigenvectors().transpose();
}

// W <- (W W^T)^{-1/2} W
inline Matrix symmetric_decorrelate(const Matrix& W) {
    return inverse_sqrt_spd(W * W.transpose()) * W;
}

}  // namespace detail

// Centering + eigendecomposition sphering: V = D^{-1/2} E^T of the sample
// covariance of centered X.
inline WhiteningTransform fit_whitening(const MixtureMatrix& X) {
    const Eigen::Index m = X.data.cols();
    if (m < 2) throw ParameterError("fit_whitening: need at least 2 columns");

    WhiteningTransform T;
    T.mean = X.data.rowwise().mean();
    const Matrix centered = X.data.colwise() - T.mean;
    const Matrix cov = centered * centered.transpose() / static_cast<double>(m);

    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    if (eig.info() != Eigen::Success)
        throw NumericError("fit_whitening: eigendecomposition failed");
    const Vector& ev = eig.eigenvalues();
    if (ev.minCoeff() < 1e-12 * ev.maxCoeff())
        throw DegenerateInputError("fit_whitening: rank-deficient covariance");
    T.V = ev.cwiseSqrt().cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
    return T;
}

// V * (X - mean), mean broadcast per column.
inline Matrix apply_whitening(const WhiteningTransform& T, const Matrix& X) {
    if (X.rows() != T.V.cols() || X.cols() < 1)
        throw ParameterError("apply_whitening: shape mismatch");
    return T.V * (X.colwise() - T.mean);
}

// One symmetric FastICA fixed-point update with g(u) = tanh(u), followed by
// symmetric decorrelation.
inline std::pair<SeparationMatrix, IterationDelta> newton_step(
    const Matrix& Z, const SeparationMatrix& w_prev) {
    const Eigen::Index n = w_prev.W.rows();
    const auto p = static_cast<double>(Z.cols());
    if (Z.rows() != n || Z.cols() < n)
        throw ParameterError("newton_step: need p >= n whitened columns");
    if (!Z.allFinite()) throw NumericError("newton_step: non-finite input data");

    const Matrix Y = w_prev.W * Z;
    const Matrix G = Y.array().tanh();
    const Vector gprime_mean = (1.0 - G.array().square()).rowwise().mean();
    const Matrix raw = (G * Z.transpose()) / p - gprime_mean.asDiagonal() * w_prev.W;

    SeparationMatrix w_new{detail::symmetric_decorrelate(raw)};
    IterationDelta delta;
    delta.delta_matrix = w_new.W * w_prev.W.transpose() - Matrix::Identity(n, n);
    delta.scalar = convergence_scalar(w_new, w_prev);
    return {std::move(w_new), std::move(delta)};
}

// Seeded random orthonormal matrix (QR of a Gaussian draw); the shared W
// initialization for both the baseline and the progressive chain.
inline SeparationMatrix random_orthonormal(Eigen::Index n, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix G(n, n);
    for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c < n; ++c) G(r, c) = gauss(rng);
    Matrix Q = Eigen::HouseholderQR<Matrix>(G).householderQ();
    return SeparationMatrix{std::move(Q)};
}

struct FastIcaResult {
    WhiteningTransform whitening;
    SeparationMatrix W;
    int iterations = 0;
};

// Centralized baseline: whiten, then iterate newton_step on the full data
// until convergence_scalar < tol or max_iter. Hitting max_iter is signalled
// by the returned count, not an error.
inline FastIcaResult fastica(const MixtureMatrix& X, double tol, int max_iter,
                             uint64_t w_seed = 0) {
    if (tol <= 0.0) throw ParameterError("fastica: tol must be positive");
    if (max_iter < 1) throw ParameterError("fastica: max_iter must be >= 1");

    FastIcaResult r;
    r.whitening = fit_whitening(X);
    const Matrix Z = apply_whitening(r.whitening, X.data);
    r.W = random_orthonormal(X.data.rows(), w_seed);
    for (r.iterations = 0; r.iterations < max_iter;) {
        auto [w_next, delta] = newton_step(Z, r.W);
        r.W = std::move(w_next);
        ++r.iterations;
        if (delta.scalar < tol) break;
    }
    return r;
}

// S_hat = W * V * (X - mean), applied to all columns.
inline SourceMatrix reconstruct(const SeparationMatrix& W, const WhiteningTransform& T,
                                const MixtureMatrix& X) {
    return SourceMatrix{W.W * apply_whitening(T, X.data), 0.0};
}

}  // namespace pica::ica
