#pragma once

#include "pica/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace pica::metrics {

// Row matching that absorbs ICA's permutation and scale ambiguity:
// truth row i is matched by scales[i] * S_hat.row(permutation[i]).
struct Alignment {
    std::vector<Eigen::Index> permutation;
    std::vector<double> scales;
};

struct SdrResult {
    std::vector<double> per_source;  // dB
    double mean = 0.0;
};

struct ScoreSummary {
    double mean = 0.0;
    double ci95_low = 0.0;
    double ci95_high = 0.0;
    std::size_t count = 0;
};

namespace detail {

// Exhaustive assignment maximizing sum of score(i, perm[i]); n <= 8.
inline std::vector<Eigen::Index> best_permutation(const Matrix& score) {
    const Eigen::Index n = score.rows();
    std::vector<Eigen::Index> perm(static_cast<size_t>(n)), best(static_cast<size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    best = perm;
    double best_score = -1.0;
    do {
        double s = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) s += score(i, perm[static_cast<size_t>(i)]);
        if (s > best_score) {
            best_score = s;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

inline double row_correlation(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
    const Eigen::RowVectorXd ac = a.array() - a.mean();
    const Eigen::RowVectorXd bc = b.array() - b.mean();
    const double na = ac.norm(), nb = bc.norm();
    if (na == 0.0 || nb == 0.0)
        throw DegenerateInputError("align: zero-variance row");
    return ac.dot(bc) / (na * nb);
}

}  // namespace detail

// Permutation maximizing summed |correlation| between matched rows, plus
// least-squares per-row scales.
inline Alignment align(const SourceMatrix& s_hat, const SourceMatrix& s_truth) {
    const Eigen::Index n = s_truth.data.rows();
    if (s_hat.data.rows() != n || s_hat.data.cols() != s_truth.data.cols())
        throw ParameterError("align: shape mismatch");
    if (n > 8) throw ParameterError("align: exhaustive search bounded at n <= 8");

    Matrix score(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            score(i, j) =
                std::abs(detail::row_correlation(s_truth.data.row(i), s_hat.data.row(j)));

    Alignment out;
    out.permutation = detail::best_permutation(score);
    out.scales.resize(static_cast<size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto est = s_hat.data.row(out.permutation[static_cast<size_t>(i)]);
        const double denom = est.squaredNorm();
        if (denom == 0.0) throw DegenerateInputError("align: zero estimated row");
        out.scales[static_cast<size_t>(i)] = s_truth.data.row(i).dot(est) / denom;
    }
    return out;
}

// Aligned signal-to-distortion ratio per source, residual collapsed into one
// term, capped at +100 dB.
inline SdrResult sdr(const SourceMatrix& s_hat, const SourceMatrix& s_truth) {
    const Alignment a = align(s_hat, s_truth);
    const Eigen::Index n = s_truth.data.rows();
    SdrResult out;
    out.per_source.resize(static_cast<size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::RowVectorXd scaled =
            a.scales[static_cast<size_t>(i)] *
            s_hat.data.row(a.permutation[static_cast<size_t>(i)]);
        const double signal = s_truth.data.row(i).squaredNorm();
        const double residual = (s_truth.data.row(i) - scaled).squaredNorm();
        double db = residual > 0.0 ? 10.0 * std::log10(signal / residual) : 100.0;
        out.per_source[static_cast<size_t>(i)] = std::min(db, 100.0);
    }
    out.mean = std::accumulate(out.per_source.begin(), out.per_source.end(), 0.0) /
               static_cast<double>(n);
    return out;
}

// 1 - Frobenius cosine similarity between the composite unmixing and A^{-1},
// after unit-normalizing rows and aligning by permutation and sign.
inline double cosine_distance(const Matrix& w_effective, const MixingMatrix& A) {
    const Eigen::Index n = A.data.rows();
    if (w_effective.rows() != n || w_effective.cols() != n)
        throw ParameterError("cosine_distance: shape mismatch");
    Eigen::FullPivLU<Matrix> lu(A.data);
    if (!lu.isInvertible()) throw DegenerateInputError("cosine_distance: singular A");
    Matrix target = lu.inverse();

    Matrix w_norm = w_effective;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double nw = w_norm.row(i).norm();
        const double nt = target.row(i).norm();
        if (nw == 0.0 || nt == 0.0)
            throw DegenerateInputError("cosine_distance: zero row");
        w_norm.row(i) /= nw;
        target.row(i) /= nt;
    }

    Matrix score(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            score(i, j) = std::abs(target.row(i).dot(w_norm.row(j)));
    const auto perm = detail::best_permutation(score);

    Matrix aligned(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::RowVectorXd row = w_norm.row(perm[static_cast<size_t>(i)]);
        if (target.row(i).dot(row) < 0.0) row = -row;
        aligned.row(i) = row;
    }
    const double similarity =
        (aligned.array() * target.array()).sum() / (aligned.norm() * target.norm());
    return 1.0 - similarity;
}

// Mean with a normal-approximation 95% confidence interval.
inline ScoreSummary summarize(const std::vector<double>& values) {
    if (values.empty()) throw ParameterError("summarize: empty input");
    ScoreSummary s;
    s.count = values.size();
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) /
             static_cast<double>(values.size());
    if (values.size() == 1) {
        s.ci95_low = s.ci95_high = s.mean;
        return s;
    }
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    const double stderr_ =
        std::sqrt(ss / static_cast<double>(values.size() - 1)) /
        std::sqrt(static_cast<double>(values.size()));
    s.ci95_low = s.mean - 1.96 * stderr_;
    s.ci95_high = s.mean + 1.96 * stderr_;
    return s;
}

}  // namespace pica::metrics
