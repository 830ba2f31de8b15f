#pragma once

#include "pica/ica.hpp"
#include "pica/types.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace pica::progressive {

// Handoff payload relayed between nodes: the partial unmixing, the sampling
// schedule, and the shared whitening basis fitted once at ingress.
struct SeparationState {
    ica::SeparationMatrix W;
    double mu = 1.0;        // sampling step for the NEXT hop's update
    double alpha = 2.0;     // growth factor applied at the next hop
    ica::WhiteningTransform whitening;
    int hop = 0;
};

struct PicaParams {
    double tol = 1e-4;
    double grad_threshold = 0.7;  // P_break for the slow-gradient exit
    int max_local_iter = 200;
    double mu0 = 500.0;
    double alpha0 = 2.0;

    void validate() const {
        if (tol <= 0.0) throw ParameterError("PicaParams: tol must be positive");
        if (grad_threshold <= 0.0 || grad_threshold >= 1.0)
            throw ParameterError("PicaParams: grad_threshold must be in (0,1)");
        if (max_local_iter < 1) throw ParameterError("PicaParams: max_local_iter >= 1");
        if (mu0 < 1.0) throw ParameterError("PicaParams: mu0 must be >= 1");
        if (alpha0 < 2.0) throw ParameterError("PicaParams: alpha0 must be >= 2");
    }
};

enum class ExitReason { ToleranceReached, SlowGradient, LastNodeConverged, IterationCap };

inline const char* exit_reason_name(ExitReason r) {
    switch (r) {
        case ExitReason::ToleranceReached: return "tolerance-reached";
        case ExitReason::SlowGradient: return "slow-gradient";
        case ExitReason::LastNodeConverged: return "last-node-converged";
        case ExitReason::IterationCap: return "iteration-cap";
    }
    return "unknown";
}

struct NodeReport {
    int hop = 0;
    ExitReason exit_reason = ExitReason::IterationCap;
    int iterations = 0;
    Eigen::Index samples_used = 0;
    double wall_time = 0.0;  // seconds, compute section only
    double final_scalar = 0.0;
    std::optional<double> cosine_distance;  // filled when ground truth A is known
};

// mu_k <- mu_{k-1} / alpha_k, kept real-valued; flooring happens only when
// sampling.
inline double update_step(double mu_prev, double alpha) {
    if (mu_prev <= 0.0) throw ParameterError("update_step: mu must be positive");
    if (alpha < 2.0) throw ParameterError("update_step: alpha must be >= 2");
    return mu_prev / alpha;
}

// Every t-th column of X with t = max(1, round(mu)).
inline Matrix sample_columns(const MixtureMatrix& X, double mu) {
    if (mu < 1.0)
        throw ParameterError("sample_columns: mu < 1 means use the full data");
    const auto t = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::llround(mu)));
    const Eigen::Index m = X.data.cols();
    const Eigen::Index p = (m - 1) / t + 1;
    Matrix out(X.data.rows(), p);
    for (Eigen::Index j = 0; j < p; ++j) out.col(j) = X.data.col(j * t);
    return out;
}

// Diminishing-returns exit: stop when the history's sum falls below a
// trapezoid-style bound scaled by p_break. Needs at least 3 entries.
inline bool slow_gradient_check(const std::vector<double>& scalar_history,
                                double p_break) {
    if (scalar_history.empty())
        throw ParameterError("slow_gradient_check: empty history");
    if (scalar_history.size() < 3) return false;
    const double sum = std::accumulate(scalar_history.begin(), scalar_history.end(), 0.0);
    const double peak = *std::max_element(scalar_history.begin(), scalar_history.end());
    const double bound = p_break * 0.5 * (peak + scalar_history.back()) *
                         static_cast<double>(scalar_history.size());
    return sum < bound;
}

// Intermediate-node logic: shrink mu, sample the subset, continue Newton
// iterations from the predecessor's W, exit on tolerance / slow gradient /
// iteration cap, and adjust alpha for the next hop.
inline std::pair<SeparationState, NodeReport> node_process(const MixtureMatrix& X,
                                                           const SeparationState& state,
                                                           const PicaParams& params) {
    const double mu_k = update_step(state.mu, state.alpha);
    if (mu_k < 1.0)
        throw ParameterError("node_process: mu dropped below 1; route to the last node");

    NodeReport report;
    report.hop = state.hop + 1;

    const auto start = std::chrono::steady_clock::now();
    const Matrix subset = sample_columns(X, mu_k);
    const Matrix Z = ica::apply_whitening(state.whitening, subset);
    report.samples_used = Z.cols();

    ica::SeparationMatrix W = state.W;
    std::vector<double> history;
    double alpha_next = std::max(2.0, state.alpha / 2.0);
    report.exit_reason = ExitReason::IterationCap;
    for (int iter = 1; iter <= params.max_local_iter; ++iter) {
        auto [w_next, delta] = ica::newton_step(Z, W);
        W = std::move(w_next);
        history.push_back(delta.scalar);
        report.iterations = iter;
        report.final_scalar = delta.scalar;
        if (delta.scalar < params.tol) {
            report.exit_reason = ExitReason::ToleranceReached;
            alpha_next = state.alpha * 2.0;
            break;
        }
        if (slow_gradient_check(history, params.grad_threshold)) {
            report.exit_reason = ExitReason::SlowGradient;
            break;
        }
    }
    report.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    SeparationState next;
    next.W = std::move(W);
    next.mu = mu_k;
    next.alpha = alpha_next;
    next.whitening = state.whitening;
    next.hop = state.hop + 1;
    return {std::move(next), report};
}

// Server-side finish: classical iterations on the full data from the incoming
// W, then reconstruction. Safety cap at 10x the per-node iteration budget.
inline std::tuple<ica::SeparationMatrix, SourceMatrix, NodeReport> last_node_process(
    const MixtureMatrix& X, const SeparationState& state, const PicaParams& params) {
    NodeReport report;
    report.hop = state.hop + 1;

    const auto start = std::chrono::steady_clock::now();
    const Matrix Z = ica::apply_whitening(state.whitening, X.data);
    report.samples_used = Z.cols();

    ica::SeparationMatrix W = state.W;
    const int cap = 10 * params.max_local_iter;
    report.exit_reason = ExitReason::IterationCap;
    for (int iter = 1; iter <= cap; ++iter) {
        auto [w_next, delta] = ica::newton_step(Z, W);
        W = std::move(w_next);
        report.iterations = iter;
        report.final_scalar = delta.scalar;
        if (delta.scalar < params.tol) {
            report.exit_reason = ExitReason::LastNodeConverged;
            break;
        }
    }
    SourceMatrix s_hat = ica::reconstruct(W, state.whitening, X);
    report.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {std::move(W), std::move(s_hat), report};
}

}  // namespace pica::progressive
