#include "pica/progressive.hpp"
#include "pica/signal.hpp"

#include <catch_amalgamated.hpp>

using namespace pica;
using progressive::ExitReason;

namespace {

MixtureMatrix make_mixture(int n, int m, uint64_t seed) {
    const auto S = signal::generate_sources(n, m, seed);
    const auto A = signal::generate_mixing_matrix(n, seed + 17);
    return signal::mix(A, S);
}

progressive::SeparationState initial_state(const MixtureMatrix& X,
                                           const progressive::PicaParams& params,
                                           uint64_t seed) {
    progressive::SeparationState s;
    s.W = ica::random_orthonormal(X.data.rows(), seed);
    s.mu = params.mu0;
    s.alpha = params.alpha0;
    s.whitening = ica::fit_whitening(X);
    s.hop = 0;
    return s;
}

}  // namespace

TEST_CASE("update_step divides exactly") {
    CHECK(progressive::update_step(500.0, 2.0) == 250.0);
    CHECK(progressive::update_step(1.0, 2.0) == 0.5);
    CHECK(progressive::update_step(4130.0, 2.0) == 2065.0);
    CHECK_THROWS_AS(progressive::update_step(0.0, 2.0), ParameterError);
    CHECK_THROWS_AS(progressive::update_step(10.0, 1.5), ParameterError);
}

TEST_CASE("sample_columns strides and counts") {
    MixtureMatrix X{Matrix::Random(2, 160000)};
    const Matrix sub = progressive::sample_columns(X, 4130.0);
    REQUIRE(sub.cols() == 39);
    CHECK(sub.col(0) == X.data.col(0));
    CHECK(sub.col(1) == X.data.col(4130));
    CHECK(sub.col(38) == X.data.col(156940));

    MixtureMatrix small{Matrix::Random(2, 10)};
    const Matrix every3 = progressive::sample_columns(small, 3.0);
    REQUIRE(every3.cols() == 4);
    for (int j = 0; j < 4; ++j) CHECK(every3.col(j) == small.data.col(3 * j));

    CHECK(progressive::sample_columns(small, 1.0) == small.data);
    CHECK_THROWS_AS(progressive::sample_columns(small, 0.5), ParameterError);
}

TEST_CASE("slow_gradient_check hand-computed vectors") {
    CHECK_FALSE(progressive::slow_gradient_check({1.0, 1.0, 1.0}, 0.9));
    CHECK(progressive::slow_gradient_check({1.0, 0.1, 0.01}, 0.9));
    CHECK_FALSE(progressive::slow_gradient_check({0.5}, 0.9));       // warm-up guard
    CHECK_FALSE(progressive::slow_gradient_check({0.5, 0.01}, 0.9)); // warm-up guard
    CHECK_THROWS_AS(progressive::slow_gradient_check({}, 0.9), ParameterError);
}

TEST_CASE("node_process alpha schedule on tolerance exit") {
    const auto X = make_mixture(4, 40000, 5);
    progressive::PicaParams params;
    params.mu0 = 64.0;
    auto state = initial_state(X, params, 5);
    // advance until some hop reaches tolerance
    for (int hop = 0; hop < 6; ++hop) {
        if (progressive::update_step(state.mu, state.alpha) < 1.0) break;
        const double alpha_before = state.alpha;
        auto [next, report] = progressive::node_process(X, state, params);
        CHECK(next.mu == progressive::update_step(state.mu, alpha_before));
        CHECK(next.mu <= state.mu);
        CHECK(next.alpha >= 2.0);
        if (report.exit_reason == ExitReason::ToleranceReached) {
            CHECK(next.alpha == 2.0 * alpha_before);
        } else {
            CHECK(next.alpha == std::max(2.0, alpha_before / 2.0));
        }
        CHECK((report.exit_reason == ExitReason::ToleranceReached ||
               report.exit_reason == ExitReason::SlowGradient ||
               report.exit_reason == ExitReason::IterationCap));
        state = next;
    }
}

TEST_CASE("node_process slow-gradient exit keeps the alpha floor") {
    const auto X = make_mixture(4, 20000, 6);
    progressive::PicaParams params;
    params.mu0 = 500.0;
    params.tol = 1e-13;  // unreachable: forces the slow-gradient path
    auto state = initial_state(X, params, 6);
    auto [next, report] = progressive::node_process(X, state, params);
    CHECK(report.exit_reason == ExitReason::SlowGradient);
    CHECK(next.alpha == 2.0);  // max(2, 2/2)
    CHECK(report.iterations >= 3);
}

TEST_CASE("node_process with an already-optimal W exits quickly") {
    const auto X = make_mixture(4, 20000, 7);
    progressive::PicaParams params;
    params.mu0 = 2.0;  // hop 1 then sees the full data, where tol is reachable
    auto state = initial_state(X, params, 7);
    // converge on the hop-1 subset first
    const Matrix Z = ica::apply_whitening(
        state.whitening,
        progressive::sample_columns(X, progressive::update_step(state.mu, state.alpha)));
    for (int i = 0; i < 200; ++i) {
        auto [w, d] = ica::newton_step(Z, state.W);
        state.W = w;
        if (d.scalar < params.tol) break;
    }
    auto [next, report] = progressive::node_process(X, state, params);
    CHECK(report.exit_reason == ExitReason::ToleranceReached);
    CHECK(report.iterations <= 2);
}

TEST_CASE("node_process respects the iteration cap") {
    const auto X = make_mixture(4, 20000, 8);
    progressive::PicaParams params;
    params.mu0 = 500.0;
    params.tol = 1e-13;
    params.grad_threshold = 1e-9;  // slow-gradient can effectively never fire
    params.max_local_iter = 5;
    auto state = initial_state(X, params, 8);
    auto [next, report] = progressive::node_process(X, state, params);
    CHECK(report.exit_reason == ExitReason::IterationCap);
    CHECK(report.iterations == 5);
    CHECK(next.alpha == 2.0);
}

TEST_CASE("node_process refuses mu below 1") {
    const auto X = make_mixture(2, 100, 9);
    progressive::PicaParams params;
    auto state = initial_state(X, params, 9);
    state.mu = 1.5;  // next step would be 0.75
    CHECK_THROWS_AS(progressive::node_process(X, state, params), ParameterError);
}

TEST_CASE("mu follows the closed-form product of growth factors") {
    const auto X = make_mixture(4, 40000, 10);
    progressive::PicaParams params;
    params.mu0 = 500.0;
    auto state = initial_state(X, params, 10);
    double product = 1.0;
    for (int hop = 0; hop < 8; ++hop) {
        const double alpha = state.alpha;
        if (progressive::update_step(state.mu, alpha) < 1.0) break;
        auto [next, report] = progressive::node_process(X, state, params);
        product *= alpha;
        CHECK(std::abs(next.mu - params.mu0 / product) <= 1e-12 * next.mu);
        state = next;
    }
}

TEST_CASE("samples_used grows monotonically along the chain") {
    const auto X = make_mixture(4, 40000, 11);
    progressive::PicaParams params;
    params.mu0 = 500.0;
    auto state = initial_state(X, params, 11);
    Eigen::Index prev = 0;
    for (int hop = 0; hop < 8; ++hop) {
        if (progressive::update_step(state.mu, state.alpha) < 1.0) break;
        auto [next, report] = progressive::node_process(X, state, params);
        CHECK(report.samples_used >= prev);
        prev = report.samples_used;
        state = next;
    }
}

TEST_CASE("last_node_process on the initial state matches fastica") {
    const auto X = make_mixture(4, 20000, 12);
    progressive::PicaParams params;
    auto state = initial_state(X, params, 12);
    auto [W, s_hat, report] = progressive::last_node_process(X, state, params);

    const auto base = ica::fastica(X, params.tol, 10 * params.max_local_iter, 12);
    const auto s_base = ica::reconstruct(base.W, base.whitening, X);
    CHECK(W.W == base.W.W);
    CHECK(report.iterations == base.iterations);
    CHECK((s_hat.data - s_base.data).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("last_node_process with a converged W does at most one iteration") {
    const auto X = make_mixture(4, 20000, 13);
    progressive::PicaParams params;
    auto state = initial_state(X, params, 13);
    const Matrix Z = ica::apply_whitening(state.whitening, X.data);
    for (int i = 0; i < 2000; ++i) {
        auto [w, d] = ica::newton_step(Z, state.W);
        state.W = w;
        if (d.scalar < params.tol) break;
    }
    auto [W, s_hat, report] = progressive::last_node_process(X, state, params);
    CHECK(report.iterations <= 1);
    CHECK(report.exit_reason == ExitReason::LastNodeConverged);
    CHECK(s_hat.data.cols() == X.data.cols());
}

TEST_CASE("a chain warm start beats a cold start on full-data iterations") {
    progressive::PicaParams params;
    params.mu0 = 500.0;
    int warm_total = 0, cold_total = 0;
    for (uint64_t trial = 0; trial < 10; ++trial) {
        const auto X = make_mixture(4, 40000, 400 + trial);
        auto state = initial_state(X, params, 400 + trial);
        for (int hop = 0; hop < 15; ++hop) {
            if (progressive::update_step(state.mu, state.alpha) < 1.0) break;
            state = progressive::node_process(X, state, params).first;
        }
        auto [W, s_hat, report] = progressive::last_node_process(X, state, params);
        warm_total += report.iterations;

        auto cold = initial_state(X, params, 400 + trial);
        auto [Wc, sc, rc] = progressive::last_node_process(X, cold, params);
        cold_total += rc.iterations;
    }
    CHECK(warm_total < cold_total);
}
