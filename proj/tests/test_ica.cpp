#include "pica/ica.hpp"
#include "pica/metrics.hpp"
#include "pica/signal.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace pica;

namespace {

Matrix sample_cov(const Matrix& Z) {
    const Matrix c = Z.colwise() - Vector(Z.rowwise().mean());
    return c * c.transpose() / static_cast<double>(Z.cols());
}

MixtureMatrix random_mixture(int n, int m, uint64_t seed) {
    const auto S = signal::generate_sources(n, m, seed);
    const auto A = signal::generate_mixing_matrix(n, seed + 17);
    return signal::mix(A, S);
}

}  // namespace

TEST_CASE("fit_whitening yields identity covariance") {
    const auto X = random_mixture(4, 20000, 3);
    const auto T = ica::fit_whitening(X);
    const Matrix Z = ica::apply_whitening(T, X.data);
    CHECK((sample_cov(Z) - Matrix::Identity(4, 4)).norm() < 1e-6);
}

TEST_CASE("fit_whitening on already-white data is near orthogonal") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix Z(3, 50000);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 50000; ++c) Z(r, c) = g(rng);
    // whiten exactly first so the input really has identity covariance
    const auto T0 = ica::fit_whitening(MixtureMatrix{Z});
    const Matrix W = ica::apply_whitening(T0, Z);
    const auto T = ica::fit_whitening(MixtureMatrix{W});
    CHECK(Vector(T.mean).norm() < 1e-9);
    CHECK((T.V * T.V.transpose() - Matrix::Identity(3, 3)).norm() < 1e-5);
}

TEST_CASE("fit_whitening rejects a duplicated row") {
    auto X = random_mixture(3, 1000, 9);
    X.data.row(2) = X.data.row(0);
    CHECK_THROWS_AS(ica::fit_whitening(X), DegenerateInputError);
}

TEST_CASE("apply_whitening basics") {
    ica::WhiteningTransform T;
    T.mean = Vector::Constant(3, 2.5);
    T.V = Matrix::Identity(3, 3);

    const Matrix constant = T.mean.replicate(1, 7);
    CHECK(ica::apply_whitening(T, constant).isZero(0.0));

    T.mean.setZero();
    Matrix X = Matrix::Random(3, 5);
    CHECK(ica::apply_whitening(T, X) == X);

    Matrix one_col = Matrix::Random(3, 1);
    CHECK(ica::apply_whitening(T, one_col).cols() == 1);

    Matrix bad = Matrix::Random(4, 5);
    CHECK_THROWS_AS(ica::apply_whitening(T, bad), ParameterError);
}

TEST_CASE("newton_step keeps W orthonormal") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 2 + trial % 4;
        Matrix Z(n, 512);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < 512; ++c) Z(r, c) = g(rng);
        auto W = ica::random_orthonormal(n, rng());
        for (int it = 0; it < 5; ++it) {
            auto [w_next, delta] = ica::newton_step(Z, W);
            W = w_next;
            CHECK((W.W * W.W.transpose() - Matrix::Identity(n, n)).norm() <= 1e-8);
        }
    }
}

TEST_CASE("newton_step from the true unmixing stays put") {
    const auto S = signal::generate_sources(4, 100000, 21);
    const auto X = MixtureMatrix{S.data};  // identity mixing of independent rows
    const auto T = ica::fit_whitening(X);
    const Matrix Z = ica::apply_whitening(T, X.data);
    // whitened independent rows: the identity is (close to) a separating W
    auto [w_next, delta] = ica::newton_step(Z, ica::SeparationMatrix{Matrix::Identity(4, 4)});
    CHECK(delta.scalar < 1e-2);
}

TEST_CASE("newton_step boundary and error cases") {
    Matrix Z = Matrix::Random(3, 3);
    CHECK_NOTHROW(ica::newton_step(Z, ica::random_orthonormal(3, 1)));

    Matrix small = Matrix::Random(3, 2);
    CHECK_THROWS_AS(ica::newton_step(small, ica::random_orthonormal(3, 1)),
                    ParameterError);

    Matrix bad = Matrix::Random(3, 10);
    bad(1, 4) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(ica::newton_step(bad, ica::random_orthonormal(3, 1)), NumericError);
}

TEST_CASE("convergence_scalar cases") {
    const auto W = ica::random_orthonormal(3, 2);
    CHECK(ica::convergence_scalar(W, W) == Catch::Approx(0.0).margin(1e-12));

    auto flipped = W;
    flipped.W.row(1) *= -1.0;
    CHECK(ica::convergence_scalar(flipped, W) == Catch::Approx(0.0).margin(1e-12));

    // 60-degree rotation in 2D: |cos 60| - 1 in magnitude = 0.5
    Matrix R(2, 2);
    const double th = M_PI / 3.0;
    R << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
    ica::SeparationMatrix I2{Matrix::Identity(2, 2)};
    ica::SeparationMatrix rot{R};
    CHECK(ica::convergence_scalar(rot, I2) == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("convergence_scalar is sign symmetric in both arguments") {
    std::mt19937_64 rng(33);
    const auto A = ica::random_orthonormal(4, rng());
    const auto B = ica::random_orthonormal(4, rng());
    const double base = ica::convergence_scalar(A, B);
    for (int mask = 1; mask < 16; ++mask) {
        auto A2 = A;
        auto B2 = B;
        for (int i = 0; i < 4; ++i) {
            if (mask & (1 << i)) A2.W.row(i) *= -1.0;
            if ((mask >> 1) & (1 << i)) B2.W.row(i) *= -1.0;
        }
        CHECK(ica::convergence_scalar(A2, B2) == Catch::Approx(base).margin(1e-12));
    }
}

TEST_CASE("fastica separates synthetic sources above 20 dB") {
    const auto S = signal::generate_sources(4, 20000, 101);
    const auto A = signal::generate_mixing_matrix(4, 102);
    const auto X = signal::mix(A, S);
    const auto fit = ica::fastica(X, 1e-4, 200, 103);
    const auto scores = metrics::sdr(ica::reconstruct(fit.W, fit.whitening, X), S);
    CHECK(scores.mean > 20.0);
}

TEST_CASE("fastica loose tolerance returns after one iteration") {
    const auto X = random_mixture(3, 2000, 55);
    CHECK(ica::fastica(X, 1e9, 200, 1).iterations == 1);
}

TEST_CASE("fastica iteration cap is not an error") {
    const auto X = random_mixture(3, 2000, 56);
    const auto fit = ica::fastica(X, 1e-12, 1, 1);
    CHECK(fit.iterations == 1);
}

TEST_CASE("fastica rejects invalid parameters") {
    const auto X = random_mixture(2, 100, 57);
    CHECK_THROWS_AS(ica::fastica(X, 0.0, 10), ParameterError);
    CHECK_THROWS_AS(ica::fastica(X, 1e-4, 0), ParameterError);
}

TEST_CASE("fastica is deterministic") {
    const auto X = random_mixture(3, 4000, 58);
    const auto a = ica::fastica(X, 1e-4, 100, 7);
    const auto b = ica::fastica(X, 1e-4, 100, 7);
    CHECK(a.W.W == b.W.W);
    CHECK(a.iterations == b.iterations);
}

TEST_CASE("reconstruct identity pipeline returns X") {
    const auto X = random_mixture(3, 50, 60);
    ica::WhiteningTransform T;
    T.mean = Vector::Zero(3);
    T.V = Matrix::Identity(3, 3);
    const auto S = ica::reconstruct(ica::SeparationMatrix{Matrix::Identity(3, 3)}, T, X);
    CHECK(S.data == X.data);

    MixtureMatrix one_col{X.data.col(0)};
    CHECK(ica::reconstruct(ica::SeparationMatrix{Matrix::Identity(3, 3)}, T, one_col)
              .data.cols() == 1);
}

TEST_CASE("reconstruct with the exact unmixing recovers the sources") {
    const auto S = signal::generate_sources(4, 10000, 71);
    const auto A = signal::generate_mixing_matrix(4, 72);
    const auto X = signal::mix(A, S);
    const auto T = ica::fit_whitening(X);
    // exact unmixing in the whitened basis: S = (V*A)^{-1} * Z up to centering
    const Matrix W_exact = (T.V * A.data).inverse();
    const auto S_hat = ica::reconstruct(ica::SeparationMatrix{W_exact}, T, X);
    // reconstruct removes the mixture mean, so it recovers centered sources
    SourceMatrix S_centered = S;
    S_centered.data.colwise() -= S.data.rowwise().mean();
    const auto scores = metrics::sdr(S_hat, S_centered);
    CHECK(scores.mean > 60.0);
}

TEST_CASE("scaling the mixture leaves aligned separation quality unchanged") {
    const auto S = signal::generate_sources(4, 20000, 81);
    const auto A = signal::generate_mixing_matrix(4, 82);
    const auto X = signal::mix(A, S);
    MixtureMatrix scaled{3.7 * X.data};

    const auto f1 = ica::fastica(X, 1e-4, 200, 5);
    const auto f2 = ica::fastica(scaled, 1e-4, 200, 5);
    const double sdr1 = metrics::sdr(ica::reconstruct(f1.W, f1.whitening, X), S).mean;
    const double sdr2 =
        metrics::sdr(ica::reconstruct(f2.W, f2.whitening, scaled), S).mean;
    CHECK(std::abs(sdr1 - sdr2) < 1e-6);
}
