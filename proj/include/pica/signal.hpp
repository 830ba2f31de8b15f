#pragma once

#include "pica/types.hpp"
#include "pica/wav.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace pica::signal {

enum class Waveform {
    Mixed,     // cycle through the families below, one per row
    AmTone,    // amplitude-modulated sinusoid
    Sawtooth,  // periodic ramp
    Bursts,    // sparse impulsive spikes over a low noise floor
    Laplacian, // heavy-tailed noise
};

namespace detail {

inline void fill_am_tone(Eigen::RowVectorXd& row, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> freq(0.002, 0.12);   // cycles per sample
    std::uniform_real_distribution<double> mod(1e-5, 5e-4);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    const double f = freq(rng), fm = mod(rng), p1 = phase(rng), p2 = phase(rng);
    for (Eigen::Index t = 0; t < row.cols(); ++t) {
        const double env = 0.6 + 0.4 * std::sin(2.0 * std::numbers::pi * fm * t + p2);
        row[t] = env * std::sin(2.0 * std::numbers::pi * f * t + p1);
    }
}

inline void fill_sawtooth(Eigen::RowVectorXd& row, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> freq(0.001, 0.05);
    std::uniform_real_distribution<double> phase(0.0, 1.0);
    const double f = freq(rng), p = phase(rng);
    for (Eigen::Index t = 0; t < row.cols(); ++t) {
        const double x = f * t + p;
        row[t] = 2.0 * (x - std::floor(x)) - 1.0;
    }
}

inline void fill_bursts(Eigen::RowVectorXd& row, std::mt19937_64& rng) {
    std::normal_distribution<double> floor_noise(0.0, 0.05);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::uniform_real_distribution<double> amp(0.5, 1.0);
    for (Eigen::Index t = 0; t < row.cols(); ++t) {
        double v = floor_noise(rng);
        if (uni(rng) < 0.01) v += (uni(rng) < 0.5 ? -1.0 : 1.0) * amp(rng);
        row[t] = v;
    }
}

inline void fill_laplacian(Eigen::RowVectorXd& row, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(-0.5, 0.5);
    for (Eigen::Index t = 0; t < row.cols(); ++t) {
        const double u = uni(rng);
        row[t] = -0.3 * std::copysign(1.0, u) * std::log1p(-2.0 * std::abs(u));
    }
}

}  // namespace detail

// Synthetic non-Gaussian source rows, deterministic per seed. Each row is
// normalized to unit peak.
inline SourceMatrix generate_sources(Eigen::Index n, Eigen::Index m, uint64_t seed,
                                     Waveform kind = Waveform::Mixed) {
    if (n < 2) throw ParameterError("generate_sources: need at least 2 sources");
    if (m < n) throw ParameterError("generate_sources: need at least n samples");

    SourceMatrix out;
    out.data.resize(n, m);
    out.sample_rate = 16000.0;
    std::mt19937_64 rng(seed);
    for (Eigen::Index i = 0; i < n; ++i) {
        Waveform family = kind;
        if (kind == Waveform::Mixed) {
            switch (i % 4) {
                case 0: family = Waveform::AmTone; break;
                case 1: family = Waveform::Sawtooth; break;
                case 2: family = Waveform::Bursts; break;
                default: family = Waveform::Laplacian; break;
            }
        }
        Eigen::RowVectorXd row(m);
        switch (family) {
            case Waveform::AmTone: detail::fill_am_tone(row, rng); break;
            case Waveform::Sawtooth: detail::fill_sawtooth(row, rng); break;
            case Waveform::Bursts: detail::fill_bursts(row, rng); break;
            case Waveform::Laplacian: detail::fill_laplacian(row, rng); break;
            case Waveform::Mixed: break;  // unreachable
        }
        // Equal-power Gaussian background, as in real machine recordings.
        // Undiluted family waveforms are far more non-Gaussian than recorded
        // audio and make the separation unrealistically easy.
        const double rms = row.norm() / std::sqrt(static_cast<double>(m));
        if (rms > 0.0) row /= rms;
        std::normal_distribution<double> background(0.0, 1.0);
        for (Eigen::Index t = 0; t < m; ++t) row[t] += background(rng);
        const double peak = row.cwiseAbs().maxCoeff();
        if (peak > 0.0) row /= peak;
        out.data.row(i) = row;
    }
    return out;
}

// Loads mono WAV files as source rows; all files must agree on rate and length.
inline SourceMatrix load_wav_sources(const std::vector<std::string>& paths) {
    if (paths.size() < 2) throw IngestionError("load_wav_sources: need at least 2 files");
    std::vector<wav::WavData> files;
    files.reserve(paths.size());
    for (const auto& p : paths) files.push_back(wav::read(p));
    for (size_t i = 1; i < files.size(); ++i) {
        if (files[i].sample_rate != files[0].sample_rate)
            throw IngestionError("sample-rate mismatch: " + paths[i]);
        if (files[i].samples.size() != files[0].samples.size())
            throw IngestionError("length mismatch: " + paths[i]);
    }

    SourceMatrix out;
    out.sample_rate = static_cast<double>(files[0].sample_rate);
    out.data.resize(static_cast<Eigen::Index>(files.size()),
                    static_cast<Eigen::Index>(files[0].samples.size()));
    for (size_t i = 0; i < files.size(); ++i)
        for (size_t t = 0; t < files[i].samples.size(); ++t)
            out.data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) =
                files[i].samples[t];
    return out;
}

// Standard-normal square mixing matrix, redrawn until cond(A) <= 1e6.
inline MixingMatrix generate_mixing_matrix(Eigen::Index n, uint64_t seed) {
    if (n < 2) throw ParameterError("generate_mixing_matrix: n must be >= 2");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    MixingMatrix out;
    out.data.resize(n, n);
    for (;;) {
        for (Eigen::Index r = 0; r < n; ++r)
            for (Eigen::Index c = 0; c < n; ++c) out.data(r, c) = gauss(rng);
        Eigen::JacobiSVD<Matrix> svd(out.data);
        const double smin = svd.singularValues().minCoeff();
        if (smin > 0.0 && svd.singularValues().maxCoeff() / smin <= 1e6) return out;
    }
}

inline MixtureMatrix mix(const MixingMatrix& A, const SourceMatrix& S) {
    if (A.data.rows() != A.data.cols() || A.data.rows() != S.data.rows())
        throw ParameterError("mix: shape mismatch between A and S");
    return MixtureMatrix{A.data * S.data};
}

}  // namespace pica::signal
