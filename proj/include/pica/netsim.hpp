#pragma once

#include "pica/ica.hpp"
#include "pica/metrics.hpp"
#include "pica/progressive.hpp"
#include "pica/signal.hpp"
#include "pica/types.hpp"

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace pica::netsim {

enum class Method { Pica, FastIca };

inline const char* method_name(Method m) {
    return m == Method::Pica ? "pica" : "fastica";
}

struct ChainConfig {
    int k = 0;  // intermediate node count
    progressive::PicaParams params;
    double link_delay = 0.0;  // seconds per hop
    uint64_t seed = 0;

    void validate() const {
        if (k < 0) throw ParameterError("ChainConfig: k must be >= 0");
        if (link_delay < 0.0) throw ParameterError("ChainConfig: link_delay >= 0");
        params.validate();
    }
};

struct TrialResult {
    std::vector<progressive::NodeReport> node_reports;
    double total_processing_time = 0.0;  // t_p
    std::vector<double> sdr_per_source;
    double mean_sdr = 0.0;
    Method method = Method::Pica;
    uint64_t trial_seed = 0;
    ChainConfig config;
    std::string error;  // nonempty when the trial failed

    double weighted_work() const {
        double w = 0.0;
        for (const auto& r : node_reports)
            w += static_cast<double>(r.iterations) * static_cast<double>(r.samples_used);
        return w;
    }

    // Fraction of weighted work done on the final (server) hop.
    double server_share() const {
        const double total = weighted_work();
        if (total == 0.0 || node_reports.empty()) return 0.0;
        const auto& last = node_reports.back();
        return static_cast<double>(last.iterations) *
               static_cast<double>(last.samples_used) / total;
    }
};

// Data for one trial: either synthetic sources or a WAV directory, plus the
// mixing draw. Seeds for sources and A are decorrelated from the trial seed.
struct DatasetSpec {
    Eigen::Index n = 4;
    Eigen::Index m = 160000;
    bool synthetic = true;
    std::vector<std::string> wav_paths;  // used when synthetic == false
};

namespace detail {

inline uint64_t derive_seed(uint64_t seed, uint64_t stream) {
    // splitmix64 over (seed, stream)
    uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace detail

// One end-to-end pass over the forwarding chain: ingress whitening, k
// intermediate hops (short-circuited once mu would drop below 1), then the
// server finish. Ground truth A, when supplied, adds per-hop cosine distances.
inline TrialResult run_chain(const MixtureMatrix& X, const SourceMatrix& S_truth,
                             const MixingMatrix& A, const ChainConfig& cfg) {
    cfg.validate();
    TrialResult result;
    result.method = Method::Pica;
    result.trial_seed = cfg.seed;
    result.config = cfg;

    progressive::SeparationState state;
    state.W = ica::random_orthonormal(X.data.rows(), cfg.seed);
    state.mu = cfg.params.mu0;
    state.alpha = cfg.params.alpha0;
    state.hop = 0;

    // Whitening is fitted once at ingress from the full mixture and carried in
    // the state; every hop's W then acts in the same basis. Fitting it from
    // the first subset leaves the full data visibly non-white, and the final
    // full-data iteration stops converging.
    state.whitening = ica::fit_whitening(X);

    for (int hop = 1; hop <= cfg.k; ++hop) {
        if (progressive::update_step(state.mu, state.alpha) < 1.0) break;
        auto [next, report] = progressive::node_process(X, state, cfg.params);
        report.cosine_distance =
            metrics::cosine_distance(next.W.W * state.whitening.V, A);
        state = std::move(next);
        result.node_reports.push_back(report);
    }

    auto [W, s_hat, server_report] = progressive::last_node_process(X, state, cfg.params);
    server_report.cosine_distance = metrics::cosine_distance(W.W * state.whitening.V, A);
    result.node_reports.push_back(server_report);

    const auto scores = metrics::sdr(s_hat, S_truth);
    result.sdr_per_source = scores.per_source;
    result.mean_sdr = scores.mean;

    double compute = 0.0;
    for (const auto& r : result.node_reports) compute += r.wall_time;
    result.total_processing_time = compute + cfg.k * cfg.link_delay;
    return result;
}

// Centralized FastICA baseline packaged as a single-hop TrialResult so both
// methods share scoring and CSV paths.
inline TrialResult run_baseline(const MixtureMatrix& X, const SourceMatrix& S_truth,
                                const ChainConfig& cfg) {
    cfg.validate();
    TrialResult result;
    result.method = Method::FastIca;
    result.trial_seed = cfg.seed;
    result.config = cfg;

    const auto start = std::chrono::steady_clock::now();
    const auto fit = ica::fastica(X, cfg.params.tol, 10 * cfg.params.max_local_iter,
                                  cfg.seed);
    const SourceMatrix s_hat = ica::reconstruct(fit.W, fit.whitening, X);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    progressive::NodeReport report;
    report.hop = 1;
    report.exit_reason = progressive::ExitReason::LastNodeConverged;
    report.iterations = fit.iterations;
    report.samples_used = X.data.cols();
    report.wall_time = wall;
    result.node_reports.push_back(report);

    const auto scores = metrics::sdr(s_hat, S_truth);
    result.sdr_per_source = scores.per_source;
    result.mean_sdr = scores.mean;
    result.total_processing_time = wall;
    return result;
}

// Builds the (sources, A, X) triple for a trial seed; both methods see the
// same data for a given seed.
struct TrialData {
    SourceMatrix S;
    MixingMatrix A;
    MixtureMatrix X;
};

inline TrialData make_trial_data(const DatasetSpec& spec, uint64_t seed) {
    TrialData d;
    if (spec.synthetic) {
        d.S = signal::generate_sources(spec.n, spec.m, detail::derive_seed(seed, 1));
    } else {
        d.S = signal::load_wav_sources(spec.wav_paths);
    }
    d.A = signal::generate_mixing_matrix(d.S.data.rows(), detail::derive_seed(seed, 2));
    d.X = signal::mix(d.A, d.S);
    return d;
}

// Sweep: every config x trial, fresh seeded data, deterministic result order.
// Trial failures are recorded on the result, not thrown. PICA_THREADS caps
// parallelism (default 1, keeping wall-time measurements undistorted).
inline std::vector<TrialResult> run_scenario(Method method, const DatasetSpec& spec,
                                             const std::vector<ChainConfig>& cfg_grid,
                                             int trials) {
    if (trials < 1) throw ParameterError("run_scenario: trials must be >= 1");

    struct Job {
        ChainConfig cfg;
    };
    std::vector<Job> jobs;
    for (const auto& base : cfg_grid)
        for (int t = 0; t < trials; ++t) {
            ChainConfig cfg = base;
            cfg.seed = base.seed + static_cast<uint64_t>(t);
            jobs.push_back({cfg});
        }

    std::vector<TrialResult> results(jobs.size());
    auto run_one = [&](size_t i) {
        const ChainConfig& cfg = jobs[i].cfg;
        try {
            const TrialData d = make_trial_data(spec, cfg.seed);
            results[i] = method == Method::Pica ? run_chain(d.X, d.S, d.A, cfg)
                                                : run_baseline(d.X, d.S, cfg);
        } catch (const std::exception& e) {
            results[i].method = method;
            results[i].trial_seed = cfg.seed;
            results[i].config = cfg;
            results[i].error = e.what();
        }
    };

    int threads = 1;
    if (const char* env = std::getenv("PICA_THREADS")) {
        threads = std::max(1, std::atoi(env));
    }
    if (threads == 1) {
        for (size_t i = 0; i < jobs.size(); ++i) run_one(i);
    } else {
        std::atomic<size_t> cursor{0};
        std::vector<std::thread> pool;
        const auto nthreads = std::min<size_t>(static_cast<size_t>(threads), jobs.size());
        for (size_t w = 0; w < nthreads; ++w) {
            pool.emplace_back([&] {
                for (size_t i = cursor.fetch_add(1); i < jobs.size();
                     i = cursor.fetch_add(1))
                    run_one(i);
            });
        }
        for (auto& th : pool) th.join();
    }
    return results;
}

}  // namespace pica::netsim
