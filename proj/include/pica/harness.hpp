#pragma once

#include "pica/metrics.hpp"
#include "pica/netsim.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace pica::harness {

struct ExperimentConfig {
    std::vector<netsim::Method> methods{netsim::Method::Pica, netsim::Method::FastIca};
    std::vector<int> nodes{0};
    std::vector<double> mu0{500.0};
    double alpha0 = 2.0;
    double tol = 1e-4;
    double p_break = 0.7;
    int max_iter = 200;
    int trials = 1;
    uint64_t seed = 1;
    bool synthetic = true;
    std::string wav_dir;
    Eigen::Index samples = 160000;
    double link_delay = 0.0;
    std::string out = "results.csv";
    bool emit_figures = false;
};

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline const char* csv_header() {
    return "method,k,mu0,alpha0,tol,p_break,trial_seed,t_p_seconds,weighted_work,"
           "server_share,mean_sdr,sdr_per_source,hops,error";
}

namespace detail {

inline std::string quote(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// hop:iterations:samples:exit:wall:scalar:cosine_distance, hops joined by ';'
inline std::string pack_hops(const std::vector<progressive::NodeReport>& reports) {
    std::string out;
    for (size_t i = 0; i < reports.size(); ++i) {
        const auto& r = reports[i];
        if (i) out += ';';
        out += std::to_string(r.hop) + ':' + std::to_string(r.iterations) + ':' +
               std::to_string(r.samples_used) + ':' + exit_reason_name(r.exit_reason) +
               ':' + fmt(r.wall_time) + ':' + fmt(r.final_scalar) + ':' +
               (r.cosine_distance ? fmt(*r.cosine_distance) : std::string("-"));
    }
    return out;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(cur);
    return parts;
}

// RFC-4180 line splitter (quotes, doubled quotes).
inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

}  // namespace detail

inline std::string csv_row(const netsim::TrialResult& r) {
    using detail::fmt;
    std::string sdrs;
    for (size_t i = 0; i < r.sdr_per_source.size(); ++i) {
        if (i) sdrs += ';';
        sdrs += fmt(r.sdr_per_source[i]);
    }
    std::string row;
    row += netsim::method_name(r.method);
    row += ',' + std::to_string(r.config.k);
    row += ',' + fmt(r.config.params.mu0);
    row += ',' + fmt(r.config.params.alpha0);
    row += ',' + fmt(r.config.params.tol);
    row += ',' + fmt(r.config.params.grad_threshold);
    row += ',' + std::to_string(r.trial_seed);
    row += ',' + fmt(r.total_processing_time);
    row += ',' + fmt(r.weighted_work());
    row += ',' + fmt(r.server_share());
    row += ',' + fmt(r.mean_sdr);
    row += ',' + detail::quote(sdrs);
    row += ',' + detail::quote(detail::pack_hops(r.node_reports));
    row += ',' + detail::quote(r.error);
    return row;
}

// Atomic write: temp file in the target directory, then rename.
inline void write_csv(const std::string& path,
                      const std::vector<netsim::TrialResult>& results) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream os(tmp);
        if (!os) throw FormatError("cannot write output file: " + tmp.string());
        os << csv_header() << '\n';
        for (const auto& r : results) os << csv_row(r) << '\n';
        if (!os) throw FormatError("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp);
        throw FormatError("cannot rename output into place: " + target.string());
    }
}

// Parsed-back CSV row, used by figure emission and the schema round-trip test.
struct CsvRow {
    std::string method;
    int k = 0;
    double mu0 = 0.0, alpha0 = 0.0, tol = 0.0, p_break = 0.0;
    uint64_t trial_seed = 0;
    double t_p_seconds = 0.0, weighted_work = 0.0, server_share = 0.0, mean_sdr = 0.0;
    std::vector<double> sdr_per_source;
    std::string hops;
    std::string error;
};

inline std::vector<CsvRow> read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open CSV: " + path);
    std::string line;
    if (!std::getline(in, line) || line != csv_header())
        throw FormatError(path + ":1: unexpected CSV header");
    std::vector<CsvRow> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() != 14)
            throw FormatError(path + ":" + std::to_string(lineno) +
                              ": expected 14 fields, got " + std::to_string(f.size()));
        CsvRow row;
        try {
            row.method = f[0];
            row.k = std::stoi(f[1]);
            row.mu0 = std::stod(f[2]);
            row.alpha0 = std::stod(f[3]);
            row.tol = std::stod(f[4]);
            row.p_break = std::stod(f[5]);
            row.trial_seed = std::stoull(f[6]);
            row.t_p_seconds = std::stod(f[7]);
            row.weighted_work = std::stod(f[8]);
            row.server_share = std::stod(f[9]);
            row.mean_sdr = std::stod(f[10]);
            if (!f[11].empty())
                for (const auto& s : detail::split(f[11], ';'))
                    row.sdr_per_source.push_back(std::stod(s));
            row.hops = f[12];
            row.error = f[13];
        } catch (const std::exception&) {
            throw FormatError(path + ":" + std::to_string(lineno) + ": malformed field");
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Figure data emission
// ---------------------------------------------------------------------------

namespace detail {

inline void write_series(const std::filesystem::path& path,
                         const std::map<double, std::vector<double>>& groups) {
    std::ofstream os(path);
    if (!os) throw FormatError("cannot write: " + path.string());
    os << "# x mean ci_low ci_high\n";
    for (const auto& [x, values] : groups) {
        const auto s = metrics::summarize(values);
        os << fmt(x) << ' ' << fmt(s.mean) << ' ' << fmt(s.ci95_low) << ' '
           << fmt(s.ci95_high) << '\n';
    }
}

}  // namespace detail

// Four plot-ready data files next to the CSV: processing time vs node count,
// processing time vs mu0, SDR per method, and per-hop work for the deepest
// chain.
inline void emit_figures(const std::string& csv_path) {
    const auto rows = read_csv(csv_path);
    if (rows.empty()) throw FormatError(csv_path + ": no data rows");
    const auto dir = std::filesystem::path(csv_path).parent_path();

    std::map<double, std::vector<double>> by_k, by_mu0;
    std::map<std::string, std::vector<double>> by_method;
    int max_k = 0;
    for (const auto& r : rows) {
        if (!r.error.empty()) continue;
        by_method[r.method].push_back(r.mean_sdr);
        if (r.method == "pica") {
            by_k[static_cast<double>(r.k)].push_back(r.t_p_seconds);
            by_mu0[r.mu0].push_back(r.t_p_seconds);
            max_k = std::max(max_k, r.k);
        }
    }
    detail::write_series(dir / "time_vs_nodes.dat", by_k);
    detail::write_series(dir / "time_vs_mu0.dat", by_mu0);

    {
        std::ofstream os(dir / "sdr_vs_method.dat");
        if (!os) throw FormatError("cannot write sdr_vs_method.dat");
        os << "# method mean ci_low ci_high\n";
        for (const auto& [m, values] : by_method) {
            const auto s = metrics::summarize(values);
            os << m << ' ' << detail::fmt(s.mean) << ' ' << detail::fmt(s.ci95_low)
               << ' ' << detail::fmt(s.ci95_high) << '\n';
        }
    }

    // Per-hop weighted work for the deepest pica chain.
    std::map<double, std::vector<double>> by_hop;
    for (const auto& r : rows) {
        if (r.method != "pica" || r.k != max_k || !r.error.empty()) continue;
        for (const auto& hop : detail::split(r.hops, ';')) {
            if (hop.empty()) continue;
            const auto parts = detail::split(hop, ':');
            if (parts.size() != 7) throw FormatError(csv_path + ": malformed hop field");
            by_hop[std::stod(parts[0])].push_back(std::stod(parts[1]) *
                                                  std::stod(parts[2]));
        }
    }
    detail::write_series(dir / "node_costs.dat", by_hop);
}

// ---------------------------------------------------------------------------
// CLI
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<netsim::Method> parse_methods(const std::string& csv) {
    std::vector<netsim::Method> out;
    for (const auto& tok : split(csv, ',')) {
        if (tok == "pica") out.push_back(netsim::Method::Pica);
        else if (tok == "fastica") out.push_back(netsim::Method::FastIca);
        else throw ParameterError("unknown method: " + tok);
    }
    if (out.empty()) throw ParameterError("no methods given");
    return out;
}

inline void apply_config_file(ExperimentConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot read config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("invalid JSON in " + path + ": " + e.what());
    }
    if (j.contains("method")) {
        std::string methods;
        for (const auto& m : j["method"]) methods += (methods.empty() ? "" : ",") +
                                                     m.get<std::string>();
        cfg.methods = parse_methods(methods);
    }
    if (j.contains("nodes")) cfg.nodes = j["nodes"].get<std::vector<int>>();
    if (j.contains("mu0")) cfg.mu0 = j["mu0"].get<std::vector<double>>();
    if (j.contains("alpha0")) cfg.alpha0 = j["alpha0"].get<double>();
    if (j.contains("tol")) cfg.tol = j["tol"].get<double>();
    if (j.contains("p-break")) cfg.p_break = j["p-break"].get<double>();
    if (j.contains("max-iter")) cfg.max_iter = j["max-iter"].get<int>();
    if (j.contains("trials")) cfg.trials = j["trials"].get<int>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<uint64_t>();
    if (j.contains("synthetic")) cfg.synthetic = j["synthetic"].get<bool>();
    if (j.contains("wav-dir")) {
        cfg.wav_dir = j["wav-dir"].get<std::string>();
        cfg.synthetic = false;
    }
    if (j.contains("samples")) cfg.samples = j["samples"].get<Eigen::Index>();
    if (j.contains("link-delay")) cfg.link_delay = j["link-delay"].get<double>();
    if (j.contains("out")) cfg.out = j["out"].get<std::string>();
}

inline std::vector<std::string> wav_files_in(const std::string& dir) {
    namespace fs = std::filesystem;
    std::vector<std::string> paths;
    if (!fs::is_directory(dir)) throw IngestionError("not a directory: " + dir);
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".wav")
            paths.push_back(entry.path().string());
    std::sort(paths.begin(), paths.end());
    return paths;
}

}  // namespace detail

inline int run_cli(int argc, const char* const* argv) {
    ExperimentConfig cfg;
    std::string method_csv, config_path;
    std::vector<int> nodes;
    std::vector<double> mu0;

    CLI::App app{"progressive blind-source-separation benchmark"};
    app.add_option("--method", method_csv, "comma list of pica,fastica");
    app.add_option("--nodes", nodes, "intermediate node counts")->delimiter(',');
    app.add_option("--mu0", mu0, "initial sampling steps")->delimiter(',');
    auto* o_alpha0 = app.add_option("--alpha0", cfg.alpha0, "initial growth factor");
    auto* o_tol = app.add_option("--tol", cfg.tol, "convergence tolerance");
    auto* o_pbreak = app.add_option("--p-break", cfg.p_break, "slow-gradient parameter");
    auto* o_maxiter = app.add_option("--max-iter", cfg.max_iter, "per-node iteration cap");
    auto* o_trials = app.add_option("--trials", cfg.trials, "trials per configuration");
    auto* o_seed = app.add_option("--seed", cfg.seed, "base seed");
    auto* o_synth = app.add_flag("--synthetic", "use synthetic sources");
    auto* o_wav = app.add_option("--wav-dir", cfg.wav_dir, "directory of mono WAV files");
    auto* o_samples = app.add_option("--samples", cfg.samples, "samples per source (m)");
    auto* o_delay = app.add_option("--link-delay", cfg.link_delay, "seconds per hop");
    auto* o_out = app.add_option("--out", cfg.out, "results CSV path");
    app.add_option("--config", config_path, "JSON config file (CLI overrides)");
    auto* o_figures = app.add_flag("--emit-figures", "write plot data files");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (!config_path.empty()) {
            ExperimentConfig file_cfg;
            detail::apply_config_file(file_cfg, config_path);
            // CLI values override file values.
            if (method_csv.empty()) cfg.methods = file_cfg.methods;
            if (nodes.empty()) nodes = file_cfg.nodes;
            if (mu0.empty()) mu0 = file_cfg.mu0;
            if (!o_alpha0->count()) cfg.alpha0 = file_cfg.alpha0;
            if (!o_tol->count()) cfg.tol = file_cfg.tol;
            if (!o_pbreak->count()) cfg.p_break = file_cfg.p_break;
            if (!o_maxiter->count()) cfg.max_iter = file_cfg.max_iter;
            if (!o_trials->count()) cfg.trials = file_cfg.trials;
            if (!o_seed->count()) cfg.seed = file_cfg.seed;
            if (!o_synth->count() && !o_wav->count()) {
                cfg.synthetic = file_cfg.synthetic;
                cfg.wav_dir = file_cfg.wav_dir;
            }
            if (!o_samples->count()) cfg.samples = file_cfg.samples;
            if (!o_delay->count()) cfg.link_delay = file_cfg.link_delay;
            if (!o_out->count()) cfg.out = file_cfg.out;
        }
        if (!method_csv.empty()) cfg.methods = detail::parse_methods(method_csv);
        if (!nodes.empty()) cfg.nodes = nodes;
        if (!mu0.empty()) cfg.mu0 = mu0;
        if (o_wav->count()) cfg.synthetic = false;
        cfg.emit_figures = o_figures->count() > 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 3;
    }

    try {
        netsim::DatasetSpec spec;
        spec.synthetic = cfg.synthetic;
        spec.m = cfg.samples;
        if (!cfg.synthetic) spec.wav_paths = detail::wav_files_in(cfg.wav_dir);

        std::vector<netsim::ChainConfig> grid;
        for (int k : cfg.nodes)
            for (double m0 : cfg.mu0) {
                netsim::ChainConfig c;
                c.k = k;
                c.params.tol = cfg.tol;
                c.params.grad_threshold = cfg.p_break;
                c.params.max_local_iter = cfg.max_iter;
                c.params.mu0 = m0;
                c.params.alpha0 = cfg.alpha0;
                c.link_delay = cfg.link_delay;
                c.seed = cfg.seed;
                c.validate();
                grid.push_back(c);
            }

        std::vector<netsim::TrialResult> all;
        for (auto method : cfg.methods) {
            auto batch = netsim::run_scenario(method, spec, grid, cfg.trials);
            all.insert(all.end(), batch.begin(), batch.end());
        }
        write_csv(cfg.out, all);

        // Summary table per (method, k, mu0).
        std::map<std::string, std::vector<const netsim::TrialResult*>> groups;
        for (const auto& r : all) {
            if (!r.error.empty()) {
                std::fprintf(stderr, "trial seed %llu failed: %s\n",
                             static_cast<unsigned long long>(r.trial_seed),
                             r.error.c_str());
                continue;
            }
            std::ostringstream key;
            key << netsim::method_name(r.method) << " k=" << r.config.k
                << " mu0=" << r.config.params.mu0;
            groups[key.str()].push_back(&r);
        }
        std::printf("%-28s %10s %12s %10s\n", "configuration", "trials", "t_p[ms]",
                    "SDR[dB]");
        for (const auto& [key, rs] : groups) {
            std::vector<double> tp, sdrv;
            for (const auto* r : rs) {
                tp.push_back(r->total_processing_time * 1e3);
                sdrv.push_back(r->mean_sdr);
            }
            const auto st = metrics::summarize(tp);
            const auto ss = metrics::summarize(sdrv);
            std::printf("%-28s %10zu %12.3f %10.2f\n", key.c_str(), rs.size(), st.mean,
                        ss.mean);
        }

        if (cfg.emit_figures) emit_figures(cfg.out);
    } catch (const FormatError& e) {
        std::fprintf(stderr, "output error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}

}  // namespace pica::harness
