#ifndef REGIMEKIT_PIPELINE_HPP
#define REGIMEKIT_PIPELINE_HPP

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "regimekit/bds.hpp"
#include "regimekit/csv.hpp"
#include "regimekit/errors.hpp"
#include "regimekit/hhsa.hpp"
#include "regimekit/ingest.hpp"
#include "regimekit/metrics.hpp"
#include "regimekit/regimes.hpp"
#include "regimekit/vlmc.hpp"

namespace regimekit {

inline constexpr const char* kVersion = "0.1.0";

struct PipelineConfig {
    std::string data_dir = "data";
    std::vector<std::string> developed;
    std::vector<std::string> developing;
    double threshold_a = 1.0;
    double threshold_b = 6.0;
    PruneConfig prune;
    SiftOptions sift;
    int holo_bins = 64;
    int representative_count = 2;
    std::vector<double> sensitivity_a{0.75, 1.0, 1.25};
    std::vector<double> sensitivity_b{4.5, 6.0, 7.5};
    std::string output_dir = "out";
    std::string raw_text;  // config file content, hashed into the manifest

    std::vector<std::string> all_tickers() const {
        std::vector<std::string> t = developed;
        t.insert(t.end(), developing.begin(), developing.end());
        return t;
    }

    std::vector<std::pair<double, double>> sensitivity_grid() const {
        std::vector<std::pair<double, double>> g;
        for (double a : sensitivity_a)
            for (double b : sensitivity_b)
                if (a < b) g.emplace_back(a, b);
        return g;
    }

    void validate() const {
        if (developed.empty() && developing.empty())
            throw ConfigError("config: no tickers configured");
        if (!(threshold_a < threshold_b)) throw ConfigError("config: thresholds need a < b");
        if (prune.max_depth < 1) throw ConfigError("config: prune.max_depth must be >= 1");
        if (holo_bins < 2) throw ConfigError("config: hhsa.bins must be >= 2");
        if (representative_count < 1)
            throw ConfigError("config: regimes.representative_count must be >= 1");
    }

    // Keep only tickers named in `keep` (group membership preserved).
    void filter_tickers(const std::vector<std::string>& keep) {
        auto member = [&](const std::string& t) {
            return std::find(keep.begin(), keep.end(), t) != keep.end();
        };
        std::erase_if(developed, [&](const std::string& t) { return !member(t); });
        std::erase_if(developing, [&](const std::string& t) { return !member(t); });
    }
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            if (!csv::trim(cur).empty()) out.push_back(csv::trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!csv::trim(cur).empty()) out.push_back(csv::trim(cur));
    return out;
}

inline std::vector<double> split_doubles(const std::string& s) {
    std::vector<double> out;
    for (const auto& item : split_list(s)) {
        double v;
        if (!csv::parse_double(item, v)) throw ConfigError("config: bad number '" + item + "'");
        out.push_back(v);
    }
    return out;
}

inline double to_double(const std::string& v, const std::string& key) {
    double d;
    if (!csv::parse_double(v, d)) throw ConfigError("config: bad number for " + key);
    return d;
}

inline int to_int(const std::string& v, const std::string& key) {
    double d = to_double(v, key);
    return static_cast<int>(d);
}

}  // namespace detail

// Flat key-value config with [section] headers and # comments.
inline PipelineConfig parse_config(const std::string& text) {
    PipelineConfig cfg;
    cfg.raw_text = text;
    std::istringstream in(text);
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = csv::trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.front() == '[' && t.back() == ']') {
            section = csv::lower(csv::trim(t.substr(1, t.size() - 2)));
            continue;
        }
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = csv::lower(csv::trim(t.substr(0, eq)));
        std::string value = csv::trim(t.substr(eq + 1));
        std::string full = section + "." + key;

        if (full == "data.dir") cfg.data_dir = value;
        else if (full == "data.developed") cfg.developed = detail::split_list(value);
        else if (full == "data.developing") cfg.developing = detail::split_list(value);
        else if (full == "thresholds.a") cfg.threshold_a = detail::to_double(value, full);
        else if (full == "thresholds.b") cfg.threshold_b = detail::to_double(value, full);
        else if (full == "prune.cutoff") cfg.prune.cutoff = detail::to_double(value, full);
        else if (full == "prune.max_depth") cfg.prune.max_depth = detail::to_int(value, full);
        else if (full == "prune.min_count") cfg.prune.min_count = detail::to_int(value, full);
        else if (full == "emd.s_number") cfg.sift.s_number = detail::to_int(value, full);
        else if (full == "emd.max_sifts") cfg.sift.max_sifts = detail::to_int(value, full);
        else if (full == "emd.max_imfs") cfg.sift.max_imfs = detail::to_int(value, full);
        else if (full == "emd.nbsym") cfg.sift.nbsym = detail::to_int(value, full);
        else if (full == "hhsa.bins") cfg.holo_bins = detail::to_int(value, full);
        else if (full == "regimes.representative_count")
            cfg.representative_count = detail::to_int(value, full);
        else if (full == "sensitivity.a_grid") cfg.sensitivity_a = detail::split_doubles(value);
        else if (full == "sensitivity.b_grid") cfg.sensitivity_b = detail::split_doubles(value);
        else if (full == "output.dir") cfg.output_dir = value;
        else throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + full + "'");
    }
    cfg.validate();
    return cfg;
}

inline PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

struct RunManifest {
    std::string version = kVersion;
    std::string config_hash;
    std::vector<std::pair<std::string, double>> timings;       // stage, seconds
    std::map<std::string, std::string> files;                  // relative path -> fnv64 hex
    std::vector<std::string> warnings;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["version"] = version;
        j["config_hash"] = config_hash;
        j["timings"] = nlohmann::json::array();
        for (const auto& [stage, sec] : timings)
            j["timings"].push_back({{"stage", stage}, {"seconds", sec}});
        j["files"] = files;
        j["warnings"] = warnings;
        return j;
    }
};

namespace detail {

inline std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[19];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// Atomic file sink under one output root; every write lands in the manifest.
class OutputWriter {
public:
    OutputWriter(std::filesystem::path root, RunManifest& manifest)
        : root_(std::move(root)), manifest_(manifest) {}

    void write(const std::string& relpath, const std::string& content) {
        std::filesystem::path target = root_ / relpath;
        std::filesystem::create_directories(target.parent_path());
        std::filesystem::path tmp = target;
        tmp += ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw DataError("cannot write '" + tmp.string() + "'");
            out << content;
        }
        std::filesystem::rename(tmp, target);
        manifest_.files[relpath] = fnv1a_hex(content);
    }

    std::string read(const std::string& relpath, const std::string& needed_by) const {
        std::filesystem::path p = root_ / relpath;
        std::ifstream in(p, std::ios::binary);
        if (!in)
            throw MissingStageOutputError("stage '" + needed_by + "' needs missing upstream file '" +
                                          relpath + "'");
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    csv::Table read_csv(const std::string& relpath, const std::string& needed_by) const {
        std::filesystem::path p = root_ / relpath;
        if (!std::filesystem::exists(p))
            throw MissingStageOutputError("stage '" + needed_by + "' needs missing upstream file '" +
                                          relpath + "'");
        return csv::read_file(p.string());
    }

    nlohmann::json read_json(const std::string& relpath, const std::string& needed_by) const {
        return nlohmann::json::parse(read(relpath, needed_by));
    }

    bool exists(const std::string& relpath) const {
        return std::filesystem::exists(root_ / relpath);
    }

    const std::filesystem::path& root() const { return root_; }

    void warn(const std::string& msg) { manifest_.warnings.push_back(msg); }

private:
    std::filesystem::path root_;
    RunManifest& manifest_;
};

inline std::string regime_slug(Regime r) {
    switch (r) {
        case Regime::Extreme: return "extreme";
        case Regime::High: return "high";
        default: return "normal";
    }
}

inline nlohmann::json years_to_json(const RegimeYears& ry) {
    nlohmann::json j;
    j["extreme"] = std::vector<int>(ry.extreme.begin(), ry.extreme.end());
    j["high"] = std::vector<int>(ry.high.begin(), ry.high.end());
    j["normal"] = std::vector<int>(ry.normal.begin(), ry.normal.end());
    return j;
}

inline RegimeYears years_from_json(const nlohmann::json& j) {
    RegimeYears ry;
    for (int y : j.at("extreme")) ry.extreme.insert(y);
    for (int y : j.at("high")) ry.high.insert(y);
    for (int y : j.at("normal")) ry.normal.insert(y);
    return ry;
}

// ---- stage: ingest ----

inline void stage_ingest(const PipelineConfig& cfg, OutputWriter& out) {
    for (const auto& ticker : cfg.all_tickers()) {
        std::filesystem::path src = std::filesystem::path(cfg.data_dir) / (ticker + ".csv");
        if (!std::filesystem::exists(src))
            throw MissingInputError("missing input for ticker " + ticker + ": " + src.string());
        PriceSeries prices = load_prices(src.string(), ticker);
        ReturnSeries returns = compute_log_returns(prices);
        QuintileCutoffs cut = compute_quintile_cutoffs(returns);
        StateSequence states = discretize_returns(returns, cut);

        std::ostringstream rcsv;
        rcsv << "date,r\n";
        for (std::size_t i = 0; i < returns.r.size(); ++i)
            rcsv << returns.dates[i].str() << "," << csv::fmt_double(returns.r[i]) << "\n";
        out.write("ingest/" + ticker + ".returns.csv", rcsv.str());

        std::ostringstream scsv;
        scsv << "date,state\n";
        for (std::size_t i = 0; i < states.states.size(); ++i)
            scsv << states.dates[i].str() << "," << to_string(states.states[i]) << "\n";
        out.write("ingest/" + ticker + ".states.csv", scsv.str());

        nlohmann::json jc;
        jc["ticker"] = ticker;
        jc["q20"] = cut.q20;
        jc["q40"] = cut.q40;
        jc["q60"] = cut.q60;
        jc["q80"] = cut.q80;
        jc["observations"] = returns.r.size();
        out.write("ingest/" + ticker + ".cutoffs.json", jc.dump(2) + "\n");
    }
}

inline ReturnSeries read_returns(const OutputWriter& out, const std::string& ticker,
                                 const std::string& needed_by) {
    csv::Table t = out.read_csv("ingest/" + ticker + ".returns.csv", needed_by);
    ReturnSeries r;
    for (const auto& row : t.rows) {
        r.dates.push_back(Date::parse(row.at(0)));
        double v;
        if (!csv::parse_double(row.at(1), v))
            throw DataError("bad return value for " + ticker);
        r.r.push_back(v);
    }
    return r;
}

// ---- stage: bds ----

inline void stage_bds(const PipelineConfig& cfg, OutputWriter& out) {
    std::ostringstream csvout;
    csvout << "ticker,m,epsilon,statistic,p_value\n";
    for (const auto& ticker : cfg.all_tickers()) {
        ReturnSeries r = read_returns(out, ticker, "bds");
        for (const BdsResult& res : bds_suite(r)) {
            csvout << ticker << "," << res.m << "," << csv::fmt_double(res.epsilon) << ","
                   << csv::fmt_double(res.statistic) << "," << csv::fmt_double(res.p_value) << "\n";
        }
    }
    out.write("bds/bds.csv", csvout.str());
}

// ---- stage: regimes ----

inline void stage_regimes(const PipelineConfig& cfg, OutputWriter& out) {
    for (const auto& ticker : cfg.all_tickers()) {
        ReturnSeries r = read_returns(out, ticker, "regimes");
        Decomposition d = emd_decompose(r.r, cfg.sift);
        if (d.imfs.empty()) {
            out.warn("regimes: " + ticker + " produced no IMFs; skipped");
            continue;
        }
        int fallbacks = 0;
        std::vector<InstantSeries> inst = first_layer_quadrature(d, cfg.sift, &fallbacks);
        if (fallbacks > 0)
            out.warn("regimes: " + ticker + " used " + std::to_string(fallbacks) +
                     " quadrature fallback(s)");
        int clamped = 0;
        for (const auto& s : inst) clamped += s.clamped;
        if (clamped > 0)
            out.warn("regimes: " + ticker + " clamped " + std::to_string(clamped) +
                     " negative instantaneous frequencies");

        EnergySeries energy = instantaneous_energy(inst, r.dates);
        RegimeLabeling labels = classify_regimes(energy, cfg.threshold_a, cfg.threshold_b);
        RegimeYears years = regime_years(labels);

        std::ostringstream dcsv;
        for (std::size_t j = 0; j < d.imfs.size(); ++j) dcsv << "imf_" << (j + 1) << ",";
        dcsv << "residual\n";
        for (std::size_t i = 0; i < r.r.size(); ++i) {
            for (const auto& imf : d.imfs) dcsv << csv::fmt_double(imf[i]) << ",";
            dcsv << csv::fmt_double(d.residual[i]) << "\n";
        }
        out.write("regimes/" + ticker + ".decomp.csv", dcsv.str());

        nlohmann::json sidecar;
        sidecar["ticker"] = ticker;
        sidecar["imfs"] = d.imfs.size();
        sidecar["sift"] = {{"s_number", cfg.sift.s_number},
                           {"max_sifts", cfg.sift.max_sifts},
                           {"max_imfs", cfg.sift.max_imfs},
                           {"nbsym", cfg.sift.nbsym}};
        sidecar["quadrature_fallbacks"] = fallbacks;
        sidecar["clamped_frequencies"] = clamped;
        out.write("regimes/" + ticker + ".decomp.json", sidecar.dump(2) + "\n");

        std::ostringstream qcsv;
        for (std::size_t j = 0; j < inst.size(); ++j) {
            qcsv << "amp_" << (j + 1) << ",freq_" << (j + 1);
            qcsv << (j + 1 < inst.size() ? "," : "\n");
        }
        for (std::size_t i = 0; i < r.r.size(); ++i) {
            for (std::size_t j = 0; j < inst.size(); ++j) {
                qcsv << csv::fmt_double(inst[j].amplitude[i]) << ","
                     << csv::fmt_double(inst[j].frequency[i]);
                qcsv << (j + 1 < inst.size() ? "," : "\n");
            }
        }
        out.write("regimes/" + ticker + ".dq.csv", qcsv.str());

        std::ostringstream lcsv;
        lcsv << "date,energy,label\n";
        for (std::size_t i = 0; i < energy.e.size(); ++i)
            lcsv << labels.dates[i].str() << "," << csv::fmt_double(energy.e[i]) << ","
                 << to_string(labels.labels[i]) << "\n";
        out.write("regimes/" + ticker + ".labels.csv", lcsv.str());

        nlohmann::json jy = years_to_json(years);
        jy["ticker"] = ticker;
        jy["tau1"] = labels.tau1;
        jy["tau2"] = labels.tau2;
        jy["mu"] = energy.mu;
        jy["sigma"] = energy.sigma;
        out.write("regimes/" + ticker + ".years.json", jy.dump(2) + "\n");
    }
}

inline EnergySeries read_energy(const OutputWriter& out, const std::string& ticker,
                                const std::string& needed_by) {
    csv::Table t = out.read_csv("regimes/" + ticker + ".labels.csv", needed_by);
    EnergySeries es;
    for (const auto& row : t.rows) {
        es.dates.push_back(Date::parse(row.at(0)));
        double v;
        if (!csv::parse_double(row.at(1), v)) throw DataError("bad energy value for " + ticker);
        es.e.push_back(v);
    }
    es.mu = mean(es.e);
    es.sigma = sample_sd(es.e);
    return es;
}

// ---- stage: sensitivity ----

inline void stage_sensitivity(const PipelineConfig& cfg, OutputWriter& out) {
    for (const auto& ticker : cfg.all_tickers()) {
        EnergySeries es = read_energy(out, ticker, "sensitivity");
        SensitivityReport rep = threshold_sensitivity(es, cfg.sensitivity_grid());
        nlohmann::json j;
        j["ticker"] = ticker;
        j["baseline"] = years_to_json(rep.baseline);
        j["grid"] = nlohmann::json::array();
        for (const auto& e : rep.entries) {
            nlohmann::json je;
            je["a"] = e.a;
            je["b"] = e.b;
            je["years"] = years_to_json(e.years);
            je["jaccard"] = {{"extreme", e.jaccard_extreme},
                             {"high", e.jaccard_high},
                             {"normal", e.jaccard_normal}};
            j["grid"].push_back(je);
        }
        out.write("sensitivity/" + ticker + ".sensitivity.json", j.dump(2) + "\n");
    }
}

// ---- group helpers ----

struct GroupSpec {
    std::string name;
    const std::vector<std::string>* tickers;
};

inline std::vector<GroupSpec> groups_of(const PipelineConfig& cfg) {
    std::vector<GroupSpec> g;
    if (!cfg.developed.empty()) g.push_back({"developed", &cfg.developed});
    if (!cfg.developing.empty()) g.push_back({"developing", &cfg.developing});
    return g;
}

inline std::map<Regime, std::vector<int>> group_representative_years(
    const PipelineConfig& cfg, const OutputWriter& out, const GroupSpec& group,
    const std::string& needed_by) {
    std::vector<RegimeYears> years;
    for (const auto& ticker : *group.tickers)
        years.push_back(years_from_json(out.read_json("regimes/" + ticker + ".years.json", needed_by)));
    return representative_years(years, cfg.representative_count);
}

// Year used for an index's per-regime profile: the earliest group
// representative year inside the index's own set for that regime, falling
// back to the index's earliest own year.
inline int pick_profile_year(const std::vector<int>& rep_years, const std::set<int>& own) {
    for (int y : rep_years)
        if (own.count(y)) return y;
    if (!own.empty()) return *own.begin();
    return 0;
}

// ---- stage: hhsa ----

inline void stage_hhsa(const PipelineConfig& cfg, OutputWriter& out) {
    std::ostringstream profiles;
    profiles << "ticker,regime,pame,wc95,wam95\n";

    for (const GroupSpec& group : groups_of(cfg)) {
        auto rep = group_representative_years(cfg, out, group, "hhsa");
        for (const auto& ticker : *group.tickers) {
            // rebuild decomposition and first-layer quadrature from upstream files
            csv::Table dtab = out.read_csv("regimes/" + ticker + ".decomp.csv", "hhsa");
            std::size_t cols = dtab.header.size();
            Decomposition d;
            d.imfs.assign(cols - 1, {});
            for (const auto& row : dtab.rows) {
                for (std::size_t j = 0; j + 1 < cols; ++j) {
                    double v;
                    if (!csv::parse_double(row.at(j), v)) throw DataError("bad decomp value");
                    d.imfs[j].push_back(v);
                }
                double res;
                if (!csv::parse_double(row.at(cols - 1), res)) throw DataError("bad residual value");
                d.residual.push_back(res);
            }

            csv::Table qtab = out.read_csv("regimes/" + ticker + ".dq.csv", "hhsa");
            std::vector<InstantSeries> first(d.imfs.size());
            for (const auto& row : qtab.rows) {
                for (std::size_t j = 0; j < first.size(); ++j) {
                    double a, f;
                    if (!csv::parse_double(row.at(2 * j), a) ||
                        !csv::parse_double(row.at(2 * j + 1), f))
                        throw DataError("bad dq value");
                    first[j].amplitude.push_back(a);
                    first[j].frequency.push_back(f);
                }
            }

            csv::Table ltab = out.read_csv("regimes/" + ticker + ".labels.csv", "hhsa");
            std::vector<Date> dates;
            for (const auto& row : ltab.rows) dates.push_back(Date::parse(row.at(0)));

            RegimeYears own =
                years_from_json(out.read_json("regimes/" + ticker + ".years.json", "hhsa"));

            SecondLayer sl = second_layer(d, cfg.sift);
            if (sl.dq_fallbacks > 0)
                out.warn("hhsa: " + ticker + " used " + std::to_string(sl.dq_fallbacks) +
                         " quadrature fallback(s)");

            for (Regime regime : {Regime::Extreme, Regime::High, Regime::Normal}) {
                int year = pick_profile_year(rep[regime], own.of(regime));
                if (year == 0) {
                    out.warn("hhsa: " + ticker + " has no " + std::string(to_string(regime)) +
                             " year; profile skipped");
                    continue;
                }
                std::size_t begin = dates.size(), end = 0;
                for (std::size_t i = 0; i < dates.size(); ++i) {
                    if (dates[i].year == year) {
                        begin = std::min(begin, i);
                        end = std::max(end, i + 1);
                    }
                }
                if (begin >= end || end - begin < 8) {
                    out.warn("hhsa: " + ticker + " year " + std::to_string(year) +
                             " window too short; profile skipped");
                    continue;
                }
                HoloSpectrum h = holo_spectrum(sl, first, begin, end, cfg.holo_bins);
                RegimeProfile prof;
                try {
                    prof = regime_profile(h, sl, first);
                } catch (const ZeroEnergyError&) {
                    out.warn("hhsa: " + ticker + " " + to_string(regime) +
                             " window has zero modulation energy; profile skipped");
                    continue;
                }
                profiles << ticker << "," << to_string(regime) << ","
                         << csv::fmt_double(prof.pame) << "," << csv::fmt_double(prof.wc95) << ","
                         << csv::fmt_double(prof.wam95) << "\n";

                std::string base = "hhsa/" + ticker + "." + regime_slug(regime) + "." +
                                   std::to_string(year);
                std::ostringstream mat;
                mat << "wam_edges";
                for (double e : h.wam_edges) mat << "," << csv::fmt_double(e);
                mat << "\nwc_edges";
                for (double e : h.wc_edges) mat << "," << csv::fmt_double(e);
                mat << "\n";
                for (int am = 0; am < h.bins; ++am) {
                    for (int c = 0; c < h.bins; ++c) {
                        mat << csv::fmt_double(h.at(am, c));
                        mat << (c + 1 < h.bins ? "," : "\n");
                    }
                }
                out.write(base + ".spectrum.csv", mat.str());

                nlohmann::json meta;
                meta["ticker"] = ticker;
                meta["regime"] = to_string(regime);
                meta["year"] = year;
                meta["window_begin"] = begin;
                meta["window_end"] = end;
                meta["bins"] = h.bins;
                meta["units"] = "cycles/day";
                meta["pame"] = prof.pame;
                meta["wc95"] = prof.wc95;
                meta["wam95"] = prof.wam95;
                out.write(base + ".spectrum.json", meta.dump(2) + "\n");
            }
        }
    }
    out.write("hhsa/profiles.csv", profiles.str());
}

// ---- stage: vlmc ----

inline StateSequence read_states(const OutputWriter& out, const std::string& ticker,
                                 const std::string& needed_by) {
    csv::Table t = out.read_csv("ingest/" + ticker + ".states.csv", needed_by);
    StateSequence s;
    for (const auto& row : t.rows) {
        s.dates.push_back(Date::parse(row.at(0)));
        s.states.push_back(state_from_string(csv::trim(row.at(1))));
    }
    return s;
}

inline void stage_vlmc(const PipelineConfig& cfg, OutputWriter& out) {
    for (const GroupSpec& group : groups_of(cfg)) {
        auto rep = group_representative_years(cfg, out, group, "vlmc");
        for (const auto& ticker : *group.tickers) {
            StateSequence states = read_states(out, ticker, "vlmc");
            for (Regime regime : {Regime::Extreme, Regime::High, Regime::Normal}) {
                for (int year : rep[regime]) {
                    StateSeq window;
                    for (std::size_t i = 0; i < states.states.size(); ++i)
                        if (states.dates[i].year == year) window.push_back(states.states[i]);
                    if (static_cast<int>(window.size()) <= cfg.prune.max_depth + 1) {
                        out.warn("vlmc: " + ticker + " " + std::to_string(year) +
                                 " window too short; tree skipped");
                        continue;
                    }
                    ContextTree tree = prune_tree(build_context_tree(window, cfg.prune), cfg.prune);
                    nlohmann::json j = context_tree_to_json(tree);
                    j["ticker"] = ticker;
                    j["regime"] = to_string(regime);
                    j["year"] = year;
                    j["prune"] = {{"cutoff", cfg.prune.cutoff},
                                  {"max_depth", cfg.prune.max_depth},
                                  {"min_count", cfg.prune.min_count}};
                    out.write("vlmc/" + ticker + "." + regime_slug(regime) + "." +
                                  std::to_string(year) + ".tree.json",
                              j.dump(2) + "\n");
                }
            }
        }
    }
}

// ---- stage: metrics ----

inline nlohmann::json order1_to_json(const Order1Metrics& m) {
    nlohmann::json j;
    j["M"] = m.self_persistence;
    j["V1"] = m.v1;
    j["V2"] = m.v2;
    j["present"] = m.present;
    return j;
}

inline nlohmann::json orderk_to_json(const OrderKMetrics& m) {
    nlohmann::json j;
    j["k"] = m.k;
    j["C"] = m.continuation;
    j["E"] = m.exhaustion;
    j["Z"] = m.zigzag;
    j["B"] = m.burst;
    return j;
}

inline nlohmann::json unconditional_to_json(const UnconditionalStats& s) {
    nlohmann::json j;
    j["p"] = s.p;
    if (std::isinf(s.tail_ratio)) j["tail_ratio"] = "inf";
    else j["tail_ratio"] = s.tail_ratio;
    j["entropy_bits"] = s.entropy_bits;
    return j;
}

inline std::string context_label(const StateSeq& ctx) {
    std::string s;
    for (State st : ctx) s += to_string(st);
    return s;
}

inline void stage_metrics(const PipelineConfig& cfg, OutputWriter& out) {
    for (const GroupSpec& group : groups_of(cfg)) {
        auto rep = group_representative_years(cfg, out, group, "metrics");
        for (Regime regime : {Regime::Extreme, Regime::High, Regime::Normal}) {
            std::vector<ContextTree> trees;
            for (const auto& ticker : *group.tickers) {
                for (int year : rep[regime]) {
                    std::string rel = "vlmc/" + ticker + "." + regime_slug(regime) + "." +
                                      std::to_string(year) + ".tree.json";
                    if (!out.exists(rel)) continue;  // skipped upstream with a warning
                    trees.push_back(context_tree_from_json(out.read_json(rel, "metrics")));
                }
            }
            std::string base = "metrics/" + group.name + "." + regime_slug(regime);
            if (trees.empty()) {
                out.warn("metrics: no trees for " + group.name + " " +
                         std::string(to_string(regime)));
                continue;
            }
            AggregatedContexts agg = aggregate_contexts(trees, 3);

            std::ostringstream table;
            table << "context,count,p1,p2,p3,p4,p5\n";
            for (const auto& [ctx, e] : agg.filtered()) {
                table << context_label(ctx) << "," << e.tree_count;
                for (double p : e.mean) table << "," << csv::fmt_double(p);
                table << "\n";
            }
            out.write(base + ".contexts.csv", table.str());

            nlohmann::json j;
            j["group"] = group.name;
            j["regime"] = to_string(regime);
            j["trees"] = trees.size();
            j["unconditional"] = unconditional_to_json(unconditional_stats(agg.root_mean()));
            j["order1"] = order1_to_json(order1_metrics(agg));
            j["order2"] = orderk_to_json(higher_order_metrics(agg, 2));
            j["order3"] = orderk_to_json(higher_order_metrics(agg, 3));
            out.write(base + ".metrics.json", j.dump(2) + "\n");
        }
    }
}

// ---- stage: report ----

inline void stage_report(const PipelineConfig& cfg, OutputWriter& out) {
    nlohmann::json report;

    // PAME tables per group, mirroring the per-index rows plus the average
    for (const GroupSpec& group : groups_of(cfg)) {
        std::ostringstream t;
        t << "ticker";
        for (const char* reg : {"Extreme", "High", "Normal"})
            t << "," << reg << "_pame," << reg << "_wc95," << reg << "_wam95";
        t << "\n";

        // profiles.csv rows keyed by (ticker, regime)
        csv::Table prof = out.read_csv("hhsa/profiles.csv", "report");
        std::map<std::pair<std::string, std::string>, std::array<double, 3>> cell;
        for (const auto& row : prof.rows) {
            double pame, wc, wam;
            csv::parse_double(row.at(2), pame);
            csv::parse_double(row.at(3), wc);
            csv::parse_double(row.at(4), wam);
            cell[{row.at(0), row.at(1)}] = {pame, wc, wam};
        }
        std::array<double, 9> sums{};
        std::array<int, 9> counts{};
        nlohmann::json jgroup = nlohmann::json::array();
        for (const auto& ticker : *group.tickers) {
            t << ticker;
            nlohmann::json jrow;
            jrow["ticker"] = ticker;
            int slot = 0;
            for (const char* reg : {"Extreme", "High", "Normal"}) {
                auto it = cell.find({ticker, reg});
                for (int c = 0; c < 3; ++c, ++slot) {
                    if (it == cell.end()) {
                        t << ",";
                        continue;
                    }
                    double v = it->second[static_cast<std::size_t>(c)];
                    t << "," << csv::fmt_double(v);
                    sums[static_cast<std::size_t>(slot)] += v;
                    ++counts[static_cast<std::size_t>(slot)];
                }
                if (it != cell.end()) {
                    jrow[std::string(reg)] = {{"pame", it->second[0]},
                                              {"wc95", it->second[1]},
                                              {"wam95", it->second[2]}};
                }
            }
            jgroup.push_back(jrow);
            t << "\n";
        }
        t << "Average";
        nlohmann::json javg;
        static constexpr const char* kRegs[3] = {"Extreme", "High", "Normal"};
        static constexpr const char* kCols[3] = {"pame", "wc95", "wam95"};
        for (int slot = 0; slot < 9; ++slot) {
            if (counts[static_cast<std::size_t>(slot)] == 0) {
                t << ",";
                continue;
            }
            double v = sums[static_cast<std::size_t>(slot)] / counts[static_cast<std::size_t>(slot)];
            t << "," << csv::fmt_double(v);
            javg[kRegs[slot / 3]][kCols[slot % 3]] = v;
        }
        t << "\n";
        out.write("report/pame_" + group.name + ".csv", t.str());
        report["pame"][group.name] = {{"rows", jgroup}, {"average", javg}};
    }

    // regime years per ticker
    {
        std::ostringstream t;
        t << "ticker,extreme,high,normal\n";
        nlohmann::json jy = nlohmann::json::array();
        for (const auto& ticker : cfg.all_tickers()) {
            RegimeYears ry =
                years_from_json(out.read_json("regimes/" + ticker + ".years.json", "report"));
            auto join = [](const std::set<int>& ys) {
                std::string s;
                for (int y : ys) s += (s.empty() ? "" : " ") + std::to_string(y);
                return s;
            };
            t << ticker << "," << join(ry.extreme) << "," << join(ry.high) << ","
              << join(ry.normal) << "\n";
            nlohmann::json row = years_to_json(ry);
            row["ticker"] = ticker;
            jy.push_back(row);
        }
        out.write("report/regime_years.csv", t.str());
        report["regime_years"] = jy;
    }

    // metric tables per group x regime
    {
        std::ostringstream tu, t1, tk;
        tu << "market,regime,p1,p2,p3,p4,p5,tail_ratio,entropy\n";
        t1 << "market,regime,M1,M2,M3,M4,M5,V1,V2\n";
        tk << "market,regime,C2,E2,Z2,B2,C3,E3,Z3,B3\n";
        for (const GroupSpec& group : groups_of(cfg)) {
            for (Regime regime : {Regime::Extreme, Regime::High, Regime::Normal}) {
                std::string rel = "metrics/" + group.name + "." + regime_slug(regime) +
                                  ".metrics.json";
                if (!out.exists(rel)) continue;
                nlohmann::json m = out.read_json(rel, "report");
                tu << group.name << "," << to_string(regime);
                for (double p : m["unconditional"]["p"]) tu << "," << csv::fmt_double(p);
                if (m["unconditional"]["tail_ratio"].is_string()) tu << ",inf";
                else tu << "," << csv::fmt_double(m["unconditional"]["tail_ratio"].get<double>());
                tu << "," << csv::fmt_double(m["unconditional"]["entropy_bits"].get<double>())
                   << "\n";

                t1 << group.name << "," << to_string(regime);
                for (double v : m["order1"]["M"]) t1 << "," << csv::fmt_double(v);
                t1 << "," << csv::fmt_double(m["order1"]["V1"].get<double>()) << ","
                   << csv::fmt_double(m["order1"]["V2"].get<double>()) << "\n";

                tk << group.name << "," << to_string(regime);
                for (const char* ord : {"order2", "order3"})
                    for (const char* key : {"C", "E", "Z", "B"})
                        tk << "," << csv::fmt_double(m[ord][key].get<double>());
                tk << "\n";

                report["metrics"][group.name][regime_slug(regime)] = m;
            }
        }
        out.write("report/unconditional.csv", tu.str());
        out.write("report/order1.csv", t1.str());
        out.write("report/orderk.csv", tk.str());
    }

    // consolidated sensitivity
    {
        nlohmann::json js = nlohmann::json::object();
        for (const auto& ticker : cfg.all_tickers()) {
            std::string rel = "sensitivity/" + ticker + ".sensitivity.json";
            if (!out.exists(rel)) continue;
            js[ticker] = out.read_json(rel, "report");
        }
        report["sensitivity"] = js;
        out.write("report/sensitivity.json", js.dump(2) + "\n");
    }

    // BDS passthrough into the consolidated report
    if (out.exists("bds/bds.csv")) {
        csv::Table b = out.read_csv("bds/bds.csv", "report");
        nlohmann::json jb = nlohmann::json::array();
        for (const auto& row : b.rows) {
            double eps, stat, p;
            csv::parse_double(row.at(2), eps);
            csv::parse_double(row.at(3), stat);
            csv::parse_double(row.at(4), p);
            jb.push_back({{"ticker", row.at(0)},
                          {"m", std::stoi(row.at(1))},
                          {"epsilon", eps},
                          {"statistic", stat},
                          {"p_value", p}});
        }
        report["bds"] = jb;
    }

    out.write("report/report.json", report.dump(2) + "\n");

    // human-readable rendering, rounded to 3 decimals
    {
        std::ostringstream h;
        h << "regimekit report\n================\n\n";
        auto r3 = [](double v) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.3f", v);
            return std::string(buf);
        };
        if (report.contains("pame")) {
            for (const auto& [gname, gval] : report["pame"].items()) {
                h << "PAME (" << gname << "), x1 (not rescaled):\n";
                for (const auto& row : gval["rows"]) {
                    h << "  " << row["ticker"].get<std::string>();
                    for (const char* reg : {"Extreme", "High", "Normal"}) {
                        if (row.contains(reg))
                            h << "  " << reg << "=" << r3(row[reg]["pame"].get<double>() * 1e5)
                              << "e-5";
                    }
                    h << "\n";
                }
                if (!gval["average"].empty()) {
                    h << "  Average";
                    for (const char* reg : {"Extreme", "High", "Normal"})
                        if (gval["average"].contains(reg))
                            h << "  " << reg << "="
                              << r3(gval["average"][reg]["pame"].get<double>() * 1e5) << "e-5";
                    h << "\n";
                }
                h << "\n";
            }
        }
        if (report.contains("metrics")) {
            h << "Unconditional probabilities / tail ratio / entropy:\n";
            for (const auto& [gname, gval] : report["metrics"].items()) {
                for (const auto& [rname, m] : gval.items()) {
                    h << "  " << gname << " " << rname << ": p=(";
                    bool first = true;
                    for (double p : m["unconditional"]["p"]) {
                        h << (first ? "" : ", ") << r3(p);
                        first = false;
                    }
                    h << ")  tail=";
                    if (m["unconditional"]["tail_ratio"].is_string()) h << "inf";
                    else h << r3(m["unconditional"]["tail_ratio"].get<double>());
                    h << "  entropy=" << r3(m["unconditional"]["entropy_bits"].get<double>()) << "\n";
                }
            }
        }
        out.write("report/tables.txt", h.str());
    }
}

}  // namespace detail

enum class Stage { Ingest, Bds, Regimes, Sensitivity, Hhsa, Vlmc, Metrics, Report };

inline const char* to_string(Stage s) {
    switch (s) {
        case Stage::Ingest: return "ingest";
        case Stage::Bds: return "bds";
        case Stage::Regimes: return "regimes";
        case Stage::Sensitivity: return "sensitivity";
        case Stage::Hhsa: return "hhsa";
        case Stage::Vlmc: return "vlmc";
        case Stage::Metrics: return "metrics";
        default: return "report";
    }
}

inline Stage stage_from_string(const std::string& s) {
    for (Stage st : {Stage::Ingest, Stage::Bds, Stage::Regimes, Stage::Sensitivity, Stage::Hhsa,
                     Stage::Vlmc, Stage::Metrics, Stage::Report})
        if (s == to_string(st)) return st;
    throw ConfigError("unknown stage '" + s + "'");
}

// Run the requested stages in pipeline order. Stage outputs land under
// cfg.output_dir/<stage>/; each downstream stage reads its inputs back from
// the upstream files, so any stage can be rerun alone.
inline RunManifest run_pipeline(const PipelineConfig& cfg, const std::set<Stage>& stages) {
    cfg.validate();
    RunManifest manifest;
    manifest.config_hash = detail::fnv1a_hex(cfg.raw_text);
    detail::OutputWriter out(cfg.output_dir, manifest);

    for (Stage st : {Stage::Ingest, Stage::Bds, Stage::Regimes, Stage::Sensitivity, Stage::Hhsa,
                     Stage::Vlmc, Stage::Metrics, Stage::Report}) {
        if (!stages.count(st)) continue;
        auto start = std::chrono::steady_clock::now();
        try {
            switch (st) {
                case Stage::Ingest: detail::stage_ingest(cfg, out); break;
                case Stage::Bds: detail::stage_bds(cfg, out); break;
                case Stage::Regimes: detail::stage_regimes(cfg, out); break;
                case Stage::Sensitivity: detail::stage_sensitivity(cfg, out); break;
                case Stage::Hhsa: detail::stage_hhsa(cfg, out); break;
                case Stage::Vlmc: detail::stage_vlmc(cfg, out); break;
                case Stage::Metrics: detail::stage_metrics(cfg, out); break;
                case Stage::Report: detail::stage_report(cfg, out); break;
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const MissingInputError&) {
            throw;
        } catch (const MissingStageOutputError&) {
            throw;
        } catch (const Error& e) {
            throw StageError(to_string(st), e.what());
        }
        double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        manifest.timings.emplace_back(to_string(st), sec);
    }

    std::filesystem::create_directories(cfg.output_dir);
    std::filesystem::path mpath = std::filesystem::path(cfg.output_dir) / "manifest.json";
    std::filesystem::path tmp = mpath;
    tmp += ".tmp";
    {
        std::ofstream mf(tmp, std::ios::trunc);
        mf << manifest.to_json().dump(2) << "\n";
    }
    std::filesystem::rename(tmp, mpath);
    return manifest;
}

inline std::set<Stage> all_stages() {
    return {Stage::Ingest, Stage::Bds,  Stage::Regimes, Stage::Sensitivity,
            Stage::Hhsa,   Stage::Vlmc, Stage::Metrics, Stage::Report};
}

}  // namespace regimekit

#endif
