#ifndef REGIMEKIT_REGIMES_HPP
#define REGIMEKIT_REGIMES_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "regimekit/dates.hpp"
#include "regimekit/emd.hpp"
#include "regimekit/errors.hpp"
#include "regimekit/stats.hpp"

namespace regimekit {

enum class Regime { Normal = 0, High = 1, Extreme = 2 };

inline const char* to_string(Regime r) {
    switch (r) {
        case Regime::Normal: return "Normal";
        case Regime::High: return "High";
        default: return "Extreme";
    }
}

inline Regime regime_from_string(const std::string& s) {
    if (s == "Normal") return Regime::Normal;
    if (s == "High") return Regime::High;
    if (s == "Extreme") return Regime::Extreme;
    throw DataError("unknown regime '" + s + "'");
}

struct EnergySeries {
    std::vector<Date> dates;
    std::vector<double> e;  // max-normalized, in [0,1]
    double mu = 0;
    double sigma = 0;  // sample std dev of the normalized series
};

struct RegimeLabeling {
    std::vector<Date> dates;
    std::vector<Regime> labels;
    double tau1 = 0, tau2 = 0;
};

struct RegimeYears {
    std::set<int> extreme, high, normal;

    const std::set<int>& of(Regime r) const {
        switch (r) {
            case Regime::Extreme: return extreme;
            case Regime::High: return high;
            default: return normal;
        }
    }
    std::set<int>& of(Regime r) {
        switch (r) {
            case Regime::Extreme: return extreme;
            case Regime::High: return high;
            default: return normal;
        }
    }
};

// E_raw(t) = sum_j IA_j(t)^2 from the direct-quadrature amplitudes, then
// max-normalized; mu/sigma are computed on the normalized series.
inline EnergySeries instantaneous_energy(const std::vector<InstantSeries>& inst,
                                         const std::vector<Date>& dates) {
    if (inst.empty()) throw EmptyDecompositionError("energy: no IMFs");
    const std::size_t n = inst.front().amplitude.size();
    EnergySeries es;
    es.dates = dates;
    es.e.assign(n, 0.0);
    for (const auto& s : inst) {
        if (s.amplitude.size() != n) throw DataError("energy: length mismatch");
        for (std::size_t i = 0; i < n; ++i) es.e[i] += s.amplitude[i] * s.amplitude[i];
    }
    double peak = *std::max_element(es.e.begin(), es.e.end());
    if (!(peak > 0.0)) throw AllZeroEnergyError("energy: all-zero energy");
    for (double& v : es.e) v /= peak;
    es.mu = mean(es.e);
    es.sigma = sample_sd(es.e);
    return es;
}

inline EnergySeries instantaneous_energy(const Decomposition& d, const std::vector<Date>& dates) {
    if (d.imfs.empty()) throw EmptyDecompositionError("energy: empty decomposition");
    std::vector<InstantSeries> inst;
    inst.reserve(d.imfs.size());
    for (const auto& imf : d.imfs) inst.push_back(direct_quadrature(imf));
    return instantaneous_energy(inst, dates);
}

// Three-band rule with tau1 = mu + a sigma, tau2 = mu + b sigma:
// Normal e <= tau1, High tau1 < e <= tau2, Extreme e > tau2.
inline RegimeLabeling classify_regimes(const EnergySeries& es, double a = 1.0, double b = 6.0) {
    if (!(a < b)) throw InvalidGridError("classify: need a < b");
    RegimeLabeling l;
    l.dates = es.dates;
    l.tau1 = es.mu + a * es.sigma;
    l.tau2 = es.mu + b * es.sigma;
    l.labels.reserve(es.e.size());
    for (double v : es.e) {
        if (v > l.tau2) l.labels.push_back(Regime::Extreme);
        else if (v > l.tau1) l.labels.push_back(Regime::High);
        else l.labels.push_back(Regime::Normal);
    }
    return l;
}

// A year joins a regime set when at least one of its days carries the label;
// overlaps removed by severity Extreme > High > Normal.
inline RegimeYears regime_years(const RegimeLabeling& l) {
    if (l.labels.empty()) throw DataError("regime_years: empty labeling");
    if (l.dates.size() != l.labels.size()) throw DataError("regime_years: length mismatch");
    RegimeYears ry;
    for (std::size_t i = 0; i < l.labels.size(); ++i) {
        int y = l.dates[i].year;
        switch (l.labels[i]) {
            case Regime::Extreme: ry.extreme.insert(y); break;
            case Regime::High: ry.high.insert(y); break;
            default: ry.normal.insert(y);
        }
    }
    for (int y : ry.extreme) {
        ry.high.erase(y);
        ry.normal.erase(y);
    }
    for (int y : ry.high) ry.normal.erase(y);
    return ry;
}

inline double jaccard(const std::set<int>& a, const std::set<int>& b) {
    if (a.empty() && b.empty()) return 1.0;
    std::size_t inter = 0;
    for (int v : a) inter += b.count(v);
    return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

struct SensitivityEntry {
    double a = 0, b = 0;
    RegimeYears years;
    double jaccard_extreme = 1, jaccard_high = 1, jaccard_normal = 1;
};

struct SensitivityReport {
    RegimeYears baseline;  // (a,b) = (1,6)
    std::vector<SensitivityEntry> entries;
};

inline std::vector<std::pair<double, double>> default_sensitivity_grid() {
    std::vector<std::pair<double, double>> g;
    for (double a : {0.75, 1.0, 1.25})
        for (double b : {4.5, 6.0, 7.5}) g.emplace_back(a, b);
    return g;
}

inline SensitivityReport threshold_sensitivity(
    const EnergySeries& es,
    const std::vector<std::pair<double, double>>& grid = default_sensitivity_grid()) {
    for (auto [a, b] : grid)
        if (!(a < b)) throw InvalidGridError("sensitivity: need a < b in every grid cell");

    SensitivityReport rep;
    rep.baseline = regime_years(classify_regimes(es, 1.0, 6.0));

    auto run = [&](double a, double b) {
        SensitivityEntry ent;
        ent.a = a;
        ent.b = b;
        ent.years = regime_years(classify_regimes(es, a, b));
        ent.jaccard_extreme = jaccard(ent.years.extreme, rep.baseline.extreme);
        ent.jaccard_high = jaccard(ent.years.high, rep.baseline.high);
        ent.jaccard_normal = jaccard(ent.years.normal, rep.baseline.normal);
        return ent;
    };

    bool has_baseline = false;
    for (auto [a, b] : grid) {
        if (a == 1.0 && b == 6.0) has_baseline = true;
        rep.entries.push_back(run(a, b));
    }
    if (!has_baseline) rep.entries.push_back(run(1.0, 6.0));
    return rep;
}

// Common years per regime across a group of indices. The intersection is
// used when it has at least per_regime_count years; otherwise the most
// frequent years across indices fill in, ties broken by the earlier year.
inline std::map<Regime, std::vector<int>> representative_years(
    const std::vector<RegimeYears>& group, int per_regime_count = 2) {
    if (group.empty()) throw DataError("representative_years: empty group");
    std::map<Regime, std::vector<int>> out;
    for (Regime r : {Regime::Extreme, Regime::High, Regime::Normal}) {
        std::set<int> inter = group.front().of(r);
        std::map<int, int> freq;
        for (const auto& ry : group)
            for (int y : ry.of(r)) ++freq[y];
        for (auto it = inter.begin(); it != inter.end();) {
            if (freq[*it] < static_cast<int>(group.size())) it = inter.erase(it);
            else ++it;
        }
        std::vector<int> years;
        if (static_cast<int>(inter.size()) >= per_regime_count) {
            years.assign(inter.begin(), inter.end());
        } else {
            std::vector<std::pair<int, int>> ranked(freq.begin(), freq.end());
            std::sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
                if (x.second != y.second) return x.second > y.second;
                return x.first < y.first;
            });
            for (const auto& [year, count] : ranked) {
                if (static_cast<int>(years.size()) >= per_regime_count) break;
                years.push_back(year);
            }
            std::sort(years.begin(), years.end());
        }
        out[r] = std::move(years);
    }
    return out;
}

}  // namespace regimekit

#endif
