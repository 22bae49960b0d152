#ifndef REGIMEKIT_HHSA_HPP
#define REGIMEKIT_HHSA_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "regimekit/emd.hpp"
#include "regimekit/errors.hpp"

namespace regimekit {

struct SecondLayerImf {
    std::vector<double> component;  // c_jk
    InstantSeries inst;             // a_jk = inst.amplitude, omega_am = inst.frequency
};

struct SecondLayerOfImf {
    std::vector<double> envelope;  // a_j, the spline amplitude envelope of IMF j
    std::vector<SecondLayerImf> imfs;
    std::vector<double> trend;     // Q_jm
};

struct SecondLayer {
    std::vector<SecondLayerOfImf> per_imf;
    int dq_fallbacks = 0;  // components whose quadrature needed the degraded estimate
};

namespace detail {

// Direct quadrature with a degraded fallback for components whose envelope
// normalization diverges (low-energy leftovers): spline envelope amplitude
// and a constant zero-crossing frequency.
inline InstantSeries robust_quadrature(const std::vector<double>& c, int nbsym, int* fallbacks) {
    try {
        return direct_quadrature(c, nbsym);
    } catch (const NormalizationFailureError&) {
        if (fallbacks) ++*fallbacks;
        InstantSeries s;
        s.amplitude = amplitude_envelope(c, nbsym);
        s.phase.assign(c.size(), 0.0);
        double f_est =
            static_cast<double>(zero_crossings(c)) / (2.0 * static_cast<double>(c.size()));
        s.frequency.assign(c.size(), f_est);
        return s;
    }
}

}  // namespace detail

// Instantaneous series for every first-layer IMF, with the degraded
// fallback applied where normalization fails. Returns the fallback count in
// *fallbacks when given.
inline std::vector<InstantSeries> first_layer_quadrature(const Decomposition& d,
                                                         const SiftOptions& opts = {},
                                                         int* fallbacks = nullptr) {
    std::vector<InstantSeries> out;
    out.reserve(d.imfs.size());
    for (const auto& imf : d.imfs) out.push_back(detail::robust_quadrature(imf, opts.nbsym, fallbacks));
    return out;
}

// Decompose one envelope into second-layer IMFs plus trend. Envelopes that
// are constant up to numerical noise are returned as pure trend.
inline Decomposition decompose_envelope(const std::vector<double>& env,
                                        const SiftOptions& opts = {}) {
    double peak = 0;
    for (double v : env) peak = std::max(peak, std::fabs(v));
    if (sample_sd(env) <= 1e-9 * std::max(peak, 1e-300)) {
        Decomposition d;
        d.residual = env;
        return d;
    }
    MaskParams mask = mask_params_for(env);
    if (mask.frequency > 0.0 && mask.amplitude > 0.0)
        return masking_emd(env, mask.frequency, mask.amplitude, opts);
    return emd_decompose(env, opts);
}

// Second-layer decomposition: the amplitude envelope of every first-layer
// IMF is decomposed by masking EMD, and direct quadrature gives each
// second-layer component its amplitude and modulation frequency. Components
// whose quadrature normalization fails (tiny leftovers with degenerate
// envelopes) fall back to a spline envelope and a zero-crossing frequency.
inline SecondLayer second_layer(const Decomposition& d, const SiftOptions& opts = {}) {
    if (d.imfs.empty()) throw EmptyDecompositionError("second_layer: no first-layer IMFs");
    SecondLayer sl;
    sl.per_imf.reserve(d.imfs.size());
    for (const auto& imf : d.imfs) {
        SecondLayerOfImf layer;
        layer.envelope = amplitude_envelope(imf, opts.nbsym);
        Decomposition env_d = decompose_envelope(layer.envelope, opts);
        layer.trend = std::move(env_d.residual);
        layer.imfs.reserve(env_d.imfs.size());
        for (auto& c : env_d.imfs) {
            SecondLayerImf s;
            s.inst = detail::robust_quadrature(c, opts.nbsym, &sl.dq_fallbacks);
            s.component = std::move(c);
            layer.imfs.push_back(std::move(s));
        }
        sl.per_imf.push_back(std::move(layer));
    }
    return sl;
}

// Time-integrated 2-D Holo-Hilbert spectrum on log-spaced bins. Each sample
// deposits a_jk(t)^2 / T at (omega_am, omega_c); frequencies outside
// [1/T, 0.5] land in the edge bins so energy is conserved.
struct HoloSpectrum {
    int bins = 64;
    std::vector<double> wam_edges, wc_edges;  // bins + 1 entries each
    std::vector<double> energy;               // row-major [am][c]
    std::size_t window_begin = 0, window_end = 0;
    double total = 0;

    double& at(int am, int c) { return energy[static_cast<std::size_t>(am * bins + c)]; }
    double at(int am, int c) const { return energy[static_cast<std::size_t>(am * bins + c)]; }

    int bin_of(const std::vector<double>& edges, double f) const {
        auto it = std::upper_bound(edges.begin(), edges.end(), f);
        int i = static_cast<int>(it - edges.begin()) - 1;
        return std::clamp(i, 0, bins - 1);
    }

    double peak() const {
        double m = 0;
        for (double v : energy) m = std::max(m, v);
        return m;
    }
};

inline std::vector<double> log_spaced_edges(double fmin, double fmax, int bins) {
    std::vector<double> e(static_cast<std::size_t>(bins) + 1);
    double lf = std::log(fmin), hf = std::log(fmax);
    for (int i = 0; i <= bins; ++i)
        e[static_cast<std::size_t>(i)] = std::exp(lf + (hf - lf) * static_cast<double>(i) / bins);
    e.front() = fmin;
    e.back() = fmax;
    return e;
}

inline HoloSpectrum holo_spectrum(const SecondLayer& sl, const std::vector<InstantSeries>& first,
                                  std::size_t window_begin, std::size_t window_end, int bins = 64) {
    if (window_end <= window_begin) throw EmptyWindowError("holo_spectrum: empty window");
    if (sl.per_imf.size() != first.size())
        throw DataError("holo_spectrum: first-layer series count mismatch");
    const std::size_t T = window_end - window_begin;
    if (T < 4) throw EmptyWindowError("holo_spectrum: window too short");

    HoloSpectrum h;
    h.bins = bins;
    h.window_begin = window_begin;
    h.window_end = window_end;
    h.wam_edges = log_spaced_edges(1.0 / static_cast<double>(T), 0.5, bins);
    h.wc_edges = h.wam_edges;
    h.energy.assign(static_cast<std::size_t>(bins) * static_cast<std::size_t>(bins), 0.0);

    for (std::size_t j = 0; j < sl.per_imf.size(); ++j) {
        const auto& wc = first[j].frequency;
        if (wc.size() < window_end) throw EmptyWindowError("holo_spectrum: window beyond series");
        for (const auto& s : sl.per_imf[j].imfs) {
            for (std::size_t t = window_begin; t < window_end; ++t) {
                double a = s.inst.amplitude[t];
                double w = a * a / static_cast<double>(T);
                int am_bin = h.bin_of(h.wam_edges, s.inst.frequency[t]);
                int c_bin = h.bin_of(h.wc_edges, wc[t]);
                h.at(am_bin, c_bin) += w;
                h.total += w;
            }
        }
    }
    return h;
}

struct RegimeProfile {
    double pame = 0;   // peak amplitude-modulation energy over the (j,k) components
    double wc95 = 0;   // energy-weighted 95th-percentile carrier frequency
    double wam95 = 0;  // energy-weighted 95th-percentile modulation frequency
};

namespace detail {

inline double weighted_percentile(std::vector<std::pair<double, double>>& samples, double q) {
    double total = 0;
    for (auto& [f, w] : samples) total += w;
    if (!(total > 0)) return 0.0;
    std::sort(samples.begin(), samples.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    double target = q * total, cum = 0;
    for (auto& [f, w] : samples) {
        cum += w;
        if (cum >= target) return f;
    }
    return samples.back().first;
}

}  // namespace detail

// Scalar profile of one regime window. PAME is the largest time-averaged
// squared second-layer amplitude over the (j,k) components, which keeps the
// value independent of how the component energy falls across bin edges. The
// percentile frequencies weight each sample by its a_jk^2 contribution.
inline RegimeProfile regime_profile(const HoloSpectrum& h, const SecondLayer& sl,
                                    const std::vector<InstantSeries>& first) {
    if (!(h.total > 0)) throw ZeroEnergyError("regime_profile: zero energy in window");
    RegimeProfile p;
    const double T = static_cast<double>(h.window_end - h.window_begin);

    std::vector<std::pair<double, double>> wc_samples, wam_samples;
    for (std::size_t j = 0; j < sl.per_imf.size(); ++j) {
        for (const auto& s : sl.per_imf[j].imfs) {
            double component_energy = 0;
            for (std::size_t t = h.window_begin; t < h.window_end; ++t) {
                double w = s.inst.amplitude[t] * s.inst.amplitude[t];
                component_energy += w / T;
                wc_samples.emplace_back(first[j].frequency[t], w);
                wam_samples.emplace_back(s.inst.frequency[t], w);
            }
            p.pame = std::max(p.pame, component_energy);
        }
    }
    p.wc95 = detail::weighted_percentile(wc_samples, 0.95);
    p.wam95 = detail::weighted_percentile(wam_samples, 0.95);
    return p;
}

}  // namespace regimekit

#endif
