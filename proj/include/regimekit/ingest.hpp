#ifndef REGIMEKIT_INGEST_HPP
#define REGIMEKIT_INGEST_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "regimekit/csv.hpp"
#include "regimekit/dates.hpp"
#include "regimekit/errors.hpp"
#include "regimekit/states.hpp"
#include "regimekit/stats.hpp"

namespace regimekit {

struct PriceSeries {
    std::string ticker;
    std::vector<Date> dates;
    std::vector<double> close;

    void validate() const {
        if (close.size() != dates.size()) throw DataError("price series: length mismatch");
        if (close.size() < 2) throw FewerThanTwoRowsError("price series needs at least 2 rows");
        for (std::size_t i = 0; i < close.size(); ++i) {
            if (!(close[i] > 0.0)) throw NonPositivePriceError("non-positive close at " + dates[i].str());
            if (i > 0 && !(dates[i] > dates[i - 1]))
                throw DataError("dates not strictly increasing at " + dates[i].str());
        }
    }
};

struct ReturnSeries {
    std::vector<Date> dates;  // aligned to the later day of each pair
    std::vector<double> r;
};

struct QuintileCutoffs {
    double q20 = 0, q40 = 0, q60 = 0, q80 = 0;
};

struct StateSequence {
    std::vector<Date> dates;
    StateSeq states;
};

// Load a dated closing-price CSV. Requires a Date and a Close column
// (case-insensitive); extra columns are ignored. Rows with a blank or
// non-numeric close are dropped; structurally bad rows (missing fields,
// unparseable date) raise ParseError with the 1-based data row index.
inline PriceSeries load_prices(const std::string& path, const std::string& ticker) {
    csv::Table t = csv::read_file(path);
    if (t.header.empty()) throw ParseError("'" + path + "': missing header", 0);
    int date_col = t.column("Date");
    int close_col = t.column("Close");
    if (date_col < 0 || close_col < 0)
        throw ParseError("'" + path + "': header must name Date and Close columns", 0);

    std::vector<std::pair<Date, double>> rows;
    rows.reserve(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& fields = t.rows[i];
        std::size_t need = static_cast<std::size_t>(std::max(date_col, close_col)) + 1;
        if (fields.size() < need) throw ParseError("'" + path + "': too few fields", i + 1);
        Date d;
        try {
            d = Date::parse(csv::trim(fields[static_cast<std::size_t>(date_col)]));
        } catch (const DataError& e) {
            throw ParseError("'" + path + "': " + e.what(), i + 1);
        }
        double c;
        if (!csv::parse_double(fields[static_cast<std::size_t>(close_col)], c)) continue;  // drop rule
        rows.emplace_back(d, c);
    }

    std::stable_sort(rows.begin(), rows.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].first == rows[i - 1].first)
            throw DuplicateDateError("'" + path + "': duplicate date " + rows[i].first.str());

    PriceSeries p;
    p.ticker = ticker;
    p.dates.reserve(rows.size());
    p.close.reserve(rows.size());
    for (auto& [d, c] : rows) {
        p.dates.push_back(d);
        p.close.push_back(c);
    }
    p.validate();
    return p;
}

// r[i] = ln(close[i+1] / close[i]), dated by the later day.
inline ReturnSeries compute_log_returns(const PriceSeries& p) {
    p.validate();
    ReturnSeries r;
    r.dates.assign(p.dates.begin() + 1, p.dates.end());
    r.r.resize(p.close.size() - 1);
    for (std::size_t i = 0; i + 1 < p.close.size(); ++i) {
        if (!(p.close[i] > 0.0) || !(p.close[i + 1] > 0.0))
            throw NonPositivePriceError("non-positive close");
        r.r[i] = std::log(p.close[i + 1] / p.close[i]);
    }
    return r;
}

inline QuintileCutoffs compute_quintile_cutoffs(const ReturnSeries& r) {
    if (r.r.size() < 5) throw TooFewObservationsError("need at least 5 returns for quintiles");
    QuintileCutoffs q;
    q.q20 = quantile_type7(r.r, 0.2);
    q.q40 = quantile_type7(r.r, 0.4);
    q.q60 = quantile_type7(r.r, 0.6);
    q.q80 = quantile_type7(r.r, 0.8);
    return q;
}

// Boundary ties go to the lower state (left-closed bands).
inline State assign_state(double ret, const QuintileCutoffs& q) {
    if (ret <= q.q20) return State::R1;
    if (ret <= q.q40) return State::R2;
    if (ret <= q.q60) return State::R3;
    if (ret <= q.q80) return State::R4;
    return State::R5;
}

inline StateSequence discretize_returns(const ReturnSeries& r, const QuintileCutoffs& q) {
    StateSequence s;
    s.dates = r.dates;
    s.states.reserve(r.r.size());
    for (double v : r.r) s.states.push_back(assign_state(v, q));
    return s;
}

}  // namespace regimekit

#endif
