#ifndef REGIMEKIT_DATES_HPP
#define REGIMEKIT_DATES_HPP

#include <compare>
#include <cstdio>
#include <string>

#include "regimekit/errors.hpp"

namespace regimekit {

// Calendar date (ISO-8601 YYYY-MM-DD). Plain value type; ordering is
// lexicographic on (year, month, day).
struct Date {
    int year = 1970;
    int month = 1;
    int day = 1;

    auto operator<=>(const Date&) const = default;

    static bool is_leap(int y) {
        return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    }

    static int days_in_month(int y, int m) {
        static constexpr int kDays[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
        if (m == 2 && is_leap(y)) return 29;
        return kDays[m - 1];
    }

    static Date parse(const std::string& s) {
        Date d;
        if (s.size() < 10 || s[4] != '-' || s[7] != '-')
            throw DataError("invalid date '" + s + "'");
        auto digits = [&](int pos, int len) {
            int v = 0;
            for (int i = pos; i < pos + len; ++i) {
                char c = s[static_cast<std::size_t>(i)];
                if (c < '0' || c > '9') throw DataError("invalid date '" + s + "'");
                v = v * 10 + (c - '0');
            }
            return v;
        };
        d.year = digits(0, 4);
        d.month = digits(5, 2);
        d.day = digits(8, 2);
        if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > days_in_month(d.year, d.month))
            throw DataError("invalid date '" + s + "'");
        return d;
    }

    std::string str() const {
        char buf[11];
        std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
        return buf;
    }

    // Next calendar day; handy for generating synthetic fixtures.
    Date next() const {
        Date d = *this;
        if (++d.day > days_in_month(d.year, d.month)) {
            d.day = 1;
            if (++d.month > 12) {
                d.month = 1;
                ++d.year;
            }
        }
        return d;
    }
};

}  // namespace regimekit

#endif
