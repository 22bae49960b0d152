#ifndef REGIMEKIT_STATES_HPP
#define REGIMEKIT_STATES_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "regimekit/errors.hpp"

namespace regimekit {

// Quintile return states, R1 (most negative) .. R5 (most positive).
enum class State : std::uint8_t { R1 = 0, R2, R3, R4, R5 };

inline constexpr int kStateCount = 5;

inline constexpr std::array<const char*, kStateCount> kStateNames = {"R1", "R2", "R3", "R4", "R5"};

inline const char* to_string(State s) { return kStateNames[static_cast<int>(s)]; }

inline State state_from_string(const std::string& s) {
    for (int i = 0; i < kStateCount; ++i)
        if (s == kStateNames[i]) return static_cast<State>(i);
    throw DataError("unknown state '" + s + "'");
}

inline State state_from_index(int i) {
    if (i < 0 || i >= kStateCount) throw Error("state index out of range");
    return static_cast<State>(i);
}

using StateSeq = std::vector<State>;

}  // namespace regimekit

#endif
