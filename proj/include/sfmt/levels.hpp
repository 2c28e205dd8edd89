#pragma once

#include <array>
#include <string>

#include "sfmt/error.hpp"

namespace sfmt {

// Eight-level proficiency scale. Numeric embedding is 0.5 per step so that
// "within half a level" means exactly "same or neighboring bin".
inline constexpr int kNumLevels = 8;
inline constexpr std::array<const char*, kNumLevels> kLevelNames = {
    "Pre-A", "A1", "A1+", "A2", "A2+", "B1", "B1+", "B2"};

inline void check_level(int idx) {
    if (idx < 0 || idx >= kNumLevels)
        throw IndexError("level index " + std::to_string(idx) + " outside [0,7]");
}

inline double level_value(int idx) {
    check_level(idx);
    return 0.5 * idx;
}

inline const char* level_name(int idx) {
    check_level(idx);
    return kLevelNames[static_cast<size_t>(idx)];
}

inline int level_index(const std::string& name) {
    for (int i = 0; i < kNumLevels; ++i)
        if (name == kLevelNames[static_cast<size_t>(i)]) return i;
    throw IndexError("unknown level name: " + name);
}

// Modal level of three opinions; three distinct opinions resolve to the
// median on the ordered scale.
inline int majority_vote(int a, int b, int c) {
    check_level(a);
    check_level(b);
    check_level(c);
    if (a == b || a == c) return a;
    if (b == c) return b;
    int lo = std::min(a, std::min(b, c));
    int hi = std::max(a, std::max(b, c));
    return a + b + c - lo - hi;
}

// Level nearest to the mean of the three numeric embeddings; an exact
// midpoint rounds up. In index space that is round((a+b+c)/3) computed
// exactly as (2*(a+b+c)+3)/6, which never actually hits a midpoint for
// integer inputs.
inline int holistic_aggregate(int a, int b, int c) {
    check_level(a);
    check_level(b);
    check_level(c);
    return (2 * (a + b + c) + 3) / 6;
}

}  // namespace sfmt
