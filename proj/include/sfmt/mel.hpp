#pragma once

#include <cstddef>
#include <string>

#include "sfmt/tensor.hpp"
#include "sfmt/wav.hpp"

namespace sfmt {

inline constexpr int kMelBands = 40;
inline constexpr int kFrameLen = 400;  // 25 ms at 16 kHz
inline constexpr int kFrameHop = 160;  // 10 ms
inline constexpr int kFftSize = 512;
inline constexpr double kLogFloor = -23.025850929940457;  // ln(1e-10)

// Frames a signal of n samples: 1 + floor((n - 400) / 160).
// Throws DimError below 0.1 s (1600 samples).
int frame_count(size_t n);

// T x 40 natural-log mel energies, Hann window, bands spanning 0-8000 Hz,
// clamped at kLogFloor. Deterministic: same samples give same bytes.
TensorF log_mel(const PcmSignal& sig);

// Binary feature cache: 16-byte header (magic "SFMTFEAT", version u16,
// T u32, D u16) then row-major little-endian f32. Round trips bit-exactly.
void save_features(const TensorF& fm, const std::string& path);
TensorF load_features(const std::string& path);

}  // namespace sfmt
