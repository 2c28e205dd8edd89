#pragma once

#include <string>
#include <vector>

namespace sfmt {

// Mono 16 kHz audio, samples normalized to [-1, 1].
struct PcmSignal {
    int sample_rate = 16000;
    std::vector<float> samples;

    double duration_s() const { return static_cast<double>(samples.size()) / sample_rate; }
};

// Reads a RIFF/WAVE file. Accepts PCM16 mono 16 kHz only; anything else
// raises FormatError naming the offending field.
PcmSignal read_wav(const std::string& path);

// Writes PCM16 mono; samples are clamped to [-1, 1] and scaled by 32768.
void write_wav(const std::string& path, const PcmSignal& sig);

}  // namespace sfmt
