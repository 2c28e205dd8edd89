#pragma once

#include <cstdint>
#include <string>

#include "sfmt/error.hpp"
#include "sfmt/rng.hpp"

namespace sfmt {

// Architecture hyperparameters for the grader. The feed-forward expansion
// (4x) and the depthwise kernel width (7) are structural constants of the
// blocks, not tunables, so they do not appear here.
struct ModelConfig {
    int d_model = 64;
    int num_layers = 3;        // decoder depth
    int num_heads = 4;
    int conformer_blocks = 2;  // encoder depth after subsampling
    int subsample = 4;         // two stride-2 convolutions
    int lora_rank = 8;
    double lora_alpha = 16.0;
    int max_audio_frames = 512;  // mel frames before subsampling
    int max_text_tokens = 128;

    void validate() const {
        if (d_model <= 0 || num_layers <= 0 || num_heads <= 0 || conformer_blocks <= 0)
            throw ConfigError("model: dimensions and depths must be positive");
        if (d_model % num_heads != 0)
            throw ConfigError("model: d_model " + std::to_string(d_model) +
                              " not divisible by num_heads " + std::to_string(num_heads));
        if (subsample != 4)
            throw ConfigError("model: subsample is fixed at 4 by the two stride-2 convolutions");
        if (lora_rank <= 0 || lora_rank > d_model)
            throw ConfigError("model: lora_rank must be in [1, d_model]");
        if (lora_alpha <= 0.0) throw ConfigError("model: lora_alpha must be positive");
        if (max_audio_frames <= 0 || max_text_tokens <= 0)
            throw ConfigError("model: sequence capacity must be positive");
    }

    // rows the encoder emits for T mel frames
    int audio_rows(int t) const { return (t + subsample - 1) / subsample; }

    int max_positions() const { return 2 + audio_rows(max_audio_frames) + max_text_tokens + 1; }

    double lora_scale() const { return lora_alpha / lora_rank; }

    std::string canonical() const {
        return "d=" + std::to_string(d_model) + ";layers=" + std::to_string(num_layers) +
               ";heads=" + std::to_string(num_heads) + ";blocks=" + std::to_string(conformer_blocks) +
               ";sub=" + std::to_string(subsample) + ";r=" + std::to_string(lora_rank) +
               ";alpha=" + std::to_string(lora_alpha) + ";amax=" + std::to_string(max_audio_frames) +
               ";tmax=" + std::to_string(max_text_tokens);
    }

    uint64_t hash() const { return fnv1a64(canonical()); }
};

}  // namespace sfmt
