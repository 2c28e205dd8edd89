#pragma once

#include <string>
#include <vector>

#include "sfmt/rng.hpp"

namespace sfmt {

// Token-level edit distance with unit costs.
size_t levenshtein(const std::vector<std::string>& a, const std::vector<std::string>& b);

struct CorruptResult {
    std::vector<std::string> tokens;
    double measured_wer = 0.0;  // levenshtein(ref, tokens) / |ref|
};

struct EditRatios {
    double sub = 0.70;
    double ins = 0.15;
    double del = 0.15;
};

// Simulates ASR errors: applies roughly target_wer * |tokens| edits split
// per `ratios`, then measures the actual WER by edit distance. Replacement
// and inserted tokens come from `pool`. Aimed at corpora of >= 1000 tokens;
// per-utterance WER fluctuates around the target.
CorruptResult corrupt_transcript(const std::vector<std::string>& tokens, double target_wer,
                                 Rng& rng, const std::vector<std::string>& pool,
                                 const EditRatios& ratios = {});

}  // namespace sfmt
