#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sfmt/grader.hpp"
#include "sfmt/optim.hpp"
#include "sfmt/vocab.hpp"

namespace sfmt {

// Identity of a saved model: where it came from and what it is compatible
// with. No timestamps anywhere, so saving the same state twice produces
// byte-identical directories.
struct CheckpointMeta {
    int version = 1;
    std::string regime;
    std::string stage;
    int epoch = 0;
    uint64_t rng_state = 0;
};

// Writes dir/header.json, dir/params.bin (little-endian f32 in parameter
// registration order), optional dir/opt.bin, and dir/vocab.json.
void save_checkpoint(const std::string& dir, const Grader<float>& grader, const CheckpointMeta& meta,
                     const AdamW* opt = nullptr, const Vocabulary* vocab = nullptr);

// Restores parameter values (and optimizer slots when `opt` is given and
// the checkpoint carries them) into a model built with a matching config.
// Version or config-hash mismatches fail loudly.
CheckpointMeta load_checkpoint(const std::string& dir, Grader<float>& grader, AdamW* opt = nullptr);

// Rebuilds the model (config, adapters, weights) exactly as saved.
Grader<float> load_checkpoint_model(const std::string& dir);

bool checkpoint_has_optimizer(const std::string& dir);

std::vector<std::string> checkpoint_vocab_words(const std::string& dir);

// Content hash of the parameter payload; convenient for determinism checks.
uint64_t checkpoint_params_hash(const std::string& dir);

}  // namespace sfmt
