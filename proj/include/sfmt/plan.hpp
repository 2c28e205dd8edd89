#pragma once

#include <set>
#include <string>
#include <vector>

#include "sfmt/error.hpp"
#include "sfmt/grader.hpp"

namespace sfmt {

// One optimization phase over one corpus view. A regime is an ordered list
// of these; later stages start from the parameters the previous stage left
// behind.
struct StagePlan {
    std::string name;
    Modality modality = Modality::multimodal;
    std::set<std::string> trainable;
    int epochs = 1;
    double lr = 4e-5;
    int batch_size = 8;
    int accum_steps = 4;
    uint64_t seed = 0;
    // Warm-phase option: rotate multimodal / audio_only / text_only layouts
    // across sequences so a backbone frozen afterwards handles all three.
    bool cycle_modalities = false;

    int effective_batch() const { return batch_size * accum_steps; }

    void validate() const {
        if (name.empty()) throw ConfigError("stage plan: name required");
        if (epochs < 1) throw ConfigError("stage plan " + name + ": epochs must be >= 1");
        if (lr <= 0) throw ConfigError("stage plan " + name + ": lr must be positive");
        if (batch_size < 1 || accum_steps < 1)
            throw ConfigError("stage plan " + name + ": batch and accumulation must be >= 1");
        if (trainable.empty()) throw ConfigError("stage plan " + name + ": no trainable groups");
        if (modality == Modality::audio_only) {
            bool audio_path = trainable.count("audio_encoder") || trainable.count("audio_projector") ||
                              trainable.count("audio_lora");
            if (!audio_path)
                throw ConfigError("stage plan " + name +
                                  ": audio_only stage must train some audio-path group");
        }
    }
};

struct Regime {
    std::string name;
    char aspect = 'H';
    std::vector<StagePlan> stages;

    void validate() const {
        if (stages.empty()) throw ConfigError("regime " + name + ": no stages");
        if (aspect != 'C' && aspect != 'D' && aspect != 'L' && aspect != 'H')
            throw ConfigError("regime " + name + ": aspect must be C, D, L, or H");
        for (const auto& s : stages) s.validate();
        if (name == "sfmt") {
            if (stages.size() != 2 || stages[0].modality != Modality::audio_only ||
                stages[1].modality != Modality::multimodal)
                throw ConfigError("sfmt regime must be [audio_only stage, multimodal stage]");
        } else if (stages.size() != 1) {
            throw ConfigError("regime " + name + ": single-stage regimes have exactly one plan");
        }
    }
};

// Groups updated while a regime runs. The backbone and text embeddings stay
// frozen at their warm-start values; strict mode narrows updates to the
// audio adapters alone.
inline std::set<std::string> regime_trainable(bool strict) {
    if (strict) return {"audio_lora"};
    return {"audio_lora", "audio_projector", "label_head"};
}

inline constexpr int kDefaultTotalEpochs = 4;

// The four comparison regimes at equal total compute. The two-stage
// curriculum splits the epoch budget evenly between its stages.
inline std::vector<Regime> default_plans(char aspect, uint64_t seed, bool strict = false) {
    auto base = [&](const std::string& name, Modality m, int epochs) {
        StagePlan p;
        p.name = name;
        p.modality = m;
        p.trainable = m == Modality::text_only ? std::set<std::string>{"label_head"}
                                               : regime_trainable(strict);
        p.epochs = epochs;
        p.seed = seed;
        return p;
    };
    std::vector<Regime> out;
    out.push_back({"joint", aspect, {base("joint", Modality::multimodal, kDefaultTotalEpochs)}});
    out.push_back({"text_only", aspect, {base("text_only", Modality::text_only, kDefaultTotalEpochs)}});
    out.push_back({"audio_only", aspect, {base("audio_only", Modality::audio_only, kDefaultTotalEpochs)}});
    Regime sfmt{"sfmt", aspect, {base("stage1", Modality::audio_only, kDefaultTotalEpochs / 2),
                                 base("stage2", Modality::multimodal, kDefaultTotalEpochs / 2)}};
    out.push_back(std::move(sfmt));
    for (auto& r : out) r.validate();
    return out;
}

// Warm phase standing in for a pretrained base, run once per aspect and
// seed; the four comparison regimes all start from its output. Every group
// trains, and the modality rotates per sequence so the backbone frozen
// afterwards copes with all three layouts. The small effective batch buys
// enough optimizer steps to converge on desk-scale corpora.
inline StagePlan bootstrap_plan(uint64_t seed, int epochs = 12, double lr = 2e-3) {
    StagePlan p;
    p.name = "bootstrap";
    p.modality = Modality::multimodal;
    p.cycle_modalities = true;
    p.trainable = {"audio_encoder", "audio_projector", "backbone", "text_embed", "label_head"};
    p.epochs = epochs;
    p.lr = lr;
    p.batch_size = 8;
    p.accum_steps = 1;
    p.seed = seed;
    return p;
}

}  // namespace sfmt
