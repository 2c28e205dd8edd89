#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "sfmt/corpus.hpp"
#include "sfmt/grader.hpp"
#include "sfmt/metrics.hpp"
#include "sfmt/optim.hpp"
#include "sfmt/plan.hpp"
#include "sfmt/vocab.hpp"

namespace sfmt {

inline int aspect_label(const Utterance& u, char aspect) {
    switch (aspect) {
        case 'C': return u.labels.content;
        case 'D': return u.labels.delivery;
        case 'L': return u.labels.language_use;
        case 'H': return u.labels.holistic;
        default: throw ConfigError(std::string("unknown aspect: ") + aspect);
    }
}

inline std::vector<const Utterance*> split_view(const std::vector<Utterance>& corpus,
                                                const std::string& split) {
    split_index(split);  // validates the name
    std::vector<const Utterance*> out;
    for (const auto& u : corpus)
        if (u.split == split) out.push_back(&u);
    return out;
}

// Hands out log-mel features per utterance, either read from a generated
// corpus directory or synthesized on demand; results are cached because
// training revisits every utterance each epoch.
class FeatureSource {
public:
    static FeatureSource from_dir(const std::string& manifest_dir);
    static FeatureSource synth(const CorpusSpec& spec);

    const TensorF& features(const Utterance& u);

private:
    FeatureSource() = default;
    bool synth_ = false;
    std::string root_;
    CorpusSpec spec_;
    std::unordered_map<std::string, TensorF> cache_;
};

struct TrainLogRow {
    std::string stage;
    int epoch = 0;
    int step = 0;
    double train_loss = 0;
    double valid_loss = 0;
    double valid_macro_acc = 0;
};

std::string log_row_json(const TrainLogRow& row);

struct StageResult {
    std::string stage;
    std::vector<TrainLogRow> rows;
    uint64_t start_hash = 0;
    uint64_t final_hash = 0;
    int steps = 0;
};

struct RegimeResult {
    std::string regime;
    char aspect = 'H';
    std::vector<StageResult> stages;
    // Parameter hash observed when entering each stage; for the two-stage
    // curriculum, entry hash of stage 2 must equal stage 1's final hash.
    std::vector<uint64_t> stage_entry_hashes;
    uint64_t final_hash = 0;
};

// Drives optimization of one grader. Gradients are accumulated per
// sequence, so batch_size x accum_steps only sets the update cadence; the
// same data order with the same effective batch gives bitwise-identical
// updates regardless of how the product is factored.
class Trainer {
public:
    Trainer(Grader<float>& grader, const Vocabulary& vocab) : g_(grader), vocab_(vocab) {}

    // max_steps > 0 caps optimizer updates for smoke tests.
    StageResult train_stage(const StagePlan& plan, char aspect,
                            const std::vector<const Utterance*>& train,
                            const std::vector<const Utterance*>& valid, FeatureSource& feats,
                            int max_steps = 0);

    RegimeResult run_regime(const Regime& regime, const std::vector<const Utterance*>& train,
                            const std::vector<const Utterance*>& valid, FeatureSource& feats);

    double mean_loss(char aspect, Modality modality, const std::vector<const Utterance*>& view,
                     FeatureSource& feats);

    PredictionSet predict(char aspect, Modality modality, const std::vector<const Utterance*>& view,
                          FeatureSource& feats);

private:
    struct Sequence {
        const Utterance* utt;
        char aspect;
        Modality modality;
    };

    GraderForward run_forward(Tape<float>& tape, const Sequence& s, FeatureSource& feats,
                              int target, const std::set<std::string>* trainable) const;

    Grader<float>& g_;
    const Vocabulary& vocab_;
};

}  // namespace sfmt
