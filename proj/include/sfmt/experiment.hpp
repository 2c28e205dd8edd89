#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sfmt/corpus.hpp"
#include "sfmt/grader.hpp"
#include "sfmt/plan.hpp"
#include "sfmt/report.hpp"
#include "sfmt/trainer.hpp"
#include "sfmt/vocab.hpp"

namespace sfmt {

// The modality a regime is assessed under: each comparison row is evaluated
// with the same input channels it was tuned for.
Modality regime_eval_modality(const std::string& regime);

// Constrained inference for the supplied aspect models over one split view.
// One report per aspect; when C, D and L are all present an aggregated
// holistic report ("H_agg") is added, built per utterance from their
// predictions. A trained holistic model publishes under plain "H".
std::vector<LabeledReport> evaluate_models(const std::map<char, Grader<float>*>& models,
                                           const Vocabulary& vocab,
                                           const std::vector<const Utterance*>& view,
                                           Modality modality, FeatureSource& feats);

struct ExperimentOptions {
    int bootstrap_epochs = 12;  // warm-phase schedule (bootstrap_plan defaults)
    double bootstrap_lr = 2e-3;
    bool strict_adapters = false;  // narrow regime updates to audio_lora only
    ModelConfig model;
    uint64_t model_seed = 1;  // parameter init; training order comes from cell seeds
};

// One ablation cell: the named regime, started from the shared warm start
// for (aspect, seed), evaluated on the test split in its own modality.
struct CellOutcome {
    std::string regime;
    char aspect = 'H';
    uint64_t seed = 0;
    bool ok = false;
    std::string error;      // failure reason when !ok
    MetricsReport report;   // test-split metrics when ok
};

// Seed-aggregated grid entry.
struct AblationCell {
    int n = 0;
    double pcc_mean = 0, pcc_spread = 0;      // spread = sample stddev (0 for n=1)
    double macro_mean = 0, macro_spread = 0;
    bool pcc_defined = true;                  // false if any seed was degenerate
};

struct AblationReport {
    std::vector<std::string> regimes;
    std::string aspects;
    std::vector<uint64_t> seeds;
    std::vector<CellOutcome> cells;
    std::map<std::string, std::map<char, AblationCell>> grid;

    // modality-separation verdict on the delivery aspect
    bool has_delivery = false;
    double text_only_delivery_macro = 0;
    bool text_only_delivery_at_chance = false;  // mean macro <= 0.25
    double audio_only_delivery_macro = 0;

    // curriculum-vs-joint comparison on delivery PCC
    double sfmt_delivery_pcc = 0;
    double joint_delivery_pcc = 0;
    bool sfmt_beats_joint = false;        // strict mean improvement
    bool sfmt_within_slack = false;       // mean(sfmt) >= mean(joint) - 0.02

    std::string verdict;  // assembled human-readable summary lines
};

std::string ablation_text(const AblationReport& rep);
std::string ablation_json(const AblationReport& rep);
std::string ablation_csv(const AblationReport& rep);

// Owns one corpus and its feature cache, hands out warm starts, runs cells
// and grids. Warm starts are cached per (aspect, seed) so every regime in a
// grid row continues from the same parameters at equal regime compute.
class Laboratory {
public:
    Laboratory(CorpusSpec spec, ExperimentOptions opt);

    const CorpusSpec& spec() const { return spec_; }
    const Vocabulary& vocab() const { return vocab_; }
    const std::vector<Utterance>& corpus() const { return corpus_; }
    FeatureSource& features() { return feats_; }
    const std::vector<const Utterance*>& view(const std::string& split) const;

    // Cached warm start; trains on first request. The returned model is the
    // template every cell copies before regime training.
    const Grader<float>& bootstrap(char aspect, uint64_t seed);

    // artifacts_dir, when given, receives stage checkpoints, a JSONL train
    // log, and the cell's test report files.
    CellOutcome run_cell(const std::string& regime_name, char aspect, uint64_t seed,
                         const std::string* artifacts_dir = nullptr);

    AblationReport run_grid(const std::vector<std::string>& regimes, const std::string& aspects,
                            const std::vector<uint64_t>& seeds);

private:
    CorpusSpec spec_;
    ExperimentOptions opt_;
    std::vector<Utterance> corpus_;
    Vocabulary vocab_;
    FeatureSource feats_;
    std::vector<const Utterance*> train_, valid_, test_, unseen_;
    std::map<std::pair<char, uint64_t>, Grader<float>> boots_;
};

}  // namespace sfmt
