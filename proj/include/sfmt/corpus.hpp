#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sfmt/rng.hpp"
#include "sfmt/tensor.hpp"

namespace sfmt {

inline constexpr int kNumSplits = 4;
inline constexpr std::array<const char*, kNumSplits> kSplitNames = {"train", "valid", "test", "unseen"};

int split_index(const std::string& name);

// Per-aspect level indices for one opinion (a rater's, or the resolved one).
struct AspectLevels {
    int content = 0;
    int delivery = 0;
    int language_use = 0;
    int holistic = 0;
};

// Construction bookkeeping: which latent factor drove each aspect. The
// delivery factor shapes only the acoustics; content and language-use
// factors shape only the token stream.
struct Latent {
    double content = 0;
    double delivery = 0;
    double language_use = 0;
};

struct Utterance {
    std::string id;
    std::string task_id;
    std::string speaker_id;
    std::string features_path;  // empty when features were not emitted
    std::string split;
    std::vector<std::string> transcript_ref;
    std::vector<std::string> transcript_asr;
    double measured_wer = 0.0;
    AspectLevels labels;
    std::array<AspectLevels, 3> raters{};
    Latent latent;
};

struct CorpusSpec {
    uint64_t seed = 7;
    // counts[split][level]
    std::array<std::array<int, 8>, kNumSplits> counts{};
    double rater_noise = 0.2;
    double target_wer = 0.1475;
    std::string seen_task = "A01";
    std::string unseen_task = "A02";
    bool emit_features = true;
    int threads = 1;

    int split_total(int split) const;
    int total() const;

    // Published per-level distribution of the reference corpus.
    static CorpusSpec defaults(uint64_t seed = 7);
    // Same shape rescaled to `total_utts` by largest remainder.
    static CorpusSpec scaled(int total_utts, uint64_t seed = 7);
    // Tiny corpus for smoke tests: `per_level` train and 1 valid utterance
    // per level, no test/unseen.
    static CorpusSpec tiny(int per_level_train, uint64_t seed = 7);
};

// Fixed word inventory backing transcript synthesis. Topic vocabularies of
// the two tasks are disjoint; distractors are shared.
struct WordInventory {
    std::vector<std::string> pronouns;
    std::vector<std::string> auxes;          // auxes[i] agrees with pronouns[i]
    std::vector<std::string> topics_seen;    // task A01
    std::vector<std::string> topics_unseen;  // task A02
    std::vector<std::string> distractors;
    std::vector<std::string> all_words() const;
};

const WordInventory& word_inventory();

// Three rater opinions of one true level: each shifts by at most one bin
// with total probability `noise` (split evenly up/down), clamped at the
// scale ends.
std::array<int, 3> simulate_raters(int true_level, double noise, Rng& rng);

// Deterministic synthesis of one utterance (everything except the feature
// matrix). `index` is global across the corpus and defines the id.
Utterance synth_utterance(const CorpusSpec& spec, int index, int split,
                          const AspectLevels& targets);

// Structured log-mel-like features for an utterance. Only the delivery
// latent and the utterance RNG shape them; token identities never do.
TensorF synth_features(const CorpusSpec& spec, const Utterance& u);

// Writes features/* plus manifest.jsonl under out_dir; returns the manifest
// path. Deterministic for a given spec regardless of spec.threads.
std::string generate_corpus(const CorpusSpec& spec, const std::string& out_dir);

// In-memory variant used by tests and probes; skips feature-file output
// unless spec.emit_features (features then land in out_dir).
std::vector<Utterance> build_corpus(const CorpusSpec& spec);

std::vector<Utterance> load_manifest(const std::string& path);
std::string utterance_to_json(const Utterance& u);

// counts[split][level] histogram of a corpus by the given aspect
// ('C','D','L','H').
std::array<std::array<int, 8>, kNumSplits> level_histogram(const std::vector<Utterance>& corpus,
                                                           char aspect);

// Human-readable per-split x per-level table.
std::string corpus_summary(const std::vector<Utterance>& corpus);

}  // namespace sfmt
