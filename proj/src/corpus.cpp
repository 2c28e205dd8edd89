#include "sfmt/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "sfmt/error.hpp"
#include "sfmt/levels.hpp"
#include "sfmt/mel.hpp"
#include "sfmt/wer.hpp"

namespace sfmt {

namespace fs = std::filesystem;
using njson = nlohmann::ordered_json;

// Train/Valid/Test/Unseen rows of the reference distribution.
static constexpr std::array<std::array<int, 8>, kNumSplits> kReferenceCounts = {{
    {34, 61, 76, 156, 150, 169, 79, 65},
    {8, 16, 19, 38, 39, 43, 23, 12},
    {11, 20, 23, 49, 50, 48, 32, 15},
    {9, 7, 12, 19, 12, 26, 23, 15},
}};

int split_index(const std::string& name) {
    for (int i = 0; i < kNumSplits; ++i)
        if (name == kSplitNames[static_cast<size_t>(i)]) return i;
    throw IndexError("unknown split: " + name);
}

int CorpusSpec::split_total(int split) const {
    int n = 0;
    for (int c : counts[static_cast<size_t>(split)]) n += c;
    return n;
}

int CorpusSpec::total() const {
    int n = 0;
    for (int s = 0; s < kNumSplits; ++s) n += split_total(s);
    return n;
}

CorpusSpec CorpusSpec::defaults(uint64_t seed) {
    CorpusSpec s;
    s.seed = seed;
    s.counts = kReferenceCounts;
    return s;
}

CorpusSpec CorpusSpec::scaled(int total_utts, uint64_t seed) {
    if (total_utts < 1) throw ConfigError("scaled corpus: total must be positive");
    CorpusSpec s = defaults(seed);
    int ref_total = s.total();
    struct Cell {
        int split, level;
        double frac;
    };
    std::vector<Cell> cells;
    int assigned = 0;
    for (int sp = 0; sp < kNumSplits; ++sp)
        for (int lv = 0; lv < 8; ++lv) {
            double share = static_cast<double>(kReferenceCounts[static_cast<size_t>(sp)][static_cast<size_t>(lv)]) *
                           total_utts / ref_total;
            int base = static_cast<int>(share);
            s.counts[static_cast<size_t>(sp)][static_cast<size_t>(lv)] = base;
            assigned += base;
            cells.push_back({sp, lv, share - base});
        }
    std::stable_sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) { return a.frac > b.frac; });
    for (int i = 0; i < total_utts - assigned; ++i) {
        const Cell& c = cells[static_cast<size_t>(i) % cells.size()];
        ++s.counts[static_cast<size_t>(c.split)][static_cast<size_t>(c.level)];
    }
    return s;
}

CorpusSpec CorpusSpec::tiny(int per_level_train, uint64_t seed) {
    if (per_level_train < 1) throw ConfigError("tiny corpus: per-level count must be positive");
    CorpusSpec s;
    s.seed = seed;
    for (int lv = 0; lv < 8; ++lv) {
        s.counts[0][static_cast<size_t>(lv)] = per_level_train;
        s.counts[1][static_cast<size_t>(lv)] = 1;
    }
    return s;
}

const WordInventory& word_inventory() {
    static const WordInventory inv = [] {
        WordInventory w;
        w.pronouns = {"i", "you", "he", "she", "we", "they"};
        w.auxes = {"am", "are", "is", "is", "are", "are"};
        w.topics_seen = {"travel", "hotel", "flight", "ticket", "luggage", "passport", "tourist", "beach"};
        w.topics_unseen = {"kitchen", "recipe", "flavor", "oven", "spice", "butter", "garlic", "dessert"};
        w.distractors = {"window", "pencil", "cloud", "river", "stone", "music", "garden", "letter"};
        return w;
    }();
    return inv;
}

std::vector<std::string> WordInventory::all_words() const {
    std::vector<std::string> all;
    for (const auto* v : {&pronouns, &auxes, &topics_seen, &topics_unseen, &distractors})
        all.insert(all.end(), v->begin(), v->end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    return all;
}

namespace {

int clamp_level(int idx) { return std::max(0, std::min(kNumLevels - 1, idx)); }

int rater_shift(double noise, Rng& rng) {
    double u = rng.uniform();
    if (u < noise / 2) return -1;
    if (u >= 1.0 - noise / 2) return 1;
    return 0;
}

std::string utt_id(int index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "u%05d", index);
    return buf;
}

std::string speaker_id(const CorpusSpec& spec, int split, int within) {
    static constexpr std::array<const char*, kNumSplits> prefix = {"spk_tr", "spk_va", "spk_te", "spk_un"};
    int pool = std::max(1, spec.split_total(split) / 6);
    char buf[24];
    std::snprintf(buf, sizeof buf, "%s%03d", prefix[static_cast<size_t>(split)], within % pool);
    return buf;
}

}  // namespace

std::array<int, 3> simulate_raters(int true_level, double noise, Rng& rng) {
    check_level(true_level);
    if (noise < 0.0 || noise > 1.0) throw ConfigError("rater noise must lie in [0,1]");
    std::array<int, 3> out{};
    for (int r = 0; r < 3; ++r) out[static_cast<size_t>(r)] = clamp_level(true_level + rater_shift(noise, rng));
    return out;
}

Utterance synth_utterance(const CorpusSpec& spec, int index, int split, const AspectLevels& targets) {
    const WordInventory& inv = word_inventory();
    Utterance u;
    u.id = utt_id(index);
    u.split = kSplitNames[static_cast<size_t>(split)];
    u.task_id = (split == 3) ? spec.unseen_task : spec.seen_task;

    int split_start = 0;
    for (int s = 0; s < split; ++s) split_start += spec.split_total(s);
    u.speaker_id = speaker_id(spec, split, index - split_start);

    // latent draw inside the target level's bin, so floor(delta * 8)
    // recovers the target exactly
    auto draw_delta = [&](const char* aspect, int level) {
        Rng r = Rng::keyed(spec.seed, u.id + "/delta/" + aspect);
        return (level + r.uniform()) / 8.0;
    };
    u.latent.content = draw_delta("C", targets.content);
    u.latent.delivery = draw_delta("D", targets.delivery);
    u.latent.language_use = draw_delta("L", targets.language_use);

    // transcript: [pronoun aux content-word] triples; the content factor
    // picks topic vs distractor words, the language factor corrupts
    // pronoun-aux agreement; the delivery factor never appears here
    Rng tok_rng = Rng::keyed(spec.seed, u.id + "/tokens");
    int n_triples = 6 + static_cast<int>(tok_rng.uniform_int(6));
    double p_corrupt = std::min(1.0, (1.0 - u.latent.language_use) * 0.8);
    const auto& topics = (split == 3) ? inv.topics_unseen : inv.topics_seen;
    for (int t = 0; t < n_triples; ++t) {
        size_t p = tok_rng.uniform_int(inv.pronouns.size());
        std::string aux = inv.auxes[p];
        if (tok_rng.bernoulli(p_corrupt)) {
            std::vector<std::string> wrong;
            for (const auto& a : inv.auxes)
                if (a != aux && std::find(wrong.begin(), wrong.end(), a) == wrong.end()) wrong.push_back(a);
            aux = wrong[tok_rng.uniform_int(wrong.size())];
        }
        const auto& content_pool = tok_rng.bernoulli(u.latent.content) ? topics : inv.distractors;
        u.transcript_ref.push_back(inv.pronouns[p]);
        u.transcript_ref.push_back(aux);
        u.transcript_ref.push_back(content_pool[tok_rng.uniform_int(content_pool.size())]);
    }

    // task-local confusion pool: simulated ASR never leaks the other
    // task's topic vocabulary across the seen/unseen boundary
    Rng asr_rng = Rng::keyed(spec.seed, u.id + "/asr");
    std::vector<std::string> pool = inv.pronouns;
    pool.insert(pool.end(), inv.auxes.begin(), inv.auxes.end());
    pool.insert(pool.end(), inv.distractors.begin(), inv.distractors.end());
    pool.insert(pool.end(), topics.begin(), topics.end());
    std::sort(pool.begin(), pool.end());
    pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
    CorruptResult asr = corrupt_transcript(u.transcript_ref, spec.target_wer, asr_rng, pool);
    u.transcript_asr = std::move(asr.tokens);
    u.measured_wer = asr.measured_wer;

    // Each rater applies one leniency shift across all aspects, which keeps
    // the voted holistic label equal to the aggregate of the voted aspects.
    // Shift triples are redrawn until their median is zero so the resolved
    // labels land exactly on the allocated targets; disagreement survives in
    // the rater fields without perturbing the per-level counts.
    Rng rater_rng = Rng::keyed(spec.seed, u.id + "/raters");
    std::array<int, 3> shifts{};
    for (int tries = 0; tries < 64; ++tries) {
        for (int r = 0; r < 3; ++r) shifts[static_cast<size_t>(r)] = rater_shift(spec.rater_noise, rater_rng);
        auto sorted = shifts;
        std::sort(sorted.begin(), sorted.end());
        if (sorted[1] == 0) break;
        if (tries == 63) shifts = {0, 0, 0};
    }
    std::array<int, 3> votes_c{}, votes_d{}, votes_l{}, votes_h{};
    for (int r = 0; r < 3; ++r) {
        int shift = shifts[static_cast<size_t>(r)];
        AspectLevels& rl = u.raters[static_cast<size_t>(r)];
        rl.content = clamp_level(targets.content + shift);
        rl.delivery = clamp_level(targets.delivery + shift);
        rl.language_use = clamp_level(targets.language_use + shift);
        rl.holistic = holistic_aggregate(rl.content, rl.delivery, rl.language_use);
        votes_c[static_cast<size_t>(r)] = rl.content;
        votes_d[static_cast<size_t>(r)] = rl.delivery;
        votes_l[static_cast<size_t>(r)] = rl.language_use;
        votes_h[static_cast<size_t>(r)] = rl.holistic;
    }
    u.labels.content = majority_vote(votes_c[0], votes_c[1], votes_c[2]);
    u.labels.delivery = majority_vote(votes_d[0], votes_d[1], votes_d[2]);
    u.labels.language_use = majority_vote(votes_l[0], votes_l[1], votes_l[2]);
    u.labels.holistic = majority_vote(votes_h[0], votes_h[1], votes_h[2]);
    return u;
}

namespace {

// Formant-band templates: which mel bands a pseudo-syllable excites.
// Template choice is driven by the utterance RNG, never by token identity,
// so the acoustics carry no content or language-use information.
constexpr int kNumTemplates = 12;
constexpr int kTemplateBands[kNumTemplates][3] = {
    {2, 11, 23},  {4, 14, 27},  {6, 17, 30},  {8, 20, 33},
    {3, 13, 25},  {5, 16, 29},  {7, 19, 32},  {9, 22, 35},
    {2, 15, 28},  {4, 18, 31},  {6, 21, 34},  {8, 12, 26},
};

}  // namespace

TensorF synth_features(const CorpusSpec& spec, const Utterance& u) {
    Rng rng = Rng::keyed(spec.seed, u.id + "/features");
    double dd = u.latent.delivery;
    double noise_off = (1.0 - dd) * 14.0;
    int dur = static_cast<int>(std::floor(4.0 * (1.9 - dd) + 0.5));
    double p_pause = 0.4 * (1.0 - dd);

    std::vector<std::array<float, kMelBands>> rows;
    auto noise_frame = [&] {
        std::array<float, kMelBands> row{};
        for (int b = 0; b < kMelBands; ++b)
            row[static_cast<size_t>(b)] =
                static_cast<float>(kLogFloor + noise_off * (0.8 + 0.2 * rng.uniform()));
        return row;
    };

    for (int i = 0; i < 3; ++i) rows.push_back(noise_frame());
    for (size_t tok = 0; tok < u.transcript_ref.size(); ++tok) {
        const int* bands = kTemplateBands[rng.uniform_int(kNumTemplates)];
        for (int f = 0; f < dur; ++f) {
            auto row = noise_frame();
            for (int k = 0; k < 3; ++k)
                row[static_cast<size_t>(bands[k])] =
                    static_cast<float>(kLogFloor + 17.0 + 1.5 * rng.uniform());
            rows.push_back(row);
        }
        if (rng.bernoulli(p_pause)) {
            int plen = 2 + static_cast<int>(rng.uniform_int(3));
            for (int f = 0; f < plen; ++f) rows.push_back(noise_frame());
        }
    }
    for (int i = 0; i < 3; ++i) rows.push_back(noise_frame());

    TensorF out = TensorF::zeros({static_cast<int>(rows.size()), kMelBands});
    for (size_t r = 0; r < rows.size(); ++r)
        for (int b = 0; b < kMelBands; ++b) out.at(static_cast<int>(r), b) = rows[r][static_cast<size_t>(b)];
    return out;
}

namespace {

void validate_spec(const CorpusSpec& spec) {
    for (const auto& row : spec.counts)
        for (int c : row)
            if (c < 0) throw ConfigError("corpus spec: negative count");
    if (spec.total() == 0) throw ConfigError("corpus spec: zero-count corpus");
    if (spec.target_wer < 0.0 || spec.target_wer > 0.5)
        throw ConfigError("corpus spec: target_wer must lie in [0, 0.5]");
    if (spec.rater_noise < 0.0 || spec.rater_noise > 1.0)
        throw ConfigError("corpus spec: rater_noise must lie in [0, 1]");
    if (spec.threads < 1) throw ConfigError("corpus spec: threads must be >= 1");
    if (spec.seen_task == spec.unseen_task) throw ConfigError("corpus spec: tasks must differ");
}

// targets[split][i] = per-aspect levels of the i-th utterance of the split.
// Each aspect permutes the same per-split level multiset independently, so
// aspect levels are mutually independent while every aspect's per-level
// histogram matches the spec counts exactly.
std::array<std::vector<AspectLevels>, kNumSplits> allocate_targets(const CorpusSpec& spec) {
    std::array<std::vector<AspectLevels>, kNumSplits> out;
    for (int sp = 0; sp < kNumSplits; ++sp) {
        std::vector<int> base;
        for (int lv = 0; lv < 8; ++lv)
            base.insert(base.end(), static_cast<size_t>(spec.counts[static_cast<size_t>(sp)][static_cast<size_t>(lv)]), lv);
        size_t n = base.size();
        out[static_cast<size_t>(sp)].resize(n);
        static constexpr std::array<const char*, 3> aspects = {"C", "D", "L"};
        for (int a = 0; a < 3; ++a) {
            Rng rng = Rng::keyed(spec.seed, std::string("alloc/") + kSplitNames[static_cast<size_t>(sp)] + "/" +
                                                aspects[static_cast<size_t>(a)]);
            auto perm = rng.permutation(n);
            for (size_t i = 0; i < n; ++i) {
                int lv = base[perm[i]];
                auto& t = out[static_cast<size_t>(sp)][i];
                if (a == 0) t.content = lv;
                else if (a == 1) t.delivery = lv;
                else t.language_use = lv;
            }
        }
        for (auto& t : out[static_cast<size_t>(sp)])
            t.holistic = holistic_aggregate(t.content, t.delivery, t.language_use);
    }
    return out;
}

njson levels_to_json(const AspectLevels& l) {
    njson j;
    j["content"] = level_name(l.content);
    j["delivery"] = level_name(l.delivery);
    j["language_use"] = level_name(l.language_use);
    j["holistic"] = level_name(l.holistic);
    return j;
}

AspectLevels levels_from_json(const njson& j) {
    AspectLevels l;
    l.content = level_index(j.at("content").get<std::string>());
    l.delivery = level_index(j.at("delivery").get<std::string>());
    l.language_use = level_index(j.at("language_use").get<std::string>());
    l.holistic = level_index(j.at("holistic").get<std::string>());
    return l;
}

std::string join_tokens(const std::vector<std::string>& toks) {
    std::string s;
    for (size_t i = 0; i < toks.size(); ++i) {
        if (i) s += ' ';
        s += toks[i];
    }
    return s;
}

std::vector<std::string> split_tokens(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string w;
    while (is >> w) out.push_back(w);
    return out;
}

}  // namespace

std::string utterance_to_json(const Utterance& u) {
    njson j;
    j["id"] = u.id;
    j["task_id"] = u.task_id;
    j["speaker_id"] = u.speaker_id;
    j["features_path"] = u.features_path;
    j["transcript_ref"] = join_tokens(u.transcript_ref);
    j["transcript_asr"] = join_tokens(u.transcript_asr);
    j["measured_wer"] = u.measured_wer;
    j["labels"] = levels_to_json(u.labels);
    njson raters = njson::array();
    for (const auto& r : u.raters) raters.push_back(levels_to_json(r));
    j["raters"] = raters;
    j["split"] = u.split;
    j["latent"] = njson{{"content", u.latent.content},
                        {"delivery", u.latent.delivery},
                        {"language_use", u.latent.language_use}};
    return j.dump();
}

namespace {

Utterance utterance_from_json(const std::string& line) {
    njson j = njson::parse(line);
    Utterance u;
    u.id = j.at("id").get<std::string>();
    u.task_id = j.at("task_id").get<std::string>();
    u.speaker_id = j.at("speaker_id").get<std::string>();
    u.features_path = j.at("features_path").get<std::string>();
    u.transcript_ref = split_tokens(j.at("transcript_ref").get<std::string>());
    u.transcript_asr = split_tokens(j.at("transcript_asr").get<std::string>());
    u.measured_wer = j.at("measured_wer").get<double>();
    u.labels = levels_from_json(j.at("labels"));
    const auto& raters = j.at("raters");
    if (raters.size() != 3) throw FormatError("manifest: expected exactly 3 raters for " + u.id);
    for (size_t r = 0; r < 3; ++r) u.raters[r] = levels_from_json(raters[r]);
    u.split = j.at("split").get<std::string>();
    split_index(u.split);
    const auto& lat = j.at("latent");
    u.latent.content = lat.at("content").get<double>();
    u.latent.delivery = lat.at("delivery").get<double>();
    u.latent.language_use = lat.at("language_use").get<double>();
    return u;
}

}  // namespace

std::vector<Utterance> build_corpus(const CorpusSpec& spec) {
    validate_spec(spec);
    auto targets = allocate_targets(spec);
    std::vector<Utterance> corpus;
    corpus.reserve(static_cast<size_t>(spec.total()));
    int index = 0;
    for (int sp = 0; sp < kNumSplits; ++sp)
        for (const auto& t : targets[static_cast<size_t>(sp)]) corpus.push_back(synth_utterance(spec, index++, sp, t));
    return corpus;
}

std::string generate_corpus(const CorpusSpec& spec, const std::string& out_dir) {
    validate_spec(spec);
    std::error_code ec;
    fs::create_directories(fs::path(out_dir) / "features", ec);
    if (ec) throw FormatError("corpus: cannot create " + out_dir + ": " + ec.message());

    auto targets = allocate_targets(spec);
    struct Slot {
        int split;
        AspectLevels target;
    };
    std::vector<Slot> slots;
    for (int sp = 0; sp < kNumSplits; ++sp)
        for (const auto& t : targets[static_cast<size_t>(sp)]) slots.push_back({sp, t});

    std::vector<std::string> lines(slots.size());
    std::vector<std::string> errors(static_cast<size_t>(spec.threads));

    auto work = [&](int tid) {
        try {
            for (size_t i = static_cast<size_t>(tid); i < slots.size(); i += static_cast<size_t>(spec.threads)) {
                Utterance u = synth_utterance(spec, static_cast<int>(i), slots[i].split, slots[i].target);
                if (spec.emit_features) {
                    u.features_path = "features/" + u.id + ".feat";
                    TensorF fm = synth_features(spec, u);
                    save_features(fm, (fs::path(out_dir) / u.features_path).string());
                }
                lines[i] = utterance_to_json(u);
            }
        } catch (const std::exception& e) {
            errors[static_cast<size_t>(tid)] = e.what();
        }
    };

    if (spec.threads == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < spec.threads; ++t) pool.emplace_back(work, t);
        for (auto& th : pool) th.join();
    }
    for (const auto& e : errors)
        if (!e.empty()) throw TrainError("corpus generation failed: " + e);

    std::string manifest = (fs::path(out_dir) / "manifest.jsonl").string();
    std::ofstream f(manifest, std::ios::binary);
    if (!f) throw FormatError("corpus: cannot write " + manifest);
    for (const auto& line : lines) f << line << '\n';
    if (!f) throw FormatError("corpus: manifest write failed");
    return manifest;
}

std::vector<Utterance> load_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw FormatError("manifest: cannot open " + path);
    std::vector<Utterance> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(utterance_from_json(line));
        } catch (const njson::exception& e) {
            throw FormatError("manifest: line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (out.empty()) throw FormatError("manifest: no utterances in " + path);
    return out;
}

std::array<std::array<int, 8>, kNumSplits> level_histogram(const std::vector<Utterance>& corpus, char aspect) {
    std::array<std::array<int, 8>, kNumSplits> h{};
    for (const auto& u : corpus) {
        int lv = 0;
        switch (aspect) {
            case 'C': lv = u.labels.content; break;
            case 'D': lv = u.labels.delivery; break;
            case 'L': lv = u.labels.language_use; break;
            case 'H': lv = u.labels.holistic; break;
            default: throw ConfigError(std::string("unknown aspect code: ") + aspect);
        }
        ++h[static_cast<size_t>(split_index(u.split))][static_cast<size_t>(lv)];
    }
    return h;
}

std::string corpus_summary(const std::vector<Utterance>& corpus) {
    std::ostringstream os;
    os << "split    total";
    for (int lv = 0; lv < 8; ++lv) os << "  " << kLevelNames[static_cast<size_t>(lv)];
    os << "  (by holistic label)\n";
    auto h = level_histogram(corpus, 'H');
    for (int sp = 0; sp < kNumSplits; ++sp) {
        int tot = 0;
        for (int c : h[static_cast<size_t>(sp)]) tot += c;
        os << kSplitNames[static_cast<size_t>(sp)];
        for (size_t pad = std::string(kSplitNames[static_cast<size_t>(sp)]).size(); pad < 9; ++pad) os << ' ';
        os << tot;
        for (int lv = 0; lv < 8; ++lv) os << "  " << h[static_cast<size_t>(sp)][static_cast<size_t>(lv)];
        os << '\n';
    }
    return os.str();
}

}  // namespace sfmt
