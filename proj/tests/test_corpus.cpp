#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "doctest.h"
#include "sfmt/corpus.hpp"
#include "sfmt/error.hpp"
#include "sfmt/levels.hpp"
#include "sfmt/mel.hpp"
#include "sfmt/rng.hpp"
#include "sfmt/vocab.hpp"
#include "sfmt/wer.hpp"

using namespace sfmt;
namespace fs = std::filesystem;

namespace {

// Independent quadratic edit-distance oracle (full matrix, no rolling rows).
size_t edit_distance_oracle(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    size_t n = a.size(), m = b.size();
    std::vector<std::vector<size_t>> d(n + 1, std::vector<size_t>(m + 1, 0));
    for (size_t i = 0; i <= n; ++i) d[i][0] = i;
    for (size_t j = 0; j <= m; ++j) d[0][j] = j;
    for (size_t i = 1; i <= n; ++i)
        for (size_t j = 1; j <= m; ++j) {
            size_t best = d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            best = std::min(best, d[i - 1][j] + 1);
            best = std::min(best, d[i][j - 1] + 1);
            d[i][j] = best;
        }
    return d[n][m];
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::path("tmp_corpus") / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::vector<char> slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::vector<char>((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

int label_of(const Utterance& u, char aspect) {
    switch (aspect) {
        case 'C': return u.labels.content;
        case 'D': return u.labels.delivery;
        default: return u.labels.language_use;
    }
}

// Token-count design matrix shared by both probes: per-word normalized
// counts, a length feature, and a bias column. Nothing shared with the
// library's model code.
void token_features(const std::vector<Utterance>& corpus, char aspect,
                    std::vector<std::vector<double>>& x, std::vector<int>& y) {
    std::vector<std::string> words = word_inventory().all_words();
    std::map<std::string, size_t> wid;
    for (size_t i = 0; i < words.size(); ++i) wid[words[i]] = i;
    size_t dim = words.size() + 2;
    for (const auto& u : corpus) {
        std::vector<double> f(dim, 0.0);
        for (const auto& t : u.transcript_ref) f[wid.at(t)] += 1.0;
        double len = static_cast<double>(u.transcript_ref.size());
        for (size_t i = 0; i < words.size(); ++i) f[i] /= len;
        f[words.size()] = len / 33.0;
        f[words.size() + 1] = 1.0;
        x.push_back(std::move(f));
        y.push_back(label_of(u, aspect));
    }
}

// Least-squares probe: solve the normal equations on 80% of the corpus and
// return the held-out Pearson correlation between prediction and gold level.
double token_probe_pearson(const std::vector<Utterance>& corpus, char aspect) {
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    token_features(corpus, aspect, x, y);
    size_t dim = x[0].size();

    std::vector<size_t> train_idx, test_idx;
    for (size_t i = 0; i < x.size(); ++i) (i % 5 == 4 ? test_idx : train_idx).push_back(i);

    std::vector<std::vector<double>> a(dim, std::vector<double>(dim + 1, 0.0));
    for (size_t i : train_idx)
        for (size_t r = 0; r < dim; ++r) {
            for (size_t c = 0; c < dim; ++c) a[r][c] += x[i][r] * x[i][c];
            a[r][dim] += x[i][r] * y[i];
        }
    for (size_t r = 0; r < dim; ++r) a[r][r] += 1e-8;  // conditioning

    // gaussian elimination with partial pivoting
    for (size_t col = 0; col < dim; ++col) {
        size_t piv = col;
        for (size_t r = col + 1; r < dim; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
        std::swap(a[col], a[piv]);
        for (size_t r = 0; r < dim; ++r) {
            if (r == col || a[r][col] == 0.0) continue;
            double m = a[r][col] / a[col][col];
            for (size_t c = col; c <= dim; ++c) a[r][c] -= m * a[col][c];
        }
    }
    std::vector<double> w(dim);
    for (size_t r = 0; r < dim; ++r) w[r] = a[r][dim] / a[r][r];

    double sp = 0, sg = 0, spp = 0, sgg = 0, spg = 0;
    double n = static_cast<double>(test_idx.size());
    for (size_t i : test_idx) {
        double p = 0;
        for (size_t d = 0; d < dim; ++d) p += w[d] * x[i][d];
        double g = static_cast<double>(y[i]);
        sp += p;
        sg += g;
        spp += p * p;
        sgg += g * g;
        spg += p * g;
    }
    double cov = spg / n - (sp / n) * (sg / n);
    double vp = spp / n - (sp / n) * (sp / n);
    double vg = sgg / n - (sg / n) * (sg / n);
    return cov / std::sqrt(std::max(vp * vg, 1e-30));
}

// Multinomial logistic probe, held-out macro accuracy over the 8 levels;
// used as the ceiling check that tokens carry no delivery information.
double token_probe_macro(const std::vector<Utterance>& corpus, char aspect) {
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    token_features(corpus, aspect, x, y);
    size_t dim = x[0].size();

    std::vector<size_t> train_idx, test_idx;
    for (size_t i = 0; i < x.size(); ++i) (i % 5 == 4 ? test_idx : train_idx).push_back(i);

    std::vector<std::array<double, 8>> w(dim, std::array<double, 8>{});
    std::vector<double> logits(8), probs(8);
    for (int epoch = 0; epoch < 300; ++epoch) {
        std::vector<std::array<double, 8>> g(dim, std::array<double, 8>{});
        for (size_t i : train_idx) {
            for (int c = 0; c < 8; ++c) {
                logits[static_cast<size_t>(c)] = 0;
                for (size_t d = 0; d < dim; ++d)
                    logits[static_cast<size_t>(c)] += x[i][d] * w[d][static_cast<size_t>(c)];
            }
            double mx = *std::max_element(logits.begin(), logits.end());
            double z = 0;
            for (int c = 0; c < 8; ++c) z += std::exp(logits[static_cast<size_t>(c)] - mx);
            for (int c = 0; c < 8; ++c) probs[static_cast<size_t>(c)] = std::exp(logits[static_cast<size_t>(c)] - mx) / z;
            probs[static_cast<size_t>(y[i])] -= 1.0;
            for (size_t d = 0; d < dim; ++d)
                if (x[i][d] != 0.0)
                    for (int c = 0; c < 8; ++c) g[d][static_cast<size_t>(c)] += x[i][d] * probs[static_cast<size_t>(c)];
        }
        double lr = 2.0 / static_cast<double>(train_idx.size());
        for (size_t d = 0; d < dim; ++d)
            for (int c = 0; c < 8; ++c) w[d][static_cast<size_t>(c)] -= lr * g[d][static_cast<size_t>(c)];
    }

    std::array<int, 8> hit{}, tot{};
    for (size_t i : test_idx) {
        int arg = 0;
        double best = -1e300;
        for (int c = 0; c < 8; ++c) {
            double s = 0;
            for (size_t d = 0; d < dim; ++d) s += x[i][d] * w[d][static_cast<size_t>(c)];
            if (s > best) {
                best = s;
                arg = c;
            }
        }
        ++tot[static_cast<size_t>(y[i])];
        if (arg == y[i]) ++hit[static_cast<size_t>(y[i])];
    }
    double macro = 0;
    int present = 0;
    for (int c = 0; c < 8; ++c)
        if (tot[static_cast<size_t>(c)] > 0) {
            macro += static_cast<double>(hit[static_cast<size_t>(c)]) / tot[static_cast<size_t>(c)];
            ++present;
        }
    return macro / present;
}

}  // namespace

TEST_CASE("level scale values and names") {
    CHECK(level_value(0) == 0.0);
    CHECK(level_value(3) == 1.5);
    CHECK(level_value(7) == 3.5);
    CHECK(level_index("Pre-A") == 0);
    CHECK(level_index("B2") == 7);
    CHECK(std::string(level_name(4)) == "A2+");
    CHECK_THROWS_AS(level_value(8), IndexError);
    CHECK_THROWS_AS(level_index("C1"), IndexError);
    for (int i = 1; i < 8; ++i) CHECK(level_value(i) - level_value(i - 1) == 0.5);
}

TEST_CASE("majority vote: mode, unanimity, median tie rule") {
    CHECK(majority_vote(3, 3, 5) == 3);   // (A2, A2, B1) -> A2
    CHECK(majority_vote(1, 3, 5) == 3);   // (A1, A2, B1) -> A2 via median
    CHECK(majority_vote(5, 5, 5) == 5);   // unanimity
    Rng rng(9);
    for (int i = 0; i < 500; ++i) {
        int a = static_cast<int>(rng.uniform_int(8));
        int b = static_cast<int>(rng.uniform_int(8));
        int c = static_cast<int>(rng.uniform_int(8));
        int got = majority_vote(a, b, c);
        // brute-force oracle: mode if one exists, else sorted middle
        std::array<int, 3> s{a, b, c};
        std::sort(s.begin(), s.end());
        int want = (a == b || a == c) ? a : (b == c ? b : s[1]);
        CHECK(got == want);
        CHECK(got == majority_vote(c, a, b));
    }
}

TEST_CASE("holistic aggregation matches a value-space oracle on all triples") {
    CHECK(holistic_aggregate(5, 5, 5) == 5);  // (B1,B1,B1) -> B1
    CHECK(holistic_aggregate(3, 4, 5) == 4);  // (A2,A2+,B1): mean value 2.0 -> A2+
    for (int a = 0; a < 8; ++a)
        for (int b = 0; b < 8; ++b)
            for (int c = 0; c < 8; ++c) {
                double mean = (level_value(a) + level_value(b) + level_value(c)) / 3.0;
                int best = 0;
                for (int k = 1; k < 8; ++k) {
                    double cur = std::fabs(level_value(k) - mean);
                    double so_far = std::fabs(level_value(best) - mean);
                    if (cur < so_far - 1e-12 || std::fabs(cur - so_far) <= 1e-12) best = k;  // ties up
                }
                CHECK(holistic_aggregate(a, b, c) == best);
            }
}

TEST_CASE("rater simulation: noiseless, truncation, empirical rate") {
    Rng rng(15);
    auto r0 = simulate_raters(4, 0.0, rng);
    CHECK((r0[0] == 4 && r0[1] == 4 && r0[2] == 4));

    for (int i = 0; i < 200; ++i) {
        auto r = simulate_raters(7, 0.5, rng);
        for (int v : r) CHECK(v <= 7);
        auto r2 = simulate_raters(0, 0.5, rng);
        for (int v : r2) CHECK(v >= 0);
    }

    int shifted = 0, draws = 0;
    for (int i = 0; i < 3400; ++i) {
        auto r = simulate_raters(4, 0.2, rng);
        for (int v : r) {
            ++draws;
            if (v != 4) ++shifted;
        }
    }
    double freq = static_cast<double>(shifted) / draws;
    CHECK(freq >= 0.18);
    CHECK(freq <= 0.22);

    CHECK_THROWS_AS(simulate_raters(3, -0.1, rng), ConfigError);
    CHECK_THROWS_AS(simulate_raters(9, 0.1, rng), IndexError);
}

TEST_CASE("levenshtein basics and symmetry") {
    using V = std::vector<std::string>;
    CHECK(levenshtein(V{"a", "b", "c"}, V{"a", "b", "c"}) == 0);
    CHECK(levenshtein(V{"a", "b", "c"}, V{"a", "x", "c"}) == 1);
    CHECK(levenshtein(V{"a", "b", "c"}, V{"b", "c"}) == 1);
    CHECK(levenshtein(V{"a", "b", "c"}, V{"a", "b", "c", "d"}) == 1);
    CHECK(levenshtein(V{}, V{"a", "b"}) == 2);
    Rng rng(4);
    std::vector<std::string> alpha = {"w1", "w2", "w3", "w4"};
    for (int i = 0; i < 50; ++i) {
        V a, b;
        for (size_t k = 0; k < rng.uniform_int(12); ++k) a.push_back(alpha[rng.uniform_int(4)]);
        for (size_t k = 0; k < rng.uniform_int(12); ++k) b.push_back(alpha[rng.uniform_int(4)]);
        size_t d = levenshtein(a, b);
        CHECK(d == levenshtein(b, a));
        CHECK(d == edit_distance_oracle(a, b));
        CHECK(d <= std::max(a.size(), b.size()));
    }
}

TEST_CASE("transcript corruption: identity, validation, deletion stress") {
    std::vector<std::string> ref;
    Rng fill(8);
    std::vector<std::string> pool = word_inventory().all_words();
    for (int i = 0; i < 200; ++i) ref.push_back(pool[fill.uniform_int(pool.size())]);

    Rng rng(1);
    auto clean = corrupt_transcript(ref, 0.0, rng, pool);
    CHECK(clean.tokens == ref);
    CHECK(clean.measured_wer == 0.0);

    CHECK_THROWS_AS(corrupt_transcript({}, 0.1, rng, pool), DimError);
    CHECK_THROWS_AS(corrupt_transcript(ref, 0.6, rng, pool), ConfigError);
    CHECK_THROWS_AS(corrupt_transcript(ref, -0.1, rng, pool), ConfigError);

    // deletions only: edit distance is exactly the number of dropped tokens
    EditRatios del_only{0.0, 0.0, 1.0};
    auto del = corrupt_transcript(ref, 0.3, rng, pool, del_only);
    size_t dropped = ref.size() - del.tokens.size();
    CHECK(edit_distance_oracle(ref, del.tokens) == dropped);
    CHECK(del.measured_wer == static_cast<double>(dropped) / ref.size());
}

TEST_CASE("corpus-level wer lands near the target against an independent oracle") {
    std::vector<std::string> pool = word_inventory().all_words();
    Rng fill(21);
    size_t total_ref = 0, total_edits = 0;
    int utts = 0;
    while (total_ref < 10500) {
        std::vector<std::string> ref;
        size_t n = 18 + fill.uniform_int(16);
        for (size_t i = 0; i < n; ++i) ref.push_back(pool[fill.uniform_int(pool.size())]);
        Rng rng = Rng::keyed(99, "wer/" + std::to_string(utts++));
        auto res = corrupt_transcript(ref, 0.1475, rng, pool);
        size_t d = edit_distance_oracle(ref, res.tokens);
        CHECK(res.measured_wer == static_cast<double>(d) / n);
        total_ref += n;
        total_edits += d;
    }
    double corpus_wer = static_cast<double>(total_edits) / total_ref;
    CHECK(corpus_wer >= 0.1275);
    CHECK(corpus_wer <= 0.1675);
}

TEST_CASE("default corpus matches the reference per-level counts for every aspect") {
    auto corpus = build_corpus(CorpusSpec::defaults(7));
    CHECK(corpus.size() == 1359);
    std::array<int, 8> train_row = {34, 61, 76, 156, 150, 169, 79, 65};
    std::array<int, 8> valid_row = {8, 16, 19, 38, 39, 43, 23, 12};
    std::array<int, 8> test_row = {11, 20, 23, 49, 50, 48, 32, 15};
    std::array<int, 8> unseen_row = {9, 7, 12, 19, 12, 26, 23, 15};
    for (char aspect : {'C', 'D', 'L'}) {
        auto h = level_histogram(corpus, aspect);
        CHECK(h[0] == train_row);
        CHECK(h[1] == valid_row);
        CHECK(h[2] == test_row);
        CHECK(h[3] == unseen_row);
    }
}

TEST_CASE("stored labels are the majority vote of raters and holistic aggregates") {
    auto spec = CorpusSpec::scaled(300, 11);
    auto corpus = build_corpus(spec);
    for (const auto& u : corpus) {
        CHECK(u.labels.content == majority_vote(u.raters[0].content, u.raters[1].content, u.raters[2].content));
        CHECK(u.labels.delivery ==
              majority_vote(u.raters[0].delivery, u.raters[1].delivery, u.raters[2].delivery));
        CHECK(u.labels.language_use ==
              majority_vote(u.raters[0].language_use, u.raters[1].language_use, u.raters[2].language_use));
        CHECK(u.labels.holistic ==
              majority_vote(u.raters[0].holistic, u.raters[1].holistic, u.raters[2].holistic));
        CHECK(u.labels.holistic == holistic_aggregate(u.labels.content, u.labels.delivery, u.labels.language_use));
        for (const auto& r : u.raters)
            CHECK(r.holistic == holistic_aggregate(r.content, r.delivery, r.language_use));
    }
}

TEST_CASE("latent factors sit inside their label bins and drive stored wer") {
    auto corpus = build_corpus(CorpusSpec::scaled(250, 3));
    for (const auto& u : corpus) {
        CHECK(std::min(7, static_cast<int>(u.latent.content * 8.0)) == u.labels.content);
        CHECK(std::min(7, static_cast<int>(u.latent.delivery * 8.0)) == u.labels.delivery);
        CHECK(std::min(7, static_cast<int>(u.latent.language_use * 8.0)) == u.labels.language_use);
        size_t d = edit_distance_oracle(u.transcript_ref, u.transcript_asr);
        CHECK(u.measured_wer ==
              doctest::Approx(static_cast<double>(d) / u.transcript_ref.size()).epsilon(1e-12));
    }
}

TEST_CASE("speaker and topic disjointness across splits") {
    auto corpus = build_corpus(CorpusSpec::scaled(400, 5));
    std::array<std::set<std::string>, kNumSplits> speakers;
    const auto& inv = word_inventory();
    std::set<std::string> seen_topics(inv.topics_seen.begin(), inv.topics_seen.end());
    std::set<std::string> unseen_topics(inv.topics_unseen.begin(), inv.topics_unseen.end());
    for (const auto& u : corpus) {
        int sp = split_index(u.split);
        speakers[static_cast<size_t>(sp)].insert(u.speaker_id);
        CHECK(u.task_id == (sp == 3 ? "A02" : "A01"));
        const auto& forbidden = (sp == 3) ? seen_topics : unseen_topics;
        for (const auto* tr : {&u.transcript_ref, &u.transcript_asr})
            for (const auto& t : *tr) CHECK(forbidden.count(t) == 0);
    }
    for (int a = 0; a < kNumSplits; ++a)
        for (int b = a + 1; b < kNumSplits; ++b) {
            std::vector<std::string> inter;
            std::set_intersection(speakers[static_cast<size_t>(a)].begin(), speakers[static_cast<size_t>(a)].end(),
                                  speakers[static_cast<size_t>(b)].begin(), speakers[static_cast<size_t>(b)].end(),
                                  std::back_inserter(inter));
            CHECK(inter.empty());
        }
}

TEST_CASE("features depend on the delivery latent but never on token identity") {
    auto spec = CorpusSpec::scaled(200, 13);
    auto corpus = build_corpus(spec);

    const Utterance& u = corpus[17];
    TensorF a = synth_features(spec, u);
    CHECK(a.cols() == kMelBands);
    CHECK(a.rows() <= 512);
    for (float v : a.data) CHECK(v >= static_cast<float>(kLogFloor));

    TensorF b = synth_features(spec, u);
    CHECK(a.data == b.data);

    // swap every token for a different word (same count): bytes identical
    Utterance mutated = u;
    for (auto& t : mutated.transcript_ref) t = (t == "cloud") ? "stone" : "cloud";
    TensorF c = synth_features(spec, mutated);
    CHECK(a.data == c.data);

    // crafted extremes: low delivery -> longer, noisier features
    Utterance lo = u, hi = u;
    lo.latent.delivery = 0.03;
    hi.latent.delivery = 0.97;
    TensorF flo = synth_features(spec, lo);
    TensorF fhi = synth_features(spec, hi);
    CHECK(flo.rows() > fhi.rows());
    double mean_lo = 0, mean_hi = 0;
    for (float v : flo.data) mean_lo += v;
    for (float v : fhi.data) mean_hi += v;
    CHECK(mean_lo / flo.numel() > mean_hi / fhi.numel() + 2.0);
}

TEST_CASE("token counts predict content but not delivery") {
    auto corpus = build_corpus(CorpusSpec::scaled(2000, 29));
    // chance for 8 balanced-ish levels is 0.125
    CHECK(token_probe_macro(corpus, 'D') <= 0.175);
    // held-out least squares: content is linearly recoverable from counts,
    // delivery correlation stays at sampling-noise scale
    CHECK(token_probe_pearson(corpus, 'C') >= 0.5);
    CHECK(std::fabs(token_probe_pearson(corpus, 'D')) <= 0.15);
}

TEST_CASE("corpus generation on disk: determinism, parallel equivalence, round trip") {
    TempDir dir_a("gen_a"), dir_b("gen_b"), dir_c("gen_c");
    auto spec = CorpusSpec::scaled(60, 19);
    std::string m1 = generate_corpus(spec, dir_a.path.string());
    std::string m2 = generate_corpus(spec, dir_b.path.string());
    auto spec_par = spec;
    spec_par.threads = 3;
    std::string m3 = generate_corpus(spec_par, dir_c.path.string());

    CHECK(slurp(m1) == slurp(m2));
    CHECK(slurp(m1) == slurp(m3));

    auto corpus = load_manifest(m1);
    CHECK(corpus.size() == 60);
    for (const auto& u : corpus) {
        CHECK_FALSE(u.features_path.empty());
        auto fa = slurp(dir_a.path / u.features_path);
        auto fc = slurp(dir_c.path / u.features_path);
        CHECK_FALSE(fa.empty());
        CHECK(fa == fc);
    }

    // manifest round trip: re-serialization reproduces the file line by line
    std::ifstream f(m1);
    std::string line;
    size_t i = 0;
    while (std::getline(f, line)) {
        REQUIRE(i < corpus.size());
        CHECK(utterance_to_json(corpus[i]) == line);
        ++i;
    }
    CHECK(i == corpus.size());
}

TEST_CASE("spec validation and scaling") {
    CorpusSpec zero;
    CHECK_THROWS_AS(build_corpus(zero), ConfigError);
    CorpusSpec bad = CorpusSpec::defaults();
    bad.target_wer = 0.9;
    CHECK_THROWS_AS(build_corpus(bad), ConfigError);

    auto s = CorpusSpec::scaled(2000, 1);
    CHECK(s.total() == 2000);
    auto d = CorpusSpec::defaults();
    for (int sp = 0; sp < kNumSplits; ++sp)
        for (int lv = 0; lv < 8; ++lv) {
            double share = static_cast<double>(d.counts[static_cast<size_t>(sp)][static_cast<size_t>(lv)]) * 2000 / 1359;
            int got = s.counts[static_cast<size_t>(sp)][static_cast<size_t>(lv)];
            CHECK(got >= static_cast<int>(share) - 1);
            CHECK(got <= static_cast<int>(share) + 1);
        }

    auto t = CorpusSpec::tiny(2);
    CHECK(t.split_total(0) == 16);
    CHECK(t.split_total(1) == 8);
    CHECK(t.split_total(2) == 0);
}

TEST_CASE("vocabulary layout and lookups") {
    auto v = Vocabulary::build(word_inventory().all_words());
    CHECK(v.id("<PAD>") == 0);
    CHECK(v.id("<BOS>") == 1);
    CHECK(v.id("<NULLTEXT>") == 2);
    CHECK(v.id("<ASSESS_D>") == 4);
    CHECK(v.id("<LV_0>") == 7);
    CHECK(v.id("<LV_7>") == 14);
    CHECK(Vocabulary::instruction_token('C') == 3);
    CHECK(Vocabulary::instruction_token('H') == 6);
    CHECK_THROWS_AS(Vocabulary::instruction_token('X'), ConfigError);
    CHECK(Vocabulary::is_label(7));
    CHECK(Vocabulary::is_label(14));
    CHECK_FALSE(Vocabulary::is_label(6));
    CHECK_FALSE(Vocabulary::is_label(15));
    CHECK(Vocabulary::label_to_level(9) == 2);
    CHECK(Vocabulary::level_to_label(5) == 12);
    CHECK_THROWS_AS(Vocabulary::label_to_level(2), IndexError);
    CHECK(v.size() == Vocabulary::NUM_SPECIALS + static_cast<int>(word_inventory().all_words().size()));
    // sorted word region: ids are stable regardless of insertion order
    CHECK(v.token(Vocabulary::NUM_SPECIALS) <= v.token(Vocabulary::NUM_SPECIALS + 1));
    CHECK(v.id(v.token(20)) == 20);
    CHECK_THROWS_AS(v.id("zzz_missing"), IndexError);
    CHECK_THROWS_AS(v.token(v.size()), IndexError);
}

TEST_CASE("transcripts stay inside their vocabularies and length bounds") {
    auto corpus = build_corpus(CorpusSpec::scaled(300, 23));
    auto vocab = Vocabulary::build(word_inventory().all_words());
    for (const auto& u : corpus) {
        CHECK(u.transcript_ref.size() % 3 == 0);
        CHECK(u.transcript_ref.size() >= 18);
        CHECK(u.transcript_ref.size() <= 33);
        CHECK(u.transcript_asr.size() <= 128);
        for (const auto& t : u.transcript_ref) CHECK(vocab.id(t) >= Vocabulary::NUM_SPECIALS);
        for (const auto& t : u.transcript_asr) CHECK(vocab.id(t) >= Vocabulary::NUM_SPECIALS);
    }
}
