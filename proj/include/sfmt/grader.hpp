#pragma once

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sfmt/error.hpp"
#include "sfmt/levels.hpp"
#include "sfmt/mel.hpp"
#include "sfmt/model_config.hpp"
#include "sfmt/param.hpp"
#include "sfmt/rng.hpp"
#include "sfmt/tape.hpp"
#include "sfmt/tensor.hpp"
#include "sfmt/vocab.hpp"

namespace sfmt {

// Which inputs occupy the sequence. audio_only replaces the transcript with
// the placeholder token; text_only drops the audio region entirely.
enum class Modality { audio_only, text_only, multimodal };

inline std::string modality_name(Modality m) {
    switch (m) {
        case Modality::audio_only: return "audio_only";
        case Modality::text_only: return "text_only";
        default: return "multimodal";
    }
}

inline Modality modality_from_name(const std::string& s) {
    if (s == "audio_only") return Modality::audio_only;
    if (s == "text_only") return Modality::text_only;
    if (s == "multimodal") return Modality::multimodal;
    throw ConfigError("unknown modality: " + s);
}

// One forward pass worth of tape handles. `leaves` pairs every parameter
// touched with its tape leaf so gradients can be routed back to the store.
struct GraderForward {
    Val logits = -1;        // 1 x vocab at the score slot
    Val label_logits = -1;  // 1 x 8 slice over the level tokens
    Val loss = -1;          // -1 when no target was given
    int seq_len = 0;
    int audio_rows = 0;
    std::vector<std::pair<std::string, Val>> leaves;
};

// Scoring model: conv-subsampled conformer encoder over log-mel features,
// affine projector into the decoder embedding space, causal transformer
// decoder that reads [BOS, instruction, audio..., text..., score] and emits
// a level distribution at the score slot. Low-rank adapters can be attached
// to the encoder attention/feed-forward weights and the projector.
template <typename Real>
class Grader {
public:
    static constexpr int kFfMult = 4;
    static constexpr int kDwKernel = 7;

    Grader(const ModelConfig& cfg, int vocab_size, uint64_t seed)
        : cfg_(cfg), vocab_size_(vocab_size), seed_(seed) {
        cfg_.validate();
        if (vocab_size_ <= Vocabulary::LABEL_BASE + kNumLevels)
            throw ConfigError("grader: vocabulary too small for the label region");
        build_params();
    }

    const ModelConfig& config() const { return cfg_; }
    int vocab_size() const { return vocab_size_; }
    uint64_t init_seed() const { return seed_; }
    // Restoring from a checkpoint replaces every value, so the model also
    // adopts the seed its values were originally drawn from.
    void set_init_seed(uint64_t seed) { seed_ = seed; }
    ParamStore<Real>& params() { return ps_; }
    const ParamStore<Real>& params() const { return ps_; }
    bool lora_attached() const { return lora_attached_; }
    bool lora_merged() const { return lora_merged_; }
    const std::vector<std::string>& lora_targets() const { return lora_targets_; }

    // Adds A/B factor pairs for every adapter target. B starts at zero so
    // the adapted model is exactly the base model until training moves it.
    void attach_lora(uint64_t seed) {
        if (lora_attached_) throw StateError("lora adapters already attached");
        int r = cfg_.lora_rank;
        for (const auto& t : lora_targets_) {
            const auto& w = ps_.get(t).value;
            int out = w.rows(), in = w.cols();
            Rng rng = Rng::keyed(seed, "lora/" + t);
            Tensor<Real> a = Tensor<Real>::zeros({r, in});
            Real bound = Real(1) / std::sqrt(Real(in));
            for (auto& v : a.data) v = static_cast<Real>(rng.uniform(-bound, bound));
            ps_.add(t + ".lora_A", "audio_lora", std::move(a));
            ps_.add(t + ".lora_B", "audio_lora", Tensor<Real>::zeros({out, r}));
        }
        lora_attached_ = true;
        lora_merged_ = false;
    }

    // Folds the adapters into the base weights; afterwards forward uses the
    // plain weights and the factors are inert.
    void merge_lora() {
        if (!lora_attached_) throw StateError("merge_lora: no adapters attached");
        if (lora_merged_) throw StateError("merge_lora: adapters already merged");
        double s = cfg_.lora_scale();
        for (const auto& t : lora_targets_) {
            auto& w = ps_.get(t).value;
            const auto& a = ps_.get(t + ".lora_A").value;
            const auto& b = ps_.get(t + ".lora_B").value;
            int out = w.rows(), in = w.cols(), r = cfg_.lora_rank;
            for (int i = 0; i < out; ++i)
                for (int j = 0; j < in; ++j) {
                    double acc = 0;
                    for (int k = 0; k < r; ++k)
                        acc += static_cast<double>(b.data[static_cast<size_t>(i) * r + k]) *
                               static_cast<double>(a.data[static_cast<size_t>(k) * in + j]);
                    w.data[static_cast<size_t>(i) * in + j] += static_cast<Real>(s * acc);
                }
        }
        lora_merged_ = true;
    }

    // Fixed affine rescale of log-mel values to an O(1) range. Absolute level
    // is a scoring cue (noise floor tracks delivery), so this must not depend
    // on per-utterance statistics; constant shift and scale keep every cue.
    static Tensor<Real> normalize_features(const Tensor<Real>& mel) {
        if (mel.ndim() != 2 || mel.rows() < 1) throw DimError("normalize_features: need [T x bands]");
        Tensor<Real> out = mel;
        for (auto& v : out.data)
            v = static_cast<Real>((static_cast<double>(v) - kLogFloor) * 0.1 - 1.0);
        return out;
    }

    // Runs the model on one utterance. `trainable_groups == nullptr` means
    // pure inference (no gradients recorded for any weight); otherwise the
    // listed groups get gradients. `target_level >= 0` adds the training
    // loss over the label-token logits.
    GraderForward forward(Tape<Real>& tape, const Tensor<Real>* mel, char aspect,
                          const std::vector<int>& text_ids, Modality modality, int target_level = -1,
                          const std::set<std::string>* trainable_groups = nullptr) const {
        int instr = Vocabulary::instruction_token(aspect);
        if (target_level >= 0) check_level(target_level);
        bool uses_audio = modality != Modality::text_only;
        if (uses_audio && mel == nullptr)
            throw ConfigError("forward: " + modality_name(modality) + " requires audio features");
        if (!uses_audio && mel != nullptr)
            throw ConfigError("forward: text_only must not receive audio features");
        if (modality == Modality::audio_only && !text_ids.empty())
            throw ConfigError("forward: audio_only must not receive transcript tokens");
        if (static_cast<int>(text_ids.size()) > cfg_.max_text_tokens)
            throw DimError("forward: transcript length " + std::to_string(text_ids.size()) +
                           " exceeds capacity " + std::to_string(cfg_.max_text_tokens));
        for (int id : text_ids)
            if (id < 0 || id >= vocab_size_)
                throw IndexError("forward: token id " + std::to_string(id) + " out of range");

        Ctx c{tape, this, trainable_groups, {}, {}};
        GraderForward out;

        Val audio = -1;
        if (uses_audio) {
            if (mel->ndim() != 2 || mel->cols() != 40)
                throw DimError("forward: audio features must be [T x 40]");
            if (mel->rows() < 1 || mel->rows() > cfg_.max_audio_frames)
                throw DimError("forward: audio length " + std::to_string(mel->rows()) +
                               " outside [1, " + std::to_string(cfg_.max_audio_frames) + "]");
            audio = stage("audio_encoder", [&] { return encode_audio(c, *mel); });
            audio = stage("audio_projector", [&] {
                return tape.linear(audio, c.weight("proj.w"), c.param("proj.b"));
            });
            out.audio_rows = tape.val(audio).rows();
        }

        Val seq = stage("sequence_assembly", [&] {
            return assemble(c, audio, instr, text_ids, out.seq_len);
        });
        Val hidden = stage("decoder", [&] { return decode(c, seq); });
        out.logits = stage("label_head", [&] {
            Val last = tape.take_row(hidden, out.seq_len - 1);
            return tape.linear(last, c.param("head.w"), c.param("head.b"));
        });
        out.label_logits = tape.slice_cols(out.logits, Vocabulary::LABEL_BASE, kNumLevels);
        if (!tape.val(out.label_logits).all_finite())
            throw NumericError("label_head: non-finite logits");
        if (target_level >= 0) out.loss = tape.cross_entropy(out.label_logits, {target_level});
        out.leaves.assign(c.leaves.begin(), c.leaves.end());
        return out;
    }

    // Routes tape gradients back into the store; call after backward().
    void accumulate_grads(const Tape<Real>& tape, const GraderForward& fwd) {
        for (const auto& [name, val] : fwd.leaves) {
            const Tensor<Real>* g = tape.grad_of(val);
            if (!g) continue;
            auto& p = ps_.get(name);
            for (size_t i = 0; i < p.grad.data.size(); ++i) p.grad.data[i] += g->data[i];
            p.grad_live = true;
        }
    }

    // Greedy pick over the 8 level logits; exact ties resolve to the lower
    // level so borderline cases never round a speaker upward.
    static int constrained_decode(const Tensor<Real>& label_logits) {
        if (label_logits.data.size() != static_cast<size_t>(kNumLevels))
            throw DimError("constrained_decode: expected 8 logits");
        int best = 0;
        for (int i = 1; i < kNumLevels; ++i)
            if (label_logits.data[static_cast<size_t>(i)] > label_logits.data[static_cast<size_t>(best)])
                best = i;
        return best;
    }

    // Same weights at a different precision; used to cross-check float
    // training against double evaluation.
    template <typename Other>
    Grader<Other> cast() const {
        Grader<Other> g(cfg_, vocab_size_, seed_);
        if (lora_attached_) g.attach_lora(seed_);
        auto cast_ps = ps_.template cast<Other>();
        g.params().load_values_from(cast_ps);
        if (lora_merged_) g.mark_merged();
        return g;
    }

    // Only meaningful when restoring state that was merged before saving.
    void mark_merged() {
        if (!lora_attached_) throw StateError("mark_merged: no adapters attached");
        lora_merged_ = true;
    }

private:
    template <typename>
    friend class Grader;

    ModelConfig cfg_;
    int vocab_size_;
    uint64_t seed_;
    ParamStore<Real> ps_;
    std::vector<std::string> lora_targets_;
    bool lora_attached_ = false;
    bool lora_merged_ = false;

    struct Ctx {
        Tape<Real>& tape;
        const Grader* g;
        const std::set<std::string>* trainable;
        std::map<std::string, Val> cache;
        std::vector<std::pair<std::string, Val>> leaves;

        Val param(const std::string& name) {
            auto it = cache.find(name);
            if (it != cache.end()) return it->second;
            const auto& p = g->ps_.get(name);
            bool ng = trainable && trainable->count(p.group) != 0;
            Val v = tape.leaf_ref(&p.value, ng);
            cache[name] = v;
            leaves.emplace_back(name, v);
            return v;
        }

        // Adapter targets get W + (alpha/r) * B * A materialized on the tape
        // while unmerged adapters are attached; everything else is the plain
        // weight.
        Val weight(const std::string& name) {
            Val w = param(name);
            if (!g->lora_attached_ || g->lora_merged_) return w;
            bool target = false;
            for (const auto& t : g->lora_targets_) target = target || t == name;
            if (!target) return w;
            Val ba = tape.matmul(param(name + ".lora_B"), param(name + ".lora_A"));
            return tape.add(w, tape.scale(ba, static_cast<Real>(g->cfg_.lora_scale())));
        }
    };

    template <typename F>
    static auto stage(const char* name, F&& f) {
        try {
            return f();
        } catch (const NumericError& e) {
            throw NumericError(std::string(name) + ": " + e.what());
        }
    }

    static Tensor<Real> init_normal(Rng& rng, std::vector<int> shape, double sd) {
        Tensor<Real> t = Tensor<Real>::zeros(shape);
        for (auto& v : t.data) v = static_cast<Real>(rng.normal(0.0, sd));
        return t;
    }

    void add_normal(const std::string& name, const std::string& group, std::vector<int> shape) {
        Rng rng = Rng::keyed(seed_, "init/" + name);
        ps_.add(name, group, init_normal(rng, std::move(shape), 0.02));
    }

    void add_zeros(const std::string& name, const std::string& group, std::vector<int> shape) {
        ps_.add(name, group, Tensor<Real>::zeros(std::move(shape)));
    }

    void add_ones(const std::string& name, const std::string& group, std::vector<int> shape) {
        Tensor<Real> t = Tensor<Real>::zeros(std::move(shape));
        std::fill(t.data.begin(), t.data.end(), Real(1));
        ps_.add(name, group, std::move(t));
    }

    void add_linear(const std::string& base, const std::string& group, int out, int in) {
        add_normal(base + ".w", group, {out, in});
        add_zeros(base + ".b", group, {1, out});
    }

    void add_ln(const std::string& base, const std::string& group, int d) {
        add_ones(base + ".g", group, {1, d});
        add_zeros(base + ".b", group, {1, d});
    }

    void build_params() {
        int d = cfg_.d_model;
        add_normal("enc.conv1.w", "audio_encoder", {d, 40, 3});
        add_zeros("enc.conv1.b", "audio_encoder", {1, d});
        add_normal("enc.conv2.w", "audio_encoder", {d, d, 3});
        add_zeros("enc.conv2.b", "audio_encoder", {1, d});
        for (int i = 0; i < cfg_.conformer_blocks; ++i) {
            std::string b = "enc.b" + std::to_string(i);
            add_ln(b + ".attn.ln", "audio_encoder", d);
            for (const char* h : {".attn.q", ".attn.k", ".attn.v", ".attn.o"}) {
                add_linear(b + h, "audio_encoder", d, d);
                lora_targets_.push_back(b + h + ".w");
            }
            add_ln(b + ".conv.ln", "audio_encoder", d);
            add_normal(b + ".conv.dw.w", "audio_encoder", {d, kDwKernel});
            add_zeros(b + ".conv.dw.b", "audio_encoder", {1, d});
            add_linear(b + ".conv.pw", "audio_encoder", d, d);
            add_ln(b + ".ff.ln", "audio_encoder", d);
            add_linear(b + ".ff.in", "audio_encoder", kFfMult * d, d);
            lora_targets_.push_back(b + ".ff.in.w");
            add_linear(b + ".ff.out", "audio_encoder", d, kFfMult * d);
            lora_targets_.push_back(b + ".ff.out.w");
        }
        add_ln("enc.ln", "audio_encoder", d);

        Tensor<Real> eye = Tensor<Real>::zeros({d, d});
        for (int i = 0; i < d; ++i) eye.data[static_cast<size_t>(i) * d + i] = Real(1);
        ps_.add("proj.w", "audio_projector", std::move(eye));
        add_zeros("proj.b", "audio_projector", {1, d});
        lora_targets_.push_back("proj.w");

        add_normal("embed.tok", "text_embed", {vocab_size_, d});
        add_normal("pos.table", "backbone", {cfg_.max_positions(), d});
        add_normal("seg.table", "backbone", {3, d});
        for (int l = 0; l < cfg_.num_layers; ++l) {
            std::string b = "dec.l" + std::to_string(l);
            add_ln(b + ".ln1", "backbone", d);
            for (const char* h : {".attn.q", ".attn.k", ".attn.v", ".attn.o"})
                add_linear(b + h, "backbone", d, d);
            add_ln(b + ".ln2", "backbone", d);
            add_linear(b + ".ff.in", "backbone", kFfMult * d, d);
            add_linear(b + ".ff.out", "backbone", d, kFfMult * d);
        }
        add_ln("dec.ln", "backbone", d);
        add_linear("head", "label_head", vocab_size_, d);
    }

    Val mhsa(Ctx& c, Val x, const std::string& base, bool causal) const {
        auto& tape = c.tape;
        int d = cfg_.d_model, nh = cfg_.num_heads, dh = d / nh;
        Val q = tape.linear(x, c.weight(base + ".q.w"), c.param(base + ".q.b"));
        Val k = tape.linear(x, c.weight(base + ".k.w"), c.param(base + ".k.b"));
        Val v = tape.linear(x, c.weight(base + ".v.w"), c.param(base + ".v.b"));
        std::vector<Val> heads;
        Real inv = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(dh)));
        for (int h = 0; h < nh; ++h) {
            Val qh = tape.slice_cols(q, h * dh, dh);
            Val kh = tape.slice_cols(k, h * dh, dh);
            Val vh = tape.slice_cols(v, h * dh, dh);
            Val at = tape.softmax_rows(tape.scale(tape.matmul_nt(qh, kh), inv), causal);
            heads.push_back(tape.matmul(at, vh));
        }
        Val cat = tape.concat_cols(heads);
        return tape.linear(cat, c.weight(base + ".o.w"), c.param(base + ".o.b"));
    }

    Val ff(Ctx& c, Val x, const std::string& base) const {
        auto& tape = c.tape;
        Val h = tape.gelu(tape.linear(x, c.weight(base + ".in.w"), c.param(base + ".in.b")));
        return tape.linear(h, c.weight(base + ".out.w"), c.param(base + ".out.b"));
    }

    Val encode_audio(Ctx& c, const Tensor<Real>& mel) const {
        auto& tape = c.tape;
        Val x = tape.leaf(normalize_features(mel), false);
        x = tape.gelu(tape.conv1d(x, c.param("enc.conv1.w"), c.param("enc.conv1.b"), 2, 1));
        x = tape.gelu(tape.conv1d(x, c.param("enc.conv2.w"), c.param("enc.conv2.b"), 2, 1));
        Real eps = static_cast<Real>(1e-5);
        for (int i = 0; i < cfg_.conformer_blocks; ++i) {
            std::string b = "enc.b" + std::to_string(i);
            Val n1 = tape.layer_norm(x, c.param(b + ".attn.ln.g"), c.param(b + ".attn.ln.b"), eps);
            x = tape.add(x, mhsa(c, n1, b + ".attn", false));
            Val n2 = tape.layer_norm(x, c.param(b + ".conv.ln.g"), c.param(b + ".conv.ln.b"), eps);
            Val dw = tape.gelu(tape.dwconv1d(n2, c.param(b + ".conv.dw.w"), c.param(b + ".conv.dw.b")));
            x = tape.add(x, tape.linear(dw, c.weight(b + ".conv.pw.w"), c.param(b + ".conv.pw.b")));
            Val n3 = tape.layer_norm(x, c.param(b + ".ff.ln.g"), c.param(b + ".ff.ln.b"), eps);
            x = tape.add(x, ff(c, n3, b + ".ff"));
        }
        return tape.layer_norm(x, c.param("enc.ln.g"), c.param("enc.ln.b"), eps);
    }

    // [BOS, instruction, audio rows, text-or-placeholder, score slot] plus
    // learned absolute positions and a control/audio/text segment tag per
    // row. The score slot carries the padding embedding so the answer is
    // read purely from attention context.
    Val assemble(Ctx& c, Val audio, int instr, const std::vector<int>& text_ids, int& seq_len) const {
        auto& tape = c.tape;
        bool uses_audio = audio >= 0;
        std::vector<int> tail = text_ids;
        if (tail.empty()) tail.push_back(Vocabulary::NULLTEXT);
        tail.push_back(Vocabulary::PAD);  // score slot input

        int a_rows = uses_audio ? tape.val(audio).rows() : 0;
        seq_len = 2 + a_rows + static_cast<int>(tail.size());

        Val pre = tape.embedding(c.param("embed.tok"), {Vocabulary::BOS, instr});
        Val post = tape.embedding(c.param("embed.tok"), tail);
        Val seq = uses_audio ? tape.concat_rows({pre, audio, post}) : tape.concat_rows({pre, post});

        std::vector<int> pos_ids(static_cast<size_t>(seq_len));
        for (int i = 0; i < seq_len; ++i) pos_ids[static_cast<size_t>(i)] = i;
        std::vector<int> seg_ids(static_cast<size_t>(seq_len), 0);
        for (int i = 0; i < a_rows; ++i) seg_ids[static_cast<size_t>(2 + i)] = 1;
        for (int i = 2 + a_rows; i < seq_len - 1; ++i) seg_ids[static_cast<size_t>(i)] = 2;
        Val pos = tape.embedding(c.param("pos.table"), pos_ids);
        Val seg = tape.embedding(c.param("seg.table"), seg_ids);
        return tape.add(tape.add(seq, pos), seg);
    }

    Val decode(Ctx& c, Val x) const {
        auto& tape = c.tape;
        Real eps = static_cast<Real>(1e-5);
        for (int l = 0; l < cfg_.num_layers; ++l) {
            std::string b = "dec.l" + std::to_string(l);
            Val n1 = tape.layer_norm(x, c.param(b + ".ln1.g"), c.param(b + ".ln1.b"), eps);
            x = tape.add(x, mhsa(c, n1, b + ".attn", true));
            Val n2 = tape.layer_norm(x, c.param(b + ".ln2.g"), c.param(b + ".ln2.b"), eps);
            x = tape.add(x, ff(c, n2, b + ".ff"));
        }
        return tape.layer_norm(x, c.param("dec.ln.g"), c.param("dec.ln.b"), eps);
    }
};

}  // namespace sfmt
