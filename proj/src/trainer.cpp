#include "sfmt/trainer.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "sfmt/mel.hpp"

namespace sfmt {

namespace {

constexpr std::array<Modality, 3> kModalityCycle = {Modality::multimodal, Modality::audio_only,
                                                    Modality::text_only};

std::string num_or_null(double v) {
    if (!std::isfinite(v)) return "null";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

FeatureSource FeatureSource::from_dir(const std::string& manifest_dir) {
    FeatureSource fs;
    fs.synth_ = false;
    fs.root_ = manifest_dir;
    return fs;
}

FeatureSource FeatureSource::synth(const CorpusSpec& spec) {
    FeatureSource fs;
    fs.synth_ = true;
    fs.spec_ = spec;
    return fs;
}

const TensorF& FeatureSource::features(const Utterance& u) {
    auto it = cache_.find(u.id);
    if (it != cache_.end()) return it->second;
    TensorF f;
    if (synth_) {
        f = synth_features(spec_, u);
    } else {
        if (u.features_path.empty())
            throw ConfigError("feature source: utterance " + u.id + " has no features file");
        f = load_features((std::filesystem::path(root_) / u.features_path).string());
    }
    return cache_.emplace(u.id, std::move(f)).first->second;
}

std::string log_row_json(const TrainLogRow& row) {
    std::string out = "{\"stage\": \"" + row.stage + "\", \"epoch\": " + std::to_string(row.epoch) +
                      ", \"step\": " + std::to_string(row.step) +
                      ", \"train_loss\": " + num_or_null(row.train_loss) +
                      ", \"valid_loss\": " + num_or_null(row.valid_loss) +
                      ", \"valid_macro_acc\": " + num_or_null(row.valid_macro_acc) + "}";
    return out;
}

GraderForward Trainer::run_forward(Tape<float>& tape, const Sequence& s, FeatureSource& feats,
                                   int target, const std::set<std::string>* trainable) const {
    const TensorF* mel = nullptr;
    if (s.modality != Modality::text_only) mel = &feats.features(*s.utt);
    std::vector<int> ids;
    if (s.modality != Modality::audio_only) {
        ids.reserve(s.utt->transcript_asr.size());
        for (const auto& tok : s.utt->transcript_asr) ids.push_back(vocab_.id(tok));
    }
    return g_.forward(tape, mel, s.aspect, ids, s.modality, target, trainable);
}

StageResult Trainer::train_stage(const StagePlan& plan, char aspect,
                                 const std::vector<const Utterance*>& train,
                                 const std::vector<const Utterance*>& valid, FeatureSource& feats,
                                 int max_steps) {
    plan.validate();
    aspect_label(Utterance{}, aspect);  // validates the letter
    if (train.empty()) throw ConfigError("train_stage " + plan.name + ": empty training split");
    for (const auto& group : plan.trainable) {
        auto names = g_.params().names_in_group(group);
        if (names.empty())
            throw ConfigError("train_stage " + plan.name + ": no parameters in group " + group);
    }
    std::vector<std::string> trainable_names;
    for (const auto& group : plan.trainable)
        for (const auto& n : g_.params().names_in_group(group)) trainable_names.push_back(n);

    AdamWConfig ocfg;
    ocfg.lr = static_cast<float>(plan.lr);
    AdamW opt(ocfg);

    StageResult result;
    result.stage = plan.name;
    result.start_hash = g_.params().value_hash();

    // last-good state for divergence recovery: stage entry, then each epoch end
    std::vector<TensorF> snapshot;
    auto take_snapshot = [&] {
        snapshot.clear();
        for (size_t i = 0; i < g_.params().size(); ++i) snapshot.push_back(g_.params().at(i).value);
    };
    auto restore_snapshot = [&] {
        for (size_t i = 0; i < g_.params().size(); ++i) g_.params().at(i).value = snapshot[i];
    };
    take_snapshot();

    size_t n = train.size();
    int eff = plan.effective_batch();
    bool capped = false;
    size_t global_index = 0;

    for (int epoch = 0; epoch < plan.epochs && !capped; ++epoch) {
        Rng order_rng = Rng::keyed(plan.seed, "order/" + plan.name + "/" + std::to_string(epoch));
        auto order = order_rng.permutation(n);

        double loss_sum = 0;
        size_t seen = 0;
        g_.params().zero_grads();

        size_t window_start = 0;
        while (window_start < n) {
            size_t window = std::min<size_t>(static_cast<size_t>(eff), n - window_start);
            for (size_t k = 0; k < window; ++k, ++global_index) {
                const Utterance* u = train[order[window_start + k]];
                Sequence s{u, aspect,
                           plan.cycle_modalities ? kModalityCycle[global_index % 3] : plan.modality};
                int target = aspect_label(*u, s.aspect);
                Tape<float> tape;
                GraderForward fwd;
                try {
                    fwd = run_forward(tape, s, feats, target, &plan.trainable);
                } catch (const NumericError& e) {
                    restore_snapshot();
                    throw TrainError("divergence in stage " + plan.name + " epoch " +
                                     std::to_string(epoch) + " step " + std::to_string(result.steps) +
                                     " (restored last good parameters): " + e.what());
                }
                double loss = tape.val(fwd.loss).data[0];
                if (!std::isfinite(loss)) {
                    restore_snapshot();
                    throw TrainError("divergence in stage " + plan.name + " epoch " +
                                     std::to_string(epoch) + " step " + std::to_string(result.steps) +
                                     ": loss is not finite (restored last good parameters)");
                }
                loss_sum += loss;
                ++seen;
                tape.backward(fwd.loss, 1.0f / static_cast<float>(window));
                g_.accumulate_grads(tape, fwd);
            }
            opt.step(g_.params(), trainable_names);
            g_.params().zero_grads();
            ++result.steps;
            window_start += window;
            if (max_steps > 0 && result.steps >= max_steps) {
                capped = true;
                break;
            }
        }

        TrainLogRow row;
        row.stage = plan.name;
        row.epoch = epoch;
        row.step = result.steps;
        row.train_loss = loss_sum / static_cast<double>(seen);
        if (!valid.empty()) {
            char va = aspect;
            Modality vm = plan.cycle_modalities ? Modality::multimodal : plan.modality;
            row.valid_loss = mean_loss(va, vm, valid, feats);
            auto ps = predict(va, vm, valid, feats);
            row.valid_macro_acc = macro_accuracy(ps);
        } else {
            row.valid_loss = std::nan("");
            row.valid_macro_acc = std::nan("");
        }
        result.rows.push_back(std::move(row));
        take_snapshot();
    }

    result.final_hash = g_.params().value_hash();
    return result;
}

RegimeResult Trainer::run_regime(const Regime& regime, const std::vector<const Utterance*>& train,
                                 const std::vector<const Utterance*>& valid, FeatureSource& feats) {
    regime.validate();
    RegimeResult rr;
    rr.regime = regime.name;
    rr.aspect = regime.aspect;
    for (const auto& stage : regime.stages) {
        rr.stage_entry_hashes.push_back(g_.params().value_hash());
        rr.stages.push_back(train_stage(stage, regime.aspect, train, valid, feats));
    }
    rr.final_hash = g_.params().value_hash();
    return rr;
}

double Trainer::mean_loss(char aspect, Modality modality, const std::vector<const Utterance*>& view,
                          FeatureSource& feats) {
    if (view.empty()) throw ConfigError("mean_loss: empty split");
    double sum = 0;
    for (const Utterance* u : view) {
        Tape<float> tape;
        auto fwd = run_forward(tape, {u, aspect, modality}, feats, aspect_label(*u, aspect), nullptr);
        sum += tape.val(fwd.loss).data[0];
    }
    return sum / static_cast<double>(view.size());
}

PredictionSet Trainer::predict(char aspect, Modality modality,
                               const std::vector<const Utterance*>& view, FeatureSource& feats) {
    if (view.empty()) throw ConfigError("predict: empty split");
    PredictionSet ps(aspect);
    for (const Utterance* u : view) {
        Tape<float> tape;
        auto fwd = run_forward(tape, {u, aspect, modality}, feats, -1, nullptr);
        int pred = Grader<float>::constrained_decode(tape.val(fwd.label_logits));
        ps.add(u->id, pred, aspect_label(*u, aspect));
    }
    return ps;
}

}  // namespace sfmt
