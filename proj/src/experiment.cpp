#include "sfmt/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "sfmt/checkpoint.hpp"
#include "sfmt/rng.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace sfmt {

Modality regime_eval_modality(const std::string& regime) {
    if (regime == "joint" || regime == "sfmt") return Modality::multimodal;
    if (regime == "audio_only") return Modality::audio_only;
    if (regime == "text_only") return Modality::text_only;
    throw ConfigError("unknown regime: " + regime);
}

std::vector<LabeledReport> evaluate_models(const std::map<char, Grader<float>*>& models,
                                           const Vocabulary& vocab,
                                           const std::vector<const Utterance*>& view,
                                           Modality modality, FeatureSource& feats) {
    if (models.empty()) throw ConfigError("evaluate_models: no models supplied");
    if (view.empty()) throw ConfigError("evaluate_models: empty split");

    std::map<char, PredictionSet> sets;
    std::vector<LabeledReport> out;
    for (char aspect : std::string("CDLH")) {
        auto it = models.find(aspect);
        if (it == models.end()) continue;
        Trainer tr(*it->second, vocab);
        sets.emplace(aspect, tr.predict(aspect, modality, view, feats));
        out.push_back({std::string(1, aspect), compute_report(sets.at(aspect))});
    }

    if (sets.count('C') && sets.count('D') && sets.count('L')) {
        PredictionSet agg('H');
        const auto& c = sets.at('C');
        const auto& d = sets.at('D');
        const auto& l = sets.at('L');
        for (size_t i = 0; i < view.size(); ++i) {
            int pred = holistic_aggregate(c.preds()[i], d.preds()[i], l.preds()[i]);
            agg.add(view[i]->id, pred, aspect_label(*view[i], 'H'));
        }
        out.push_back({"H_agg", compute_report(agg)});
    }
    return out;
}

Laboratory::Laboratory(CorpusSpec spec, ExperimentOptions opt)
    : spec_(std::move(spec)),
      opt_(std::move(opt)),
      corpus_(build_corpus(spec_)),
      vocab_(Vocabulary::build(word_inventory().all_words())),
      feats_(FeatureSource::synth(spec_)),
      train_(split_view(corpus_, "train")),
      valid_(split_view(corpus_, "valid")),
      test_(split_view(corpus_, "test")),
      unseen_(split_view(corpus_, "unseen")) {
    opt_.model.validate();
}

const std::vector<const Utterance*>& Laboratory::view(const std::string& split) const {
    switch (split_index(split)) {
        case 0: return train_;
        case 1: return valid_;
        case 2: return test_;
        default: return unseen_;
    }
}

const Grader<float>& Laboratory::bootstrap(char aspect, uint64_t seed) {
    auto key = std::make_pair(aspect, seed);
    auto it = boots_.find(key);
    if (it != boots_.end()) return it->second;

    uint64_t init = fnv1a64("bootstrap/" + std::string(1, aspect)) ^ seed ^ opt_.model_seed;
    Grader<float> g(opt_.model, vocab_.size(), init);
    Trainer tr(g, vocab_);
    StagePlan plan = bootstrap_plan(seed, opt_.bootstrap_epochs, opt_.bootstrap_lr);
    tr.train_stage(plan, aspect, train_, valid_, feats_);
    return boots_.emplace(key, std::move(g)).first->second;
}

CellOutcome Laboratory::run_cell(const std::string& regime_name, char aspect, uint64_t seed,
                                 const std::string* artifacts_dir) {
    CellOutcome outcome;
    outcome.regime = regime_name;
    outcome.aspect = aspect;
    outcome.seed = seed;
    try {
        Regime regime;
        bool found = false;
        for (auto& r : default_plans(aspect, seed, opt_.strict_adapters))
            if (r.name == regime_name) {
                regime = std::move(r);
                found = true;
            }
        if (!found)
            throw ConfigError("unknown regime: " + regime_name +
                              " (expected joint, text_only, audio_only or sfmt)");

        Grader<float> model = bootstrap(aspect, seed);  // copy of the shared warm start
        bool needs_adapters = false;
        for (const auto& s : regime.stages) needs_adapters |= s.trainable.count("audio_lora") > 0;
        if (needs_adapters) model.attach_lora(fnv1a64("adapters/" + regime_name) ^ seed);

        Trainer tr(model, vocab_);
        std::vector<TrainLogRow> rows;
        for (const auto& stage : regime.stages) {
            StageResult res = tr.train_stage(stage, aspect, train_, valid_, feats_);
            rows.insert(rows.end(), res.rows.begin(), res.rows.end());
            if (artifacts_dir) {
                CheckpointMeta meta;
                meta.regime = regime_name;
                meta.stage = stage.name;
                meta.epoch = stage.epochs - 1;
                meta.rng_state = stage.seed;
                save_checkpoint((fs::path(*artifacts_dir) / ("stage_" + stage.name)).string(),
                                model, meta, nullptr, &vocab_);
            }
        }

        auto reports = evaluate_models({{aspect, &model}}, vocab_, test_,
                                       regime_eval_modality(regime_name), feats_);
        outcome.report = reports.front().report;
        outcome.ok = true;

        if (artifacts_dir) {
            fs::create_directories(*artifacts_dir);
            CheckpointMeta meta;
            meta.regime = regime_name;
            meta.stage = "final";
            meta.epoch = rows.empty() ? 0 : rows.back().epoch;
            meta.rng_state = seed;
            save_checkpoint((fs::path(*artifacts_dir) / "final").string(), model, meta, nullptr,
                            &vocab_);
            std::ofstream log(fs::path(*artifacts_dir) / "train_log.jsonl", std::ios::binary);
            for (const auto& row : rows) log << log_row_json(row) << "\n";
            std::vector<LabeledReport> lr = {{std::string(1, aspect), outcome.report}};
            std::ofstream(fs::path(*artifacts_dir) / "report.json", std::ios::binary)
                << reports_json(lr);
            std::ofstream(fs::path(*artifacts_dir) / "report.csv", std::ios::binary)
                << reports_csv(lr);
            std::ofstream(fs::path(*artifacts_dir) / "report.txt", std::ios::binary)
                << reports_text(lr);
            std::ofstream(fs::path(*artifacts_dir) / "confusion.csv", std::ios::binary)
                << confusion_csv(outcome.report);
        }
    } catch (const std::exception& e) {
        outcome.ok = false;
        outcome.error = e.what();
    }
    return outcome;
}

namespace {

struct Accum {
    std::vector<double> pcc, macro;
    bool pcc_defined = true;
};

AblationCell summarize(const Accum& a) {
    AblationCell cell;
    cell.n = static_cast<int>(a.macro.size());
    cell.pcc_defined = a.pcc_defined;
    auto mean_spread = [](const std::vector<double>& xs, double& mean, double& spread) {
        if (xs.empty()) return;
        mean = 0;
        for (double x : xs) mean += x;
        mean /= static_cast<double>(xs.size());
        spread = 0;
        if (xs.size() > 1) {
            double ss = 0;
            for (double x : xs) ss += (x - mean) * (x - mean);
            spread = std::sqrt(ss / static_cast<double>(xs.size() - 1));
        }
    };
    mean_spread(a.macro, cell.macro_mean, cell.macro_spread);
    if (a.pcc_defined) mean_spread(a.pcc, cell.pcc_mean, cell.pcc_spread);
    return cell;
}

}  // namespace

AblationReport Laboratory::run_grid(const std::vector<std::string>& regimes,
                                    const std::string& aspects,
                                    const std::vector<uint64_t>& seeds) {
    if (regimes.empty() || aspects.empty() || seeds.empty())
        throw ConfigError("ablation grid needs at least one regime, aspect and seed");
    AblationReport rep;
    rep.regimes = regimes;
    rep.aspects = aspects;
    rep.seeds = seeds;

    std::map<std::string, std::map<char, Accum>> acc;
    for (const auto& regime : regimes)
        for (char aspect : aspects)
            for (uint64_t seed : seeds) {
                CellOutcome cell = run_cell(regime, aspect, seed);
                if (cell.ok) {
                    Accum& a = acc[regime][aspect];
                    a.macro.push_back(cell.report.macro_acc);
                    if (cell.report.pcc_defined)
                        a.pcc.push_back(cell.report.pcc);
                    else
                        a.pcc_defined = false;
                }
                rep.cells.push_back(std::move(cell));
            }
    for (const auto& [regime, by_aspect] : acc)
        for (const auto& [aspect, a] : by_aspect) rep.grid[regime][aspect] = summarize(a);

    char buf[160];
    std::string verdict;
    auto cell_of = [&](const std::string& regime) -> const AblationCell* {
        auto rit = rep.grid.find(regime);
        if (rit == rep.grid.end()) return nullptr;
        auto ait = rit->second.find('D');
        return ait == rit->second.end() ? nullptr : &ait->second;
    };
    rep.has_delivery = aspects.find('D') != std::string::npos;
    if (const AblationCell* c = cell_of("text_only"); c && c->n > 0) {
        rep.text_only_delivery_macro = c->macro_mean;
        rep.text_only_delivery_at_chance = c->macro_mean <= 0.25;
        std::snprintf(buf, sizeof buf,
                      "text-only delivery macro %.3f (chance 0.125): %s\n", c->macro_mean,
                      rep.text_only_delivery_at_chance ? "no usable delivery signal in text"
                                                       : "UNEXPECTED delivery signal in text");
        verdict += buf;
    }
    if (const AblationCell* c = cell_of("audio_only"); c && c->n > 0) {
        rep.audio_only_delivery_macro = c->macro_mean;
        std::snprintf(buf, sizeof buf, "audio-only delivery macro %.3f: %s\n", c->macro_mean,
                      c->macro_mean >= 0.60 ? "delivery reads from the acoustic channel"
                                            : "weak acoustic delivery signal");
        verdict += buf;
    }
    const AblationCell* sf = cell_of("sfmt");
    const AblationCell* jo = cell_of("joint");
    if (sf && jo && sf->n > 0 && jo->n > 0 && sf->pcc_defined && jo->pcc_defined) {
        rep.sfmt_delivery_pcc = sf->pcc_mean;
        rep.joint_delivery_pcc = jo->pcc_mean;
        rep.sfmt_beats_joint = sf->pcc_mean > jo->pcc_mean;
        rep.sfmt_within_slack = sf->pcc_mean >= jo->pcc_mean - 0.02;
        std::snprintf(buf, sizeof buf, "delivery PCC: sfmt %.4f vs joint %.4f (diff %+.4f): %s\n",
                      sf->pcc_mean, jo->pcc_mean, sf->pcc_mean - jo->pcc_mean,
                      rep.sfmt_beats_joint      ? "curriculum strictly ahead"
                      : rep.sfmt_within_slack   ? "curriculum within 0.02 of joint"
                                                : "curriculum behind by more than 0.02");
        verdict += buf;
    }
    rep.verdict = std::move(verdict);
    return rep;
}

std::string ablation_text(const AblationReport& rep) {
    std::string out = "regime x aspect grid (PCC / macro accuracy, mean over seeds";
    out += rep.seeds.size() > 1 ? ", +-stddev)\n" : ")\n";
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-12s", "regime");
    out += buf;
    for (char a : rep.aspects) {
        std::snprintf(buf, sizeof buf, "  %-20c", a);
        out += buf;
    }
    out += "\n";
    for (const auto& regime : rep.regimes) {
        std::snprintf(buf, sizeof buf, "%-12s", regime.c_str());
        out += buf;
        for (char a : rep.aspects) {
            std::string cell_text = "failed";
            auto rit = rep.grid.find(regime);
            if (rit != rep.grid.end()) {
                auto ait = rit->second.find(a);
                if (ait != rit->second.end() && ait->second.n > 0) {
                    const AblationCell& c = ait->second;
                    char pcc_part[48];
                    if (!c.pcc_defined)
                        std::snprintf(pcc_part, sizeof pcc_part, "undef");
                    else if (c.n > 1)
                        std::snprintf(pcc_part, sizeof pcc_part, "%.3f+-%.3f", c.pcc_mean,
                                      c.pcc_spread);
                    else
                        std::snprintf(pcc_part, sizeof pcc_part, "%.3f", c.pcc_mean);
                    char macro_part[48];
                    if (c.n > 1)
                        std::snprintf(macro_part, sizeof macro_part, "%.3f+-%.3f", c.macro_mean,
                                      c.macro_spread);
                    else
                        std::snprintf(macro_part, sizeof macro_part, "%.3f", c.macro_mean);
                    cell_text = std::string(pcc_part) + " / " + macro_part;
                }
            }
            std::snprintf(buf, sizeof buf, "  %-20s", cell_text.c_str());
            out += buf;
        }
        out += "\n";
    }
    bool any_failed = false;
    for (const auto& c : rep.cells) any_failed |= !c.ok;
    if (any_failed) {
        out += "failed cells:\n";
        for (const auto& c : rep.cells)
            if (!c.ok)
                out += "  " + c.regime + "/" + std::string(1, c.aspect) + "/seed " +
                       std::to_string(c.seed) + ": " + c.error + "\n";
    }
    if (!rep.verdict.empty()) out += rep.verdict;
    return out;
}

std::string ablation_json(const AblationReport& rep) {
    ordered_json j;
    j["regimes"] = rep.regimes;
    j["aspects"] = rep.aspects;
    j["seeds"] = rep.seeds;
    ordered_json cells = ordered_json::array();
    for (const auto& c : rep.cells) {
        ordered_json jc;
        jc["regime"] = c.regime;
        jc["aspect"] = std::string(1, c.aspect);
        jc["seed"] = c.seed;
        jc["ok"] = c.ok;
        if (!c.ok) {
            jc["error"] = c.error;
        } else {
            jc["pcc"] = c.report.pcc_defined ? ordered_json(c.report.pcc) : ordered_json(nullptr);
            jc["rmse"] = c.report.rmse;
            jc["abs"] = c.report.abs_acc;
            jc["adj"] = c.report.adj_acc;
            jc["macro"] = c.report.macro_acc;
        }
        cells.push_back(std::move(jc));
    }
    j["cells"] = std::move(cells);
    ordered_json grid;
    for (const auto& regime : rep.regimes) {
        auto rit = rep.grid.find(regime);
        if (rit == rep.grid.end()) continue;
        ordered_json row;
        for (char a : rep.aspects) {
            auto ait = rit->second.find(a);
            if (ait == rit->second.end()) continue;
            const AblationCell& c = ait->second;
            ordered_json jc;
            jc["n"] = c.n;
            jc["pcc_mean"] = c.pcc_defined ? ordered_json(c.pcc_mean) : ordered_json(nullptr);
            jc["pcc_spread"] = c.pcc_defined ? ordered_json(c.pcc_spread) : ordered_json(nullptr);
            jc["macro_mean"] = c.macro_mean;
            jc["macro_spread"] = c.macro_spread;
            row[std::string(1, a)] = std::move(jc);
        }
        grid[regime] = std::move(row);
    }
    j["grid"] = std::move(grid);
    ordered_json v;
    if (rep.has_delivery) {
        v["text_only_delivery_macro"] = rep.text_only_delivery_macro;
        v["text_only_delivery_at_chance"] = rep.text_only_delivery_at_chance;
        v["audio_only_delivery_macro"] = rep.audio_only_delivery_macro;
        v["sfmt_delivery_pcc"] = rep.sfmt_delivery_pcc;
        v["joint_delivery_pcc"] = rep.joint_delivery_pcc;
        v["sfmt_beats_joint"] = rep.sfmt_beats_joint;
        v["sfmt_within_slack"] = rep.sfmt_within_slack;
    }
    v["text"] = rep.verdict;
    j["verdict"] = std::move(v);
    return j.dump(2) + "\n";
}

std::string ablation_csv(const AblationReport& rep) {
    std::string out = "regime,aspect,n,pcc_mean,pcc_spread,macro_mean,macro_spread\n";
    char buf[240];
    for (const auto& regime : rep.regimes) {
        auto rit = rep.grid.find(regime);
        if (rit == rep.grid.end()) continue;
        for (char a : rep.aspects) {
            auto ait = rit->second.find(a);
            if (ait == rit->second.end()) continue;
            const AblationCell& c = ait->second;
            if (c.pcc_defined)
                std::snprintf(buf, sizeof buf, "%s,%c,%d,%.17g,%.17g,%.17g,%.17g\n",
                              regime.c_str(), a, c.n, c.pcc_mean, c.pcc_spread, c.macro_mean,
                              c.macro_spread);
            else
                std::snprintf(buf, sizeof buf, "%s,%c,%d,,,%.17g,%.17g\n", regime.c_str(), a, c.n,
                              c.macro_mean, c.macro_spread);
            out += buf;
        }
    }
    return out;
}

}  // namespace sfmt
