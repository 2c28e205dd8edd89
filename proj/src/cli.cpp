#include "sfmt/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sfmt/checkpoint.hpp"
#include "sfmt/mel.hpp"
#include "sfmt/rng.hpp"
#include "sfmt/wav.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace sfmt {

namespace {

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

std::string slurp_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot read " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

CliConfig load_cli_config(const std::string& path) {
    CliConfig cfg;
    if (path.empty()) return cfg;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(slurp_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
    if (j.contains("corpus")) {
        const auto& c = j.at("corpus");
        read_field(c, "total", cfg.corpus_total);
        read_field(c, "seed", cfg.corpus_seed);
        read_field(c, "target_wer", cfg.target_wer);
        read_field(c, "rater_noise", cfg.rater_noise);
        read_field(c, "threads", cfg.threads);
    }
    if (j.contains("model")) {
        const auto& m = j.at("model");
        read_field(m, "d_model", cfg.model.d_model);
        read_field(m, "num_layers", cfg.model.num_layers);
        read_field(m, "num_heads", cfg.model.num_heads);
        read_field(m, "conformer_blocks", cfg.model.conformer_blocks);
        read_field(m, "lora_rank", cfg.model.lora_rank);
        read_field(m, "lora_alpha", cfg.model.lora_alpha);
        read_field(m, "max_audio_frames", cfg.model.max_audio_frames);
        read_field(m, "max_text_tokens", cfg.model.max_text_tokens);
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        read_field(t, "bootstrap_epochs", cfg.bootstrap_epochs);
        read_field(t, "bootstrap_lr", cfg.bootstrap_lr);
        read_field(t, "strict_adapters", cfg.strict_adapters);
        read_field(t, "model_seed", cfg.model_seed);
    }
    read_field(j, "regimes", cfg.regimes);
    read_field(j, "aspects", cfg.aspects);
    read_field(j, "seeds", cfg.seeds);
    read_field(j, "split", cfg.split);
    read_field(j, "out_dir", cfg.out_dir);
    return cfg;
}

std::string cli_config_json(const CliConfig& cfg) {
    ordered_json j;
    j["corpus"] = {{"total", cfg.corpus_total},
                   {"seed", cfg.corpus_seed},
                   {"target_wer", cfg.target_wer},
                   {"rater_noise", cfg.rater_noise},
                   {"threads", cfg.threads}};
    j["model"] = {{"d_model", cfg.model.d_model},
                  {"num_layers", cfg.model.num_layers},
                  {"num_heads", cfg.model.num_heads},
                  {"conformer_blocks", cfg.model.conformer_blocks},
                  {"lora_rank", cfg.model.lora_rank},
                  {"lora_alpha", cfg.model.lora_alpha},
                  {"max_audio_frames", cfg.model.max_audio_frames},
                  {"max_text_tokens", cfg.model.max_text_tokens}};
    j["train"] = {{"bootstrap_epochs", cfg.bootstrap_epochs},
                  {"bootstrap_lr", cfg.bootstrap_lr},
                  {"strict_adapters", cfg.strict_adapters},
                  {"model_seed", cfg.model_seed}};
    j["regimes"] = cfg.regimes;
    j["aspects"] = cfg.aspects;
    j["seeds"] = cfg.seeds;
    j["split"] = cfg.split;
    j["out_dir"] = cfg.out_dir;
    return j.dump(2) + "\n";
}

CorpusSpec corpus_spec_from(const CliConfig& cfg) {
    CorpusSpec spec = cfg.corpus_total > 0 ? CorpusSpec::scaled(cfg.corpus_total, cfg.corpus_seed)
                                           : CorpusSpec::defaults(cfg.corpus_seed);
    spec.target_wer = cfg.target_wer;
    spec.rater_noise = cfg.rater_noise;
    spec.threads = cfg.threads;
    return spec;
}

ExperimentOptions experiment_options_from(const CliConfig& cfg) {
    ExperimentOptions opt;
    opt.bootstrap_epochs = cfg.bootstrap_epochs;
    opt.bootstrap_lr = cfg.bootstrap_lr;
    opt.strict_adapters = cfg.strict_adapters;
    opt.model = cfg.model;
    opt.model_seed = cfg.model_seed;
    return opt;
}

namespace {

void echo_config(const CliConfig& cfg) {
    fs::create_directories(cfg.out_dir);
    std::ofstream(fs::path(cfg.out_dir) / "config.json", std::ios::binary)
        << cli_config_json(cfg);
}

std::string expand_aspects(const std::string& arg) {
    std::string aspects = arg == "all" ? "CDLH" : arg;
    for (char a : aspects)
        if (std::string("CDLH").find(a) == std::string::npos)
            throw ConfigError("aspect must be C, D, L, H or all (got " + arg + ")");
    return aspects;
}

// Aspect models stored as <dir>/<aspect>/final (cmd_train layout) or
// directly as <dir>/<aspect> checkpoint directories.
std::map<char, std::string> find_model_dirs(const std::string& models_dir) {
    std::map<char, std::string> found;
    for (char a : std::string("CDLH")) {
        fs::path base = fs::path(models_dir) / std::string(1, a);
        if (fs::exists(base / "final" / "header.json"))
            found[a] = (base / "final").string();
        else if (fs::exists(base / "header.json"))
            found[a] = base.string();
    }
    if (found.empty())
        throw ConfigError("no aspect models under " + models_dir +
                          " (expected <dir>/<C|D|L|H>[/final] checkpoints)");
    return found;
}

int cmd_gen_corpus(const CliConfig& cfg, bool json_out) {
    CorpusSpec spec = corpus_spec_from(cfg);
    fs::path manifest_path = fs::path(cfg.out_dir) / "manifest.jsonl";
    std::string previous;
    if (fs::exists(manifest_path)) previous = slurp_file(manifest_path.string());

    std::string manifest = generate_corpus(spec, cfg.out_dir);
    echo_config(cfg);
    std::string current = slurp_file(manifest);
    uint64_t hash = fnv1a64(current);
    bool identical = !previous.empty() && previous == current;

    auto corpus = load_manifest(manifest);
    char hash_hex[32];
    std::snprintf(hash_hex, sizeof hash_hex, "%016llx", static_cast<unsigned long long>(hash));
    if (json_out) {
        ordered_json j;
        j["manifest"] = manifest;
        j["utterances"] = corpus.size();
        j["hash"] = hash_hex;
        j["identical"] = identical;
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << corpus_summary(corpus);
        std::cout << "manifest " << manifest << " (hash " << hash_hex << ")\n";
        if (identical) std::cout << "corpus identical\n";
    }
    return 0;
}

int cmd_train(const CliConfig& cfg, const std::string& regime, const std::string& aspect_arg,
              bool json_out) {
    std::string aspects = expand_aspects(aspect_arg);
    if (cfg.seeds.empty()) throw ConfigError("seed list must not be empty");
    uint64_t seed = cfg.seeds.front();
    echo_config(cfg);
    Laboratory lab(corpus_spec_from(cfg), experiment_options_from(cfg));

    bool all_ok = true;
    ordered_json results = ordered_json::array();
    for (char aspect : aspects) {
        std::string adir =
            (fs::path(cfg.out_dir) / regime / std::string(1, aspect)).string();
        CellOutcome cell = lab.run_cell(regime, aspect, seed, &adir);
        all_ok = all_ok && cell.ok;
        if (json_out) {
            ordered_json j;
            j["regime"] = regime;
            j["aspect"] = std::string(1, aspect);
            j["seed"] = seed;
            j["ok"] = cell.ok;
            if (cell.ok) {
                j["macro"] = cell.report.macro_acc;
                j["pcc"] = cell.report.pcc_defined ? ordered_json(cell.report.pcc)
                                                   : ordered_json(nullptr);
                j["artifacts"] = adir;
            } else {
                j["error"] = cell.error;
            }
            results.push_back(std::move(j));
        } else if (cell.ok) {
            char line[160];
            std::snprintf(line, sizeof line, "%s/%c: macro %.3f, checkpoints under %s\n",
                          regime.c_str(), aspect, cell.report.macro_acc, adir.c_str());
            std::cout << line;
        } else {
            std::cerr << "error: " << regime << "/" << aspect << ": " << cell.error << "\n";
        }
    }
    if (json_out) std::cout << results.dump(2) << "\n";
    return all_ok ? 0 : 1;
}

int cmd_eval(const CliConfig& cfg, const std::string& models_dir, const std::string& split,
             const std::string& modality_name_arg, bool json_out) {
    Modality modality = modality_from_name(modality_name_arg);
    echo_config(cfg);
    Laboratory lab(corpus_spec_from(cfg), experiment_options_from(cfg));

    auto dirs = find_model_dirs(models_dir);
    std::vector<Grader<float>> models;
    std::map<char, Grader<float>*> by_aspect;
    models.reserve(dirs.size());
    for (const auto& [aspect, dir] : dirs) {
        models.push_back(load_checkpoint_model(dir));
        by_aspect[aspect] = &models.back();
    }

    auto reports = evaluate_models(by_aspect, lab.vocab(), lab.view(split), modality,
                                   lab.features());
    std::vector<std::string> warnings;
    if (split == "train") warnings.push_back("in-sample: metrics computed on the training split");

    std::string jdoc = reports_json(reports, warnings);
    std::ofstream(fs::path(cfg.out_dir) / "reports.json", std::ios::binary) << jdoc;
    std::ofstream(fs::path(cfg.out_dir) / "reports.csv", std::ios::binary)
        << reports_csv(reports);
    std::ofstream(fs::path(cfg.out_dir) / "reports.txt", std::ios::binary)
        << reports_text(reports, warnings);
    for (const auto& lr : reports)
        std::ofstream(fs::path(cfg.out_dir) / ("confusion_" + lr.label + ".csv"),
                      std::ios::binary)
            << confusion_csv(lr.report);

    if (json_out)
        std::cout << jdoc;
    else
        std::cout << reports_text(reports, warnings);
    return 0;
}

int cmd_ablate(const CliConfig& cfg, bool json_out) {
    echo_config(cfg);
    Laboratory lab(corpus_spec_from(cfg), experiment_options_from(cfg));
    AblationReport rep = lab.run_grid(cfg.regimes, cfg.aspects, cfg.seeds);

    std::ofstream(fs::path(cfg.out_dir) / "ablation.json", std::ios::binary)
        << ablation_json(rep);
    std::ofstream(fs::path(cfg.out_dir) / "ablation.csv", std::ios::binary) << ablation_csv(rep);
    std::ofstream(fs::path(cfg.out_dir) / "ablation.txt", std::ios::binary) << ablation_text(rep);

    if (json_out)
        std::cout << ablation_json(rep);
    else
        std::cout << ablation_text(rep);
    for (const auto& c : rep.cells)
        if (!c.ok) return 1;
    return 0;
}

int cmd_grade(const std::string& models_dir, const std::string& features_path,
              const std::string& wav_path, const std::string& transcript, bool json_out) {
    if (features_path.empty() == wav_path.empty())
        throw ConfigError("grade needs exactly one of --features or --wav");
    TensorF mel = features_path.empty() ? log_mel(read_wav(wav_path))
                                        : load_features(features_path);

    auto dirs = find_model_dirs(models_dir);
    auto vocab = Vocabulary::build(checkpoint_vocab_words(dirs.begin()->second));
    std::vector<int> ids;
    {
        std::istringstream ss(transcript);
        std::string tok;
        while (ss >> tok) ids.push_back(vocab.id(tok));
    }
    Modality modality = ids.empty() ? Modality::audio_only : Modality::multimodal;

    std::map<char, int> scores;
    for (const auto& [aspect, dir] : dirs) {
        Grader<float> g = load_checkpoint_model(dir);
        if (g.vocab_size() != vocab.size())
            throw FormatError("aspect models disagree on vocabulary size");
        Tape<float> tape;
        auto fwd = g.forward(tape, &mel, aspect, ids, modality);
        scores[aspect] = Grader<float>::constrained_decode(tape.val(fwd.label_logits));
    }
    std::optional<int> agg;
    if (scores.count('C') && scores.count('D') && scores.count('L'))
        agg = holistic_aggregate(scores.at('C'), scores.at('D'), scores.at('L'));

    if (json_out) {
        ordered_json j;
        j["modality"] = modality_name(modality);
        for (char a : std::string("CDLH"))
            if (scores.count(a)) j[std::string(1, a)] = level_name(scores.at(a));
        if (agg) j["H_agg"] = level_name(*agg);
        std::cout << j.dump(2) << "\n";
    } else {
        for (char a : std::string("CDLH"))
            if (scores.count(a))
                std::cout << a << ": " << level_name(scores.at(a)) << "\n";
        if (agg) std::cout << "H_agg: " << level_name(*agg) << "\n";
    }
    return 0;
}

int cmd_report(const std::string& in_path, bool json_out) {
    std::string doc = slurp_file(in_path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(doc);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError("report " + in_path + ": " + e.what());
    }
    if (!j.contains("reports")) throw FormatError("report " + in_path + ": no reports array");

    std::vector<LabeledReport> reports;
    for (const auto& r : j.at("reports")) {
        LabeledReport lr;
        lr.label = r.at("label").get<std::string>();
        MetricsReport& m = lr.report;
        m.aspect = r.at("aspect").get<std::string>().at(0);
        m.n = r.at("n").get<size_t>();
        m.pcc_defined = r.at("pcc_defined").get<bool>();
        m.pcc = r.at("pcc").get<double>();
        m.rmse = r.at("rmse").get<double>();
        m.abs_acc = r.at("abs_acc").get<double>();
        m.adj_acc = r.at("adj_acc").get<double>();
        m.macro_acc = r.at("macro_acc").get<double>();
        m.acc_within_05 = r.at("acc_within_0.5").get<double>();
        m.acc_within_10 = r.at("acc_within_1.0").get<double>();
        const auto& conf = r.at("confusion");
        for (size_t g = 0; g < 8; ++g)
            for (size_t p = 0; p < 8; ++p)
                m.confusion[g][p] = conf.at(g).at(p).get<int>();
        reports.push_back(std::move(lr));
    }
    std::vector<std::string> warnings;
    if (j.contains("warnings"))
        for (const auto& w : j.at("warnings")) warnings.push_back(w.get<std::string>());

    if (json_out)
        std::cout << reports_json(reports, warnings);
    else
        std::cout << reports_text(reports, warnings);
    return 0;
}

struct CommonFlags {
    std::string config_path;
    uint64_t seed = 0;
    bool seed_set = false;
    std::string out_dir;
    bool json = false;
};

void add_common(CLI::App* sub, CommonFlags& flags) {
    sub->add_option("--config", flags.config_path, "JSON experiment config");
    auto* s = sub->add_option("--seed", flags.seed, "primary seed (corpus and training)");
    s->each([&flags](const std::string&) { flags.seed_set = true; });
    sub->add_option("--out", flags.out_dir, "output directory (all files land here)");
    sub->add_flag("--json", flags.json, "machine-readable stdout");
}

CliConfig resolve_config(const CommonFlags& flags) {
    CliConfig cfg = load_cli_config(flags.config_path);
    if (flags.seed_set) {
        cfg.corpus_seed = flags.seed;
        cfg.seeds = {flags.seed};
    }
    if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
    return cfg;
}

}  // namespace

int cli_main(int argc, char** argv) {
    CLI::App app{"speech-first multimodal training laboratory"};
    app.require_subcommand(1);

    CommonFlags flags;

    auto* gen = app.add_subcommand("gen-corpus", "generate the synthetic corpus");
    add_common(gen, flags);
    double target_wer = -1;
    gen->add_option("--target-wer", target_wer, "simulated transcription word error rate");

    auto* train = app.add_subcommand("train", "run one training regime");
    add_common(train, flags);
    std::string regime, aspect_arg = "all";
    train->add_option("--regime", regime, "joint | text_only | audio_only | sfmt")->required();
    train->add_option("--aspect", aspect_arg, "C, D, L, H, a combination, or all");

    auto* eval = app.add_subcommand("eval", "evaluate stored checkpoints on a split");
    add_common(eval, flags);
    std::string models_dir, split_arg, modality_arg = "multimodal";
    eval->add_option("--models", models_dir, "directory holding per-aspect checkpoints")
        ->required();
    eval->add_option("--split", split_arg, "train | valid | test | unseen");
    eval->add_option("--modality", modality_arg, "multimodal | audio_only | text_only");

    auto* ablate = app.add_subcommand("ablate", "regime x aspect x seed comparison grid");
    add_common(ablate, flags);
    std::string aspects_arg;
    std::vector<uint64_t> seeds_arg;
    ablate->add_option("--aspects", aspects_arg, "aspect letters, e.g. D or CDLH");
    ablate->add_option("--seeds", seeds_arg, "explicit seed list");

    auto* grade = app.add_subcommand("grade", "score one utterance");
    add_common(grade, flags);
    std::string features_path, wav_path, transcript;
    grade->add_option("--models", models_dir, "directory holding per-aspect checkpoints")
        ->required();
    grade->add_option("--features", features_path, "feature matrix file");
    grade->add_option("--wav", wav_path, "16 kHz mono PCM16 WAV file");
    grade->add_option("--transcript", transcript, "space-separated tokens; omit for audio-only");

    auto* report = app.add_subcommand("report", "re-render a stored reports.json");
    add_common(report, flags);
    std::string in_path;
    report->add_option("--in", in_path, "path to reports.json")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        CliConfig cfg = resolve_config(flags);
        if (gen->parsed()) {
            if (target_wer >= 0) cfg.target_wer = target_wer;
            return cmd_gen_corpus(cfg, flags.json);
        }
        if (train->parsed()) return cmd_train(cfg, regime, aspect_arg, flags.json);
        if (eval->parsed())
            return cmd_eval(cfg, models_dir, split_arg.empty() ? cfg.split : split_arg,
                            modality_arg, flags.json);
        if (ablate->parsed()) {
            if (!aspects_arg.empty()) cfg.aspects = aspects_arg;
            if (!seeds_arg.empty()) cfg.seeds = seeds_arg;
            return cmd_ablate(cfg, flags.json);
        }
        if (grade->parsed()) return cmd_grade(models_dir, features_path, wav_path, transcript, flags.json);
        if (report->parsed()) return cmd_report(in_path, flags.json);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace sfmt
