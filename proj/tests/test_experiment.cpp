#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "sfmt/checkpoint.hpp"
#include "sfmt/experiment.hpp"

using namespace sfmt;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::path("tmp_experiment") / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

ExperimentOptions quick_options() {
    ExperimentOptions opt;
    opt.bootstrap_epochs = 2;
    opt.bootstrap_lr = 2e-3;
    opt.model.d_model = 16;
    opt.model.num_heads = 2;
    opt.model.num_layers = 1;
    opt.model.conformer_blocks = 1;
    opt.model.lora_rank = 2;
    return opt;
}

Laboratory quick_lab(uint64_t corpus_seed = 31) {
    return Laboratory(CorpusSpec::scaled(120, corpus_seed), quick_options());
}

}  // namespace

TEST_CASE("regimes evaluate under their own modality") {
    CHECK(regime_eval_modality("joint") == Modality::multimodal);
    CHECK(regime_eval_modality("sfmt") == Modality::multimodal);
    CHECK(regime_eval_modality("audio_only") == Modality::audio_only);
    CHECK(regime_eval_modality("text_only") == Modality::text_only);
    CHECK_THROWS_AS(regime_eval_modality("bogus"), ConfigError);
}

TEST_CASE("evaluate_models emits per-aspect blocks and the aggregated holistic block") {
    auto lab = quick_lab();
    const auto& test = lab.view("test");
    Grader<float> gc(quick_options().model, lab.vocab().size(), 3);
    Grader<float> gd(quick_options().model, lab.vocab().size(), 4);
    Grader<float> gl(quick_options().model, lab.vocab().size(), 5);
    Grader<float> gh(quick_options().model, lab.vocab().size(), 6);

    auto one = evaluate_models({{'D', &gd}}, lab.vocab(), test, Modality::audio_only,
                               lab.features());
    REQUIRE(one.size() == 1);
    CHECK(one[0].label == "D");
    CHECK(one[0].report.n == test.size());

    auto full = evaluate_models({{'C', &gc}, {'D', &gd}, {'L', &gl}, {'H', &gh}}, lab.vocab(),
                                test, Modality::multimodal, lab.features());
    REQUIRE(full.size() == 5);
    CHECK(full[0].label == "C");
    CHECK(full[1].label == "D");
    CHECK(full[2].label == "L");
    CHECK(full[3].label == "H");
    CHECK(full[4].label == "H_agg");

    // the aggregated block matches recomputing the aggregate per utterance
    Trainer tc(gc, lab.vocab()), td(gd, lab.vocab()), tl(gl, lab.vocab());
    auto pc = tc.predict('C', Modality::multimodal, test, lab.features());
    auto pd = td.predict('D', Modality::multimodal, test, lab.features());
    auto pl = tl.predict('L', Modality::multimodal, test, lab.features());
    PredictionSet agg('H');
    for (size_t i = 0; i < test.size(); ++i)
        agg.add(test[i]->id, holistic_aggregate(pc.preds()[i], pd.preds()[i], pl.preds()[i]),
                aspect_label(*test[i], 'H'));
    auto expect = compute_report(agg);
    CHECK(full[4].report.abs_acc == expect.abs_acc);
    CHECK(full[4].report.macro_acc == expect.macro_acc);
    CHECK(full[4].report.confusion == expect.confusion);

    CHECK_THROWS_AS(evaluate_models({}, lab.vocab(), test, Modality::multimodal, lab.features()),
                    ConfigError);
    CHECK_THROWS_AS(
        evaluate_models({{'D', &gd}}, lab.vocab(), {}, Modality::multimodal, lab.features()),
        ConfigError);
}

TEST_CASE("laboratory caches one warm start per aspect and seed") {
    auto lab = quick_lab();
    const Grader<float>* d1 = &lab.bootstrap('D', 1);
    CHECK(&lab.bootstrap('D', 1) == d1);  // cached
    const Grader<float>* d2 = &lab.bootstrap('D', 2);
    const Grader<float>* c1 = &lab.bootstrap('C', 1);
    CHECK(d2 != d1);
    CHECK(c1 != d1);
    CHECK(d1->params().value_hash() != d2->params().value_hash());
    CHECK(d1->params().value_hash() != c1->params().value_hash());
}

TEST_CASE("a cell trains a copy and leaves the warm start untouched") {
    auto lab = quick_lab();
    uint64_t before = lab.bootstrap('D', 1).params().value_hash();
    auto cell = lab.run_cell("text_only", 'D', 1);
    REQUIRE(cell.ok);
    CHECK(cell.report.n == lab.view("test").size());
    CHECK(lab.bootstrap('D', 1).params().value_hash() == before);

    auto bad = lab.run_cell("bogus", 'D', 1);
    CHECK_FALSE(bad.ok);
    CHECK(bad.error.find("unknown regime") != std::string::npos);
}

TEST_CASE("cell artifacts replay to the same metrics") {
    auto lab = quick_lab();
    TempDir dir("artifacts");
    std::string adir = (dir.path / "sfmt_D").string();
    auto cell = lab.run_cell("sfmt", 'D', 5, &adir);
    REQUIRE(cell.ok);

    CHECK(fs::exists(fs::path(adir) / "stage_stage1" / "params.bin"));
    CHECK(fs::exists(fs::path(adir) / "stage_stage2" / "params.bin"));
    CHECK(fs::exists(fs::path(adir) / "final" / "params.bin"));
    CHECK(fs::exists(fs::path(adir) / "report.csv"));
    CHECK(fs::exists(fs::path(adir) / "report.txt"));
    CHECK(fs::exists(fs::path(adir) / "confusion.csv"));

    std::ifstream log(fs::path(adir) / "train_log.jsonl");
    int rows = 0;
    std::string line;
    while (std::getline(log, line)) {
        auto j = nlohmann::json::parse(line);
        CHECK(j.contains("stage"));
        ++rows;
    }
    CHECK(rows == 4);  // two stages, two epochs each

    // the stored final checkpoint reproduces the reported metrics exactly
    auto restored = load_checkpoint_model((fs::path(adir) / "final").string());
    auto replay = evaluate_models({{'D', &restored}}, lab.vocab(), lab.view("test"),
                                  regime_eval_modality("sfmt"), lab.features());
    CHECK(replay[0].report.abs_acc == cell.report.abs_acc);
    CHECK(replay[0].report.macro_acc == cell.report.macro_acc);
    CHECK(replay[0].report.confusion == cell.report.confusion);

    // the stage-2 entry equals the stage-1 checkpoint by construction
    auto s1 = checkpoint_params_hash((fs::path(adir) / "stage_stage1").string());
    auto s2 = checkpoint_params_hash((fs::path(adir) / "stage_stage2").string());
    CHECK(s1 != s2);

    auto j = nlohmann::json::parse(reports_json({{cell.regime, cell.report}}));
    CHECK(j["reports"][0]["label"] == "sfmt");
}

TEST_CASE("strict adapter mode trains nothing but the adapters") {
    auto opt = quick_options();
    opt.strict_adapters = true;
    Laboratory lab(CorpusSpec::scaled(120, 31), opt);
    const auto& boot = lab.bootstrap('D', 9);
    std::map<std::string, std::vector<float>> base;
    for (size_t i = 0; i < boot.params().size(); ++i)
        base[boot.params().at(i).name] = boot.params().at(i).value.data;

    TempDir dir("strict");
    std::string adir = (dir.path / "joint_D").string();
    auto cell = lab.run_cell("joint", 'D', 9, &adir);
    REQUIRE(cell.ok);
    auto restored = load_checkpoint_model((fs::path(adir) / "final").string());
    CHECK(restored.lora_attached());
    for (size_t i = 0; i < restored.params().size(); ++i) {
        const auto& p = restored.params().at(i);
        if (p.group == "audio_lora") continue;  // fresh adapters, not in the warm start
        CHECK(p.value.data == base.at(p.name));
    }
}

TEST_CASE("the ablation grid aggregates seeds and renders every format") {
    auto lab = quick_lab();
    auto rep = lab.run_grid({"joint", "text_only"}, "D", {1, 2});
    REQUIRE(rep.cells.size() == 4);
    for (const auto& c : rep.cells) CHECK(c.ok);
    CHECK(rep.grid.at("joint").at('D').n == 2);
    CHECK(rep.grid.at("text_only").at('D').n == 2);
    CHECK(rep.has_delivery);
    CHECK(rep.verdict.find("text-only delivery macro") != std::string::npos);
    CHECK(rep.verdict.find("delivery PCC") == std::string::npos);  // no sfmt row requested

    auto text = ablation_text(rep);
    CHECK(text.find("joint") != std::string::npos);
    CHECK(text.find("text_only") != std::string::npos);

    auto j = nlohmann::json::parse(ablation_json(rep));
    CHECK(j["cells"].size() == 4);
    CHECK(j["grid"]["joint"]["D"]["n"] == 2);
    CHECK(j["verdict"].contains("text_only_delivery_at_chance"));

    auto csv = ablation_csv(rep);
    CHECK(csv.find("regime,aspect,n,") == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);  // header + 2 grid rows

    CHECK_THROWS_AS(lab.run_grid({}, "D", {1}), ConfigError);
    CHECK_THROWS_AS(lab.run_grid({"joint"}, "", {1}), ConfigError);
    CHECK_THROWS_AS(lab.run_grid({"joint"}, "D", {}), ConfigError);
}

TEST_CASE("a failed cell is reported and the grid continues") {
    auto lab = quick_lab();
    auto rep = lab.run_grid({"joint", "bogus"}, "D", {1});
    REQUIRE(rep.cells.size() == 2);
    CHECK(rep.cells[0].ok);
    CHECK_FALSE(rep.cells[1].ok);
    CHECK(rep.grid.count("bogus") == 0);
    auto text = ablation_text(rep);
    CHECK(text.find("failed cells:") != std::string::npos);
    CHECK(text.find("bogus") != std::string::npos);
}

TEST_CASE("identical laboratories produce byte-identical ablation reports") {
    auto run = [] {
        auto lab = quick_lab();
        return ablation_json(lab.run_grid({"joint", "audio_only"}, "D", {4}));
    };
    CHECK(run() == run());
}
