#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sfmt/corpus.hpp"
#include "sfmt/experiment.hpp"

namespace sfmt {

// Everything one experiment run needs, loadable from a single JSON document
// and overridable flag-by-flag. The same structure is echoed as config.json
// into every output directory so results stay reproducible from artifacts.
struct CliConfig {
    int corpus_total = 0;  // 0 keeps the full reference distribution
    uint64_t corpus_seed = 7;
    double target_wer = 0.1475;
    double rater_noise = 0.2;
    int threads = 1;

    ModelConfig model;

    int bootstrap_epochs = 12;
    double bootstrap_lr = 2e-3;
    bool strict_adapters = false;
    uint64_t model_seed = 1;

    std::vector<std::string> regimes = {"joint", "text_only", "audio_only", "sfmt"};
    std::string aspects = "CDLH";
    std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
    std::string split = "test";
    std::string out_dir = "out";
};

CliConfig load_cli_config(const std::string& path);  // empty path = defaults
std::string cli_config_json(const CliConfig& cfg);

CorpusSpec corpus_spec_from(const CliConfig& cfg);
ExperimentOptions experiment_options_from(const CliConfig& cfg);

// Full argv-level entry point; returns the process exit code.
int cli_main(int argc, char** argv);

}  // namespace sfmt
