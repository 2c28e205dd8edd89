#include "sfmt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace sfmt {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload is little-endian; add byte swapping before porting");

using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr int kVersion = 1;

std::vector<char> read_file(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw FormatError("checkpoint: cannot open " + p.string());
    return std::vector<char>((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw FormatError("checkpoint: cannot write " + p.string());
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
}

ordered_json config_node(const ModelConfig& c) {
    ordered_json j;
    j["d_model"] = c.d_model;
    j["num_layers"] = c.num_layers;
    j["num_heads"] = c.num_heads;
    j["conformer_blocks"] = c.conformer_blocks;
    j["subsample"] = c.subsample;
    j["lora_rank"] = c.lora_rank;
    j["lora_alpha"] = c.lora_alpha;
    j["max_audio_frames"] = c.max_audio_frames;
    j["max_text_tokens"] = c.max_text_tokens;
    return j;
}

ModelConfig config_from_node(const nlohmann::json& j) {
    ModelConfig c;
    c.d_model = j.at("d_model");
    c.num_layers = j.at("num_layers");
    c.num_heads = j.at("num_heads");
    c.conformer_blocks = j.at("conformer_blocks");
    c.subsample = j.at("subsample");
    c.lora_rank = j.at("lora_rank");
    c.lora_alpha = j.at("lora_alpha");
    c.max_audio_frames = j.at("max_audio_frames");
    c.max_text_tokens = j.at("max_text_tokens");
    return c;
}

nlohmann::json parse_header(const std::string& dir) {
    auto bytes = read_file(fs::path(dir) / "header.json");
    nlohmann::json h = nlohmann::json::parse(bytes.begin(), bytes.end());
    int version = h.at("version");
    if (version != kVersion)
        throw FormatError("checkpoint: unsupported version " + std::to_string(version) +
                          " (expected " + std::to_string(kVersion) + ")");
    return h;
}

}  // namespace

void save_checkpoint(const std::string& dir, const Grader<float>& grader, const CheckpointMeta& meta,
                     const AdamW* opt, const Vocabulary* vocab) {
    fs::create_directories(dir);
    const auto& ps = grader.params();

    ordered_json h;
    h["version"] = kVersion;
    h["config_hash"] = hex64(grader.config().hash());
    h["config"] = config_node(grader.config());
    h["vocab_size"] = grader.vocab_size();
    h["init_seed"] = grader.init_seed();
    h["provenance"] = {{"regime", meta.regime}, {"stage", meta.stage}, {"epoch", meta.epoch}};
    h["rng_state"] = hex64(meta.rng_state);
    h["lora"] = {{"attached", grader.lora_attached()}, {"merged", grader.lora_merged()}};

    std::string payload;
    ordered_json arrays = ordered_json::array();
    for (size_t i = 0; i < ps.size(); ++i) {
        const auto& p = ps.at(i);
        ordered_json a;
        a["name"] = p.name;
        a["group"] = p.group;
        a["shape"] = p.value.shape;
        a["offset"] = payload.size();
        a["numel"] = p.value.data.size();
        arrays.push_back(std::move(a));
        size_t bytes = p.value.data.size() * sizeof(float);
        size_t at = payload.size();
        payload.resize(at + bytes);
        std::memcpy(payload.data() + at, p.value.data.data(), bytes);
    }
    h["arrays"] = std::move(arrays);

    ordered_json optj;
    optj["present"] = opt != nullptr;
    std::string opt_payload;
    if (opt) {
        optj["step_count"] = opt->step_count();
        ordered_json slots = ordered_json::array();
        for (const auto& name : opt->slot_names_sorted()) {
            const auto& s = opt->slot(name);
            ordered_json sj;
            sj["name"] = name;
            sj["numel"] = s.m.size();
            sj["offset"] = opt_payload.size();
            slots.push_back(std::move(sj));
            size_t bytes = s.m.size() * sizeof(float);
            size_t at = opt_payload.size();
            opt_payload.resize(at + 2 * bytes);
            std::memcpy(opt_payload.data() + at, s.m.data(), bytes);
            std::memcpy(opt_payload.data() + at + bytes, s.v.data(), bytes);
        }
        optj["slots"] = std::move(slots);
    }
    h["optimizer"] = std::move(optj);

    write_file(fs::path(dir) / "header.json", h.dump(2) + "\n");
    write_file(fs::path(dir) / "params.bin", payload);
    if (opt) write_file(fs::path(dir) / "opt.bin", opt_payload);
    if (vocab) {
        ordered_json vj;
        std::vector<std::string> words(vocab->tokens().begin() + Vocabulary::NUM_SPECIALS,
                                       vocab->tokens().end());
        vj["words"] = words;
        write_file(fs::path(dir) / "vocab.json", vj.dump(2) + "\n");
    }
}

CheckpointMeta load_checkpoint(const std::string& dir, Grader<float>& grader, AdamW* opt) {
    nlohmann::json h = parse_header(dir);

    std::string want = hex64(grader.config().hash());
    std::string got = h.at("config_hash");
    if (got != want)
        throw FormatError("checkpoint: config_hash mismatch (checkpoint " + got + ", model " + want +
                          ")");
    if (h.at("vocab_size").get<int>() != grader.vocab_size())
        throw FormatError("checkpoint: vocabulary size mismatch");

    grader.set_init_seed(h.at("init_seed"));
    bool attached = h.at("lora").at("attached");
    bool merged = h.at("lora").at("merged");
    if (attached && !grader.lora_attached()) grader.attach_lora(0);
    if (!attached && grader.lora_attached())
        throw FormatError("checkpoint: model has adapters but checkpoint does not");

    auto payload = read_file(fs::path(dir) / "params.bin");
    auto& ps = grader.params();
    const auto& arrays = h.at("arrays");
    if (arrays.size() != ps.size())
        throw FormatError("checkpoint: array count " + std::to_string(arrays.size()) +
                          " does not match model parameter count " + std::to_string(ps.size()));
    for (size_t i = 0; i < arrays.size(); ++i) {
        const auto& a = arrays[i];
        auto& p = ps.at(i);
        if (a.at("name").get<std::string>() != p.name)
            throw FormatError("checkpoint: array order mismatch at " + p.name);
        if (a.at("shape").get<std::vector<int>>() != p.value.shape)
            throw FormatError("checkpoint: shape mismatch for " + p.name);
        size_t offset = a.at("offset");
        size_t numel = a.at("numel");
        size_t bytes = numel * sizeof(float);
        if (numel != p.value.data.size() || offset + bytes > payload.size())
            throw FormatError("checkpoint: payload bounds for " + p.name);
        std::memcpy(p.value.data.data(), payload.data() + offset, bytes);
    }

    if (merged && !grader.lora_merged()) grader.mark_merged();

    const auto& optj = h.at("optimizer");
    if (opt && optj.at("present").get<bool>()) {
        auto opt_payload = read_file(fs::path(dir) / "opt.bin");
        opt->restore_step_count(optj.at("step_count"));
        for (const auto& sj : optj.at("slots")) {
            std::string name = sj.at("name");
            size_t numel = sj.at("numel");
            size_t offset = sj.at("offset");
            size_t bytes = numel * sizeof(float);
            if (offset + 2 * bytes > opt_payload.size())
                throw FormatError("checkpoint: optimizer payload bounds for " + name);
            AdamW::Slot s;
            s.m.resize(numel);
            s.v.resize(numel);
            std::memcpy(s.m.data(), opt_payload.data() + offset, bytes);
            std::memcpy(s.v.data(), opt_payload.data() + offset + bytes, bytes);
            opt->restore_slot(name, std::move(s));
        }
    }

    CheckpointMeta meta;
    meta.version = kVersion;
    meta.regime = h.at("provenance").at("regime");
    meta.stage = h.at("provenance").at("stage");
    meta.epoch = h.at("provenance").at("epoch");
    meta.rng_state = std::stoull(h.at("rng_state").get<std::string>(), nullptr, 16);
    return meta;
}

Grader<float> load_checkpoint_model(const std::string& dir) {
    nlohmann::json h = parse_header(dir);
    ModelConfig cfg = config_from_node(h.at("config"));
    Grader<float> g(cfg, h.at("vocab_size"), h.at("init_seed"));
    load_checkpoint(dir, g);
    return g;
}

bool checkpoint_has_optimizer(const std::string& dir) {
    return parse_header(dir).at("optimizer").at("present").get<bool>();
}

std::vector<std::string> checkpoint_vocab_words(const std::string& dir) {
    auto bytes = read_file(fs::path(dir) / "vocab.json");
    nlohmann::json v = nlohmann::json::parse(bytes.begin(), bytes.end());
    return v.at("words").get<std::vector<std::string>>();
}

uint64_t checkpoint_params_hash(const std::string& dir) {
    auto payload = read_file(fs::path(dir) / "params.bin");
    return fnv1a64(payload.data(), payload.size());
}

}  // namespace sfmt
