#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "sfmt/error.hpp"
#include "sfmt/mel.hpp"
#include "sfmt/rng.hpp"
#include "sfmt/wav.hpp"

using namespace sfmt;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(std::string p) : path(std::move(p)) {}
    ~TempFile() { std::remove(path.c_str()); }
};

std::vector<char> slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    return std::vector<char>((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void dump(const std::string& path, const std::vector<char>& bytes) {
    std::ofstream f(path, std::ios::binary);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("one second of silence reads back as 16000 zeros") {
    TempFile tf("tmp_silence.wav");
    PcmSignal sig;
    sig.samples.assign(16000, 0.0f);
    write_wav(tf.path, sig);
    PcmSignal back = read_wav(tf.path);
    CHECK(back.sample_rate == 16000);
    REQUIRE(back.samples.size() == 16000);
    for (float s : back.samples) CHECK(s == 0.0f);
}

TEST_CASE("wav round trip preserves random pcm exactly") {
    TempFile tf("tmp_rand.wav");
    Rng rng(31);
    PcmSignal sig;
    sig.samples.resize(5000);
    for (auto& s : sig.samples) {
        auto v = static_cast<int16_t>(static_cast<int64_t>(rng.uniform_int(65536)) - 32768);
        s = static_cast<float>(v) / 32768.0f;
    }
    write_wav(tf.path, sig);
    PcmSignal back = read_wav(tf.path);
    REQUIRE(back.samples.size() == sig.samples.size());
    for (size_t i = 0; i < sig.samples.size(); ++i) CHECK(back.samples[i] == sig.samples[i]);
}

TEST_CASE("wav reader rejects a 44.1 kHz file naming the field") {
    TempFile tf("tmp_badrate.wav");
    PcmSignal sig;
    sig.samples.assign(2000, 0.1f);
    write_wav(tf.path, sig);
    auto bytes = slurp(tf.path);
    // sample_rate lives at offset 24 in the canonical header
    uint32_t rate = 44100;
    std::memcpy(bytes.data() + 24, &rate, 4);
    std::memcpy(bytes.data() + 28, &rate, 4);  // keep byte_rate consistent
    dump(tf.path, bytes);
    try {
        read_wav(tf.path);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("sample_rate") != std::string::npos);
    }
}

TEST_CASE("wav reader rejects non-wav bytes") {
    TempFile tf("tmp_notwav.wav");
    dump(tf.path, {'h', 'e', 'l', 'l', 'o'});
    CHECK_THROWS_AS(read_wav(tf.path), FormatError);
    CHECK_THROWS_AS(read_wav("does_not_exist.wav"), FormatError);
}

TEST_CASE("frame count formula") {
    CHECK(frame_count(16000) == 98);  // 1 + floor(15600/160)
    CHECK(frame_count(1600) == 1 + (1600 - 400) / 160);
    CHECK_THROWS_AS(frame_count(1599), DimError);

    Rng rng(77);
    for (int i = 0; i < 200; ++i) {
        size_t n = 1600 + rng.uniform_int(200000);
        CHECK(frame_count(n) == 1 + static_cast<int>((n - 400) / 160));
    }
}

TEST_CASE("silence maps every cell to the log floor") {
    PcmSignal sig;
    sig.samples.assign(16000, 0.0f);
    TensorF fm = log_mel(sig);
    CHECK(fm.shape == Shape{98, 40});
    float floor_f = static_cast<float>(kLogFloor);
    for (float v : fm.data) CHECK(v == floor_f);
}

TEST_CASE("log_mel is deterministic and respects the floor") {
    Rng rng(5);
    PcmSignal sig;
    sig.samples.resize(8000);
    for (auto& s : sig.samples) s = static_cast<float>(rng.uniform(-0.5, 0.5));
    TensorF a = log_mel(sig);
    TensorF b = log_mel(sig);
    CHECK(a.data == b.data);
    for (float v : a.data) CHECK(v >= static_cast<float>(kLogFloor));
}

TEST_CASE("a 1 kHz tone peaks in the band that covers 1 kHz") {
    PcmSignal sig;
    sig.samples.resize(16000);
    for (size_t n = 0; n < sig.samples.size(); ++n)
        sig.samples[n] = static_cast<float>(0.5 * std::sin(2.0 * 3.141592653589793 * 1000.0 * n / 16000.0));
    TensorF fm = log_mel(sig);

    // independent band location: HTK mel formula, 42 points over 0-8000 Hz,
    // 1 kHz sits at FFT bin 32; expect the filter with the largest weight there
    auto h2m = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
    auto m2h = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
    double mhi = h2m(8000.0);
    int expect = -1;
    double best = -1.0;
    for (int m = 0; m < 40; ++m) {
        double lo = m2h(mhi * m / 41.0) / 31.25;
        double mid = m2h(mhi * (m + 1) / 41.0) / 31.25;
        double hi = m2h(mhi * (m + 2) / 41.0) / 31.25;
        double x = 32.0, w = 0.0;
        if (x > lo && x < mid) w = (x - lo) / (mid - lo);
        else if (x >= mid && x < hi) w = (hi - x) / (hi - mid);
        if (w > best) {
            best = w;
            expect = m;
        }
    }
    REQUIRE(expect >= 0);

    int hits = 0;
    for (int t = 0; t < fm.rows(); ++t) {
        int arg = 0;
        for (int m = 1; m < 40; ++m)
            if (fm.at(t, m) > fm.at(t, arg)) arg = m;
        if (arg == expect) ++hits;
    }
    CHECK(hits >= fm.rows() * 95 / 100);
}

TEST_CASE("doubling amplitude raises unclamped cells by ln 4") {
    Rng rng(11);
    PcmSignal sig;
    sig.samples.resize(6400);
    for (auto& s : sig.samples) s = static_cast<float>(rng.uniform(-0.4, 0.4));
    PcmSignal loud = sig;
    for (auto& s : loud.samples) s *= 2.0f;
    TensorF a = log_mel(sig);
    TensorF b = log_mel(loud);
    double ln4 = std::log(4.0);
    int checked = 0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        if (a.data[i] <= static_cast<float>(kLogFloor) + 0.1f) continue;
        CHECK(static_cast<double>(b.data[i]) - a.data[i] == doctest::Approx(ln4).epsilon(1e-5));
        ++checked;
    }
    CHECK(checked > 1000);
}

TEST_CASE("feature files round trip bitwise") {
    TempFile tf("tmp_feat.bin");
    Rng rng(3);
    TensorF fm = TensorF::zeros({98, 40});
    for (auto& v : fm.data) v = static_cast<float>(rng.normal(0.0, 5.0));
    save_features(fm, tf.path);
    TensorF back = load_features(tf.path);
    CHECK(back.shape == fm.shape);
    CHECK(std::memcmp(back.data.data(), fm.data.data(), fm.data.size() * sizeof(float)) == 0);
}

TEST_CASE("feature save rejects empty matrices") {
    CHECK_THROWS_AS(save_features(TensorF::zeros({0, 40}), "tmp_none.bin"), DimError);
    CHECK_THROWS_AS(save_features(TensorF::zeros({4}), "tmp_none.bin"), DimError);
}

TEST_CASE("feature load detects corruption") {
    TempFile tf("tmp_feat2.bin");
    TensorF fm = TensorF::full({3, 4}, 1.5f);
    save_features(fm, tf.path);

    auto bytes = slurp(tf.path);
    auto corrupted = bytes;
    corrupted[0] = 'X';
    dump(tf.path, corrupted);
    try {
        load_features(tf.path);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("magic") != std::string::npos);
    }

    auto wrong_ver = bytes;
    wrong_ver[8] = 9;
    dump(tf.path, wrong_ver);
    try {
        load_features(tf.path);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("version") != std::string::npos);
    }

    auto truncated = bytes;
    truncated.resize(20);
    dump(tf.path, truncated);
    CHECK_THROWS_AS(load_features(tf.path), FormatError);
}
