#include "sfmt/mel.hpp"

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "sfmt/error.hpp"

namespace sfmt {

namespace {

constexpr double kPi = 3.141592653589793;

// In-place iterative radix-2 Cooley-Tukey; n must be a power of two.
void fft(std::vector<std::complex<double>>& a) {
    size_t n = a.size();
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        double ang = -2.0 * kPi / static_cast<double>(len);
        std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                std::complex<double> u = a[i + k];
                std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// Triangular filters on FFT bins; edge k..k+2 of 42 equally spaced mel
// points between 0 and 8000 Hz.
const std::vector<std::vector<double>>& filter_bank() {
    static const std::vector<std::vector<double>> bank = [] {
        std::vector<double> edges(kMelBands + 2);
        double mel_hi = hz_to_mel(8000.0);
        for (int i = 0; i < kMelBands + 2; ++i) {
            double hz = mel_to_hz(mel_hi * i / (kMelBands + 1));
            edges[static_cast<size_t>(i)] = hz * kFftSize / 16000.0;  // fractional bin
        }
        std::vector<std::vector<double>> fb(kMelBands, std::vector<double>(kFftSize / 2 + 1, 0.0));
        for (int m = 0; m < kMelBands; ++m) {
            double lo = edges[static_cast<size_t>(m)];
            double mid = edges[static_cast<size_t>(m) + 1];
            double hi = edges[static_cast<size_t>(m) + 2];
            for (int b = 0; b <= kFftSize / 2; ++b) {
                double x = b;
                if (x > lo && x < mid)
                    fb[static_cast<size_t>(m)][static_cast<size_t>(b)] = (x - lo) / (mid - lo);
                else if (x >= mid && x < hi)
                    fb[static_cast<size_t>(m)][static_cast<size_t>(b)] = (hi - x) / (hi - mid);
            }
        }
        return fb;
    }();
    return bank;
}

const std::array<double, kFrameLen>& hann_window() {
    static const std::array<double, kFrameLen> win = [] {
        std::array<double, kFrameLen> w{};
        for (int i = 0; i < kFrameLen; ++i)
            w[static_cast<size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / kFrameLen);
        return w;
    }();
    return win;
}

}  // namespace

int frame_count(size_t n) {
    if (n < 1600) throw DimError("log_mel: signal shorter than 0.1 s (" + std::to_string(n) + " samples)");
    return 1 + static_cast<int>((n - kFrameLen) / kFrameHop);
}

TensorF log_mel(const PcmSignal& sig) {
    if (sig.sample_rate != 16000) throw FormatError("log_mel: sample_rate must be 16000");
    int T = frame_count(sig.samples.size());
    const auto& fb = filter_bank();
    const auto& win = hann_window();

    TensorF out = TensorF::zeros({T, kMelBands});
    std::vector<std::complex<double>> buf(kFftSize);
    std::vector<double> power(kFftSize / 2 + 1);
    for (int t = 0; t < T; ++t) {
        size_t off = static_cast<size_t>(t) * kFrameHop;
        for (int i = 0; i < kFftSize; ++i) {
            double s = (i < kFrameLen) ? static_cast<double>(sig.samples[off + static_cast<size_t>(i)]) *
                                             win[static_cast<size_t>(i)]
                                       : 0.0;
            buf[static_cast<size_t>(i)] = {s, 0.0};
        }
        fft(buf);
        for (int b = 0; b <= kFftSize / 2; ++b) power[static_cast<size_t>(b)] = std::norm(buf[static_cast<size_t>(b)]);
        for (int m = 0; m < kMelBands; ++m) {
            const auto& w = fb[static_cast<size_t>(m)];
            double e = 0.0;
            for (int b = 0; b <= kFftSize / 2; ++b) e += w[static_cast<size_t>(b)] * power[static_cast<size_t>(b)];
            double v = std::log(std::max(e, 1e-10));
            out.at(t, m) = static_cast<float>(v);
        }
    }
    return out;
}

namespace {

constexpr char kMagic[8] = {'S', 'F', 'M', 'T', 'F', 'E', 'A', 'T'};
constexpr uint16_t kFeatVersion = 1;

}  // namespace

void save_features(const TensorF& fm, const std::string& path) {
    if (fm.ndim() != 2 || fm.rows() < 1 || fm.cols() < 1)
        throw DimError("save_features: matrix must be T x D with T,D >= 1, got " + shape_str(fm.shape));
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("features: cannot write " + path);
    f.write(kMagic, 8);
    uint16_t ver = kFeatVersion;
    uint32_t T = static_cast<uint32_t>(fm.rows());
    uint16_t D = static_cast<uint16_t>(fm.cols());
    f.write(reinterpret_cast<const char*>(&ver), 2);
    f.write(reinterpret_cast<const char*>(&T), 4);
    f.write(reinterpret_cast<const char*>(&D), 2);
    f.write(reinterpret_cast<const char*>(fm.data.data()),
            static_cast<std::streamsize>(fm.data.size() * sizeof(float)));
    if (!f) throw FormatError("features: write failed for " + path);
}

TensorF load_features(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("features: cannot open " + path);
    char magic[8];
    uint16_t ver = 0, D = 0;
    uint32_t T = 0;
    f.read(magic, 8);
    f.read(reinterpret_cast<char*>(&ver), 2);
    f.read(reinterpret_cast<char*>(&T), 4);
    f.read(reinterpret_cast<char*>(&D), 2);
    if (!f) throw FormatError("features: truncated header in " + path);
    if (std::memcmp(magic, kMagic, 8) != 0) throw FormatError("features: bad magic in " + path);
    if (ver != kFeatVersion)
        throw FormatError("features: version " + std::to_string(ver) + " unsupported in " + path);
    if (T < 1 || D < 1) throw FormatError("features: empty matrix in " + path);
    TensorF out = TensorF::zeros({static_cast<int>(T), static_cast<int>(D)});
    f.read(reinterpret_cast<char*>(out.data.data()),
           static_cast<std::streamsize>(out.data.size() * sizeof(float)));
    if (!f || f.gcount() != static_cast<std::streamsize>(out.data.size() * sizeof(float)))
        throw FormatError("features: truncated payload in " + path);
    return out;
}

}  // namespace sfmt
