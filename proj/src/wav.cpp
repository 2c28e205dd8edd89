#include "sfmt/wav.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "sfmt/error.hpp"

namespace sfmt {

namespace {

uint32_t rd_u32(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t rd_u16(const unsigned char* p) {
    return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

void wr_u32(std::string& s, uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void wr_u16(std::string& s, uint16_t v) {
    s.push_back(static_cast<char>(v & 0xff));
    s.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

PcmSignal read_wav(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("wav: cannot open " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 || std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
        throw FormatError("wav: not a RIFF/WAVE file: " + path);

    bool have_fmt = false;
    uint16_t format = 0, channels = 0, bits = 0;
    uint32_t rate = 0;
    const unsigned char* data = nullptr;
    uint32_t data_len = 0;

    size_t pos = 12;
    while (pos + 8 <= buf.size()) {
        const unsigned char* chunk = buf.data() + pos;
        uint32_t len = rd_u32(chunk + 4);
        const unsigned char* body = chunk + 8;
        if (pos + 8 + len > buf.size()) throw FormatError("wav: truncated chunk in " + path);
        if (std::memcmp(chunk, "fmt ", 4) == 0) {
            if (len < 16) throw FormatError("wav: short fmt chunk");
            format = rd_u16(body);
            channels = rd_u16(body + 2);
            rate = rd_u32(body + 4);
            bits = rd_u16(body + 14);
            have_fmt = true;
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            data = body;
            data_len = len;
        }
        pos += 8 + len + (len & 1);  // chunks are word-aligned
    }

    if (!have_fmt || !data) throw FormatError("wav: missing fmt/data chunk in " + path);
    if (format != 1) throw FormatError("wav: audio_format must be PCM, got " + std::to_string(format));
    if (channels != 1) throw FormatError("wav: channels must be 1, got " + std::to_string(channels));
    if (rate != 16000) throw FormatError("wav: sample_rate must be 16000, got " + std::to_string(rate));
    if (bits != 16) throw FormatError("wav: bits_per_sample must be 16, got " + std::to_string(bits));

    PcmSignal sig;
    sig.sample_rate = 16000;
    sig.samples.resize(data_len / 2);
    for (size_t i = 0; i < sig.samples.size(); ++i) {
        int16_t v = static_cast<int16_t>(rd_u16(data + 2 * i));
        sig.samples[i] = static_cast<float>(v) / 32768.0f;
    }
    return sig;
}

void write_wav(const std::string& path, const PcmSignal& sig) {
    if (sig.sample_rate != 16000) throw FormatError("wav: sample_rate must be 16000");
    std::string out;
    uint32_t data_len = static_cast<uint32_t>(sig.samples.size() * 2);
    out += "RIFF";
    wr_u32(out, 36 + data_len);
    out += "WAVEfmt ";
    wr_u32(out, 16);
    wr_u16(out, 1);       // PCM
    wr_u16(out, 1);       // mono
    wr_u32(out, 16000);
    wr_u32(out, 16000 * 2);
    wr_u16(out, 2);
    wr_u16(out, 16);
    out += "data";
    wr_u32(out, data_len);
    for (float s : sig.samples) {
        double v = std::lround(static_cast<double>(s) * 32768.0);
        v = std::min(32767.0, std::max(-32768.0, v));
        wr_u16(out, static_cast<uint16_t>(static_cast<int16_t>(v)));
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("wav: cannot write " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw FormatError("wav: write failed for " + path);
}

}  // namespace sfmt
