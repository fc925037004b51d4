#include "svc/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "svc/errors.hpp"

namespace svc {

namespace {

uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}

uint16_t read_u16(std::istream& in) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    return uint16_t(b[0]) | uint16_t(b[1]) << 8;
}

void write_u32(std::ostream& out, uint32_t v) {
    char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff), char((v >> 24) & 0xff)};
    out.write(b, 4);
}

void write_u16(std::ostream& out, uint16_t v) {
    char b[2] = {char(v & 0xff), char((v >> 8) & 0xff)};
    out.write(b, 2);
}

double bessel_i0(double x) {
    // Power-series modified Bessel I0, converges quickly for the betas we use.
    double sum = 1.0, term = 1.0;
    for (int k = 1; k < 64; ++k) {
        term *= (x / (2.0 * k)) * (x / (2.0 * k));
        sum += term;
        if (term < 1e-16 * sum) break;
    }
    return sum;
}

}  // namespace

AudioClip read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open wav file: " + path);

    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "RIFF", 4) != 0)
        throw FormatError("not a RIFF file: " + path);
    read_u32(in);  // riff size
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "WAVE", 4) != 0)
        throw FormatError("not a WAVE file: " + path);

    uint16_t format = 0, channels = 0, bits = 0;
    uint32_t rate = 0;
    bool have_fmt = false;
    std::vector<char> data;

    while (in) {
        char id[4];
        in.read(id, 4);
        if (!in) break;
        uint32_t size = read_u32(in);
        if (std::memcmp(id, "fmt ", 4) == 0) {
            format = read_u16(in);
            channels = read_u16(in);
            rate = read_u32(in);
            read_u32(in);  // byte rate
            read_u16(in);  // block align
            bits = read_u16(in);
            have_fmt = true;
            if (size > 16) in.seekg(size - 16, std::ios::cur);
        } else if (std::memcmp(id, "data", 4) == 0) {
            data.resize(size);
            in.read(data.data(), size);
            if (uint32_t(in.gcount()) != size) throw FormatError("truncated data chunk: " + path);
        } else {
            in.seekg(size + (size & 1), std::ios::cur);
        }
    }

    if (!have_fmt) throw FormatError("missing fmt chunk: " + path);
    if (channels < 1 || channels > 2)
        throw ValidationError("unsupported channel count " + std::to_string(channels) + ": " + path);

    const bool pcm16 = (format == 1 && bits == 16);
    const bool f32 = (format == 3 && bits == 32);
    if (!pcm16 && !f32)
        throw ValidationError("unsupported codec (format tag " + std::to_string(format) + ", " +
                              std::to_string(bits) + " bit): " + path);

    const size_t bytes_per = (pcm16 ? 2u : 4u) * channels;
    const size_t n = data.size() / bytes_per;
    AudioClip clip;
    clip.sample_rate = int(rate);
    clip.samples.resize(n);
    const unsigned char* p = reinterpret_cast<const unsigned char*>(data.data());
    for (size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int c = 0; c < channels; ++c) {
            if (pcm16) {
                const unsigned char* q = p + (i * channels + c) * 2;
                int16_t v = int16_t(uint16_t(q[0]) | uint16_t(q[1]) << 8);
                acc += v / 32768.0;
            } else {
                float v;
                std::memcpy(&v, p + (i * channels + c) * 4, 4);
                acc += v;
            }
        }
        clip.samples[i] = float(acc / channels);
    }
    return clip;
}

void write_wav(const AudioClip& clip, const std::string& path) {
    if (clip.samples.empty()) throw ValidationError("refusing to write empty clip: " + path);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);

    const uint32_t data_bytes = uint32_t(clip.samples.size()) * 2;
    out.write("RIFF", 4);
    write_u32(out, 36 + data_bytes);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    write_u32(out, 16);
    write_u16(out, 1);  // PCM
    write_u16(out, 1);  // mono
    write_u32(out, uint32_t(clip.sample_rate));
    write_u32(out, uint32_t(clip.sample_rate) * 2);
    write_u16(out, 2);
    write_u16(out, 16);
    out.write("data", 4);
    write_u32(out, data_bytes);
    for (float s : clip.samples) {
        double x = std::clamp(double(s), -1.0, 1.0);
        int v = int(std::round(x * 32767.0));
        write_u16(out, uint16_t(int16_t(v)));
    }
    if (!out) throw IoError("write failed: " + path);
}

AudioClip resample(const AudioClip& clip, int target_rate) {
    if (target_rate <= 0) throw ValidationError("target rate must be positive");
    if (clip.sample_rate == target_rate) return clip;

    const int n_in = int(clip.samples.size());
    const int n_out = int(std::llround(double(n_in) * target_rate / clip.sample_rate));
    AudioClip out;
    out.sample_rate = target_rate;
    out.samples.resize(size_t(std::max(n_out, 0)));

    const double ratio = double(target_rate) / clip.sample_rate;
    // Low-pass at 90% of the narrower Nyquist.
    const double cutoff = 0.9 * std::min(1.0, ratio);
    const int half_taps = 32;
    const double beta = 8.6;
    const double i0_beta = bessel_i0(beta);

    for (int i = 0; i < n_out; ++i) {
        const double t = double(i) / ratio;  // position in input samples
        const int j0 = int(std::floor(t)) - half_taps + 1;
        double acc = 0.0;
        for (int j = j0; j < j0 + 2 * half_taps; ++j) {
            if (j < 0 || j >= n_in) continue;
            const double d = t - j;
            const double x = d / half_taps;
            if (x <= -1.0 || x >= 1.0) continue;
            const double win = bessel_i0(beta * std::sqrt(1.0 - x * x)) / i0_beta;
            const double arg = M_PI * d * cutoff;
            const double sinc = (std::abs(arg) < 1e-12) ? 1.0 : std::sin(arg) / arg;
            acc += clip.samples[size_t(j)] * cutoff * sinc * win;
        }
        out.samples[size_t(i)] = float(acc);
    }
    return out;
}

}  // namespace svc
