#pragma once

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "svc/audio.hpp"
#include "svc/rng.hpp"

namespace testutil {

inline svc::AudioClip sine(double freq, double seconds, int sr, double amp = 1.0) {
    svc::AudioClip c;
    c.sample_rate = sr;
    const int n = int(seconds * sr);
    c.samples.resize(size_t(n));
    for (int i = 0; i < n; ++i) c.samples[size_t(i)] = float(amp * std::sin(2.0 * M_PI * freq * i / sr));
    return c;
}

inline svc::AudioClip noise(double seconds, int sr, uint64_t seed, double amp = 0.5) {
    svc::AudioClip c;
    c.sample_rate = sr;
    const int n = int(seconds * sr);
    c.samples.resize(size_t(n));
    svc::Rng rng(seed);
    for (auto& s : c.samples) s = float(amp * rng.uniform(-1.0, 1.0));
    return c;
}

// O(N * n_freqs) direct projection: frequency of maximum correlation on a grid.
inline double dft_peak_freq(const svc::AudioClip& clip, double f_lo, double f_hi, double step) {
    double best_f = f_lo, best_p = -1.0;
    for (double f = f_lo; f <= f_hi + 1e-9; f += step) {
        double re = 0.0, im = 0.0;
        for (size_t i = 0; i < clip.samples.size(); ++i) {
            const double ph = 2.0 * M_PI * f * double(i) / clip.sample_rate;
            re += clip.samples[i] * std::cos(ph);
            im += clip.samples[i] * std::sin(ph);
        }
        const double p = re * re + im * im;
        if (p > best_p) {
            best_p = p;
            best_f = f;
        }
    }
    return best_f;
}

// Unique scratch directory per test binary run.
class TempDir {
  public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() / ("svc_test_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    std::string file(const std::string& name) const { return (path_ / name).string(); }
    std::string str() const { return path_.string(); }

  private:
    std::filesystem::path path_;
};

inline std::vector<unsigned char> read_bytes(const std::string& path) {
    FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) return {};
    std::vector<unsigned char> data;
    unsigned char buf[4096];
    size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) data.insert(data.end(), buf, buf + n);
    std::fclose(f);
    return data;
}

inline void write_bytes(const std::string& path, const std::vector<unsigned char>& data) {
    FILE* f = std::fopen(path.c_str(), "wb");
    std::fwrite(data.data(), 1, data.size(), f);
    std::fclose(f);
}

}  // namespace testutil
