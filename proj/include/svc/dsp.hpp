#pragma once

#include <complex>
#include <vector>

#include "svc/audio.hpp"

namespace svc {

struct SpectroConfig {
    int sample_rate = 32000;
    int n_fft = 1024;
    int hop = 320;
    int win_length = 1024;
    int n_mels = 80;
    double fmin = 0.0;
    double fmax = 0.0;  // 0 means sample_rate / 2

    double fmax_effective() const { return fmax > 0.0 ? fmax : sample_rate / 2.0; }
    void validate() const;
    // T = 1 + floor(N / hop), the shared frame count of every analysis stream.
    int frame_count(size_t n_samples) const { return 1 + int(n_samples / size_t(hop)); }
};

struct MelSpectrogram {
    // frames[t] has n_mels log-energies, floored at log(1e-5).
    std::vector<std::vector<float>> frames;
    SpectroConfig config;

    int n_frames() const { return int(frames.size()); }
};

struct F0Track {
    std::vector<float> f0_hz;     // 0 for unvoiced
    std::vector<bool> voiced;
    int n_frames() const { return int(f0_hz.size()); }
};

// Periodic Hann: w[i] = 0.5 (1 - cos(2 pi i / n)).
std::vector<double> hann_window(int n);

// Center-aligned STFT with reflect padding of n_fft/2 on both ends.
// Result is T frames of n_fft/2+1 complex bins.
std::vector<std::vector<std::complex<double>>> stft(const AudioClip& clip, const SpectroConfig& cfg);

// Triangular filters on the HTK mel scale m(f) = 2595 log10(1 + f/700),
// un-normalized, peak 1. Shape n_mels x (n_fft/2 + 1).
std::vector<std::vector<double>> mel_filterbank(const SpectroConfig& cfg);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// log(max(filterbank . |stft|, 1e-5)), natural log, magnitude spectrogram.
MelSpectrogram log_mel(const AudioClip& clip, const SpectroConfig& cfg);

constexpr double kLogMelFloor = 1e-5;

// YIN pitch tracker on hop-aligned frames: cumulative-mean-normalized
// difference, absolute threshold 0.1, parabolic interpolation.
F0Track estimate_f0(const AudioClip& clip, double f0_min, double f0_max, const SpectroConfig& cfg);

// Code 0 = unvoiced; voiced f0 mapped log-linearly from [50, 1100] Hz onto
// 1..n_bins-1, clamped.
std::vector<int> f0_to_bins(const F0Track& track, int n_bins);

}  // namespace svc
