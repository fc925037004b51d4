#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <complex>

#include "doctest.h"
#include "helpers.hpp"
#include "svc/content.hpp"
#include "svc/dsp.hpp"
#include "svc/errors.hpp"

using namespace svc;
using namespace testutil;

TEST_CASE("periodic hann window closed forms") {
    const auto w4 = hann_window(4);
    REQUIRE(w4.size() == 4);
    CHECK(w4[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(w4[1] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(w4[2] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(w4[3] == doctest::Approx(0.5).epsilon(1e-12));

    const auto w1 = hann_window(1);
    REQUIRE(w1.size() == 1);
    CHECK(w1[0] == 0.0);

    const auto w1024 = hann_window(1024);
    CHECK(w1024[512] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("stft of zero signal: 101 all-zero frames") {
    AudioClip clip;
    clip.sample_rate = 32000;
    clip.samples.assign(32000, 0.0f);
    SpectroConfig cfg;
    const auto spec = stft(clip, cfg);
    REQUIRE(int(spec.size()) == 101);
    for (const auto& frame : spec) {
        REQUIRE(frame.size() == 513);
        for (const auto& b : frame) CHECK(std::abs(b) == 0.0);
    }
}

TEST_CASE("stft magnitude argmax at bin 100 for a 3125 Hz tone, vs direct DFT oracle") {
    AudioClip tone = sine(3125.0, 0.5, 32000);
    SpectroConfig cfg;
    const auto spec = stft(tone, cfg);
    for (size_t t = 2; t + 2 < spec.size(); ++t) {
        size_t best = 0;
        double best_m = -1.0;
        for (size_t k = 0; k < spec[t].size(); ++k)
            if (std::abs(spec[t][k]) > best_m) {
                best_m = std::abs(spec[t][k]);
                best = k;
            }
        CHECK(best == 100);
    }

    // direct O(N^2) DFT of one interior windowed frame
    const auto win = hann_window(1024);
    const int t = 25;
    const int start = t * cfg.hop - cfg.n_fft / 2;
    std::vector<double> frame(1024, 0.0);
    for (int i = 0; i < 1024; ++i) frame[size_t(i)] = tone.samples[size_t(start + i)] * win[size_t(i)];
    for (int k = 95; k <= 105; ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (int i = 0; i < 1024; ++i)
            acc += frame[size_t(i)] * std::exp(std::complex<double>(0.0, -2.0 * M_PI * k * i / 1024.0));
        CHECK(std::abs(std::abs(acc) - std::abs(spec[size_t(t)][size_t(k)])) < 1e-6 * (1.0 + std::abs(acc)));
    }
}

TEST_CASE("stft linearity on complex frames") {
    AudioClip a = noise(0.2, 32000, 1);
    AudioClip b = noise(0.2, 32000, 2);
    AudioClip ab = a;
    for (size_t i = 0; i < ab.samples.size(); ++i) ab.samples[i] += b.samples[i];
    SpectroConfig cfg;
    const auto sa = stft(a, cfg), sb = stft(b, cfg), sab = stft(ab, cfg);
    double max_rel = 0.0;
    for (size_t t = 0; t < sab.size(); ++t)
        for (size_t k = 0; k < sab[t].size(); ++k) {
            const auto sum = sa[t][k] + sb[t][k];
            max_rel = std::max(max_rel, std::abs(sab[t][k] - sum) / (1.0 + std::abs(sum)));
        }
    CHECK(max_rel < 1e-6);
}

TEST_CASE("stft validation") {
    AudioClip clip = noise(0.1, 16000, 5);
    SpectroConfig cfg;  // 32 kHz
    CHECK_THROWS_AS(stft(clip, cfg), ValidationError);
}

TEST_CASE("mel scale anchor and filterbank structure") {
    CHECK(std::fabs(hz_to_mel(1000.0) - 1000.0) <= 0.5);

    SpectroConfig cfg;
    const auto fb = mel_filterbank(cfg);
    REQUIRE(int(fb.size()) == 80);
    double prev_center = -1.0;
    for (const auto& row : fb) {
        double s = 0.0;
        int peak = 0;
        for (size_t k = 0; k < row.size(); ++k) {
            CHECK(row[k] >= 0.0);
            s += row[k];
            if (row[k] > row[size_t(peak)]) peak = int(k);
        }
        CHECK(s > 0.0);
        CHECK(double(peak) > prev_center);
        prev_center = double(peak);
        // unimodal: non-decreasing to the peak, non-increasing after
        for (int k = 1; k <= peak; ++k) CHECK(row[size_t(k)] >= row[size_t(k - 1)] - 1e-12);
        for (size_t k = size_t(peak) + 1; k < row.size(); ++k) CHECK(row[k] <= row[k - 1] + 1e-12);
    }
}

TEST_CASE("log_mel floor, scaling and frame count") {
    SpectroConfig cfg;
    AudioClip zero;
    zero.sample_rate = 32000;
    zero.samples.assign(16000, 0.0f);
    const MelSpectrogram mz = log_mel(zero, cfg);
    for (const auto& fr : mz.frames)
        for (float v : fr) CHECK(v == doctest::Approx(std::log(1e-5)).epsilon(1e-6));

    AudioClip a = noise(0.3, 32000, 9, 0.4);
    AudioClip a2 = a;
    for (auto& s : a2.samples) s *= 2.0f;
    const MelSpectrogram ma = log_mel(a, cfg), ma2 = log_mel(a2, cfg);
    for (size_t t = 0; t < ma.frames.size(); ++t)
        for (size_t j = 0; j < ma.frames[t].size(); ++j)
            if (ma.frames[t][j] > std::log(1e-5) + 1.0 && ma2.frames[t][j] > std::log(1e-5) + 1.0)
                CHECK(std::fabs(double(ma2.frames[t][j]) - double(ma.frames[t][j]) - std::log(2.0)) < 1e-3);

    AudioClip two_sec = noise(2.0, 32000, 10);
    CHECK(log_mel(two_sec, cfg).n_frames() == 201);
}

TEST_CASE("yin pitch tracking") {
    SpectroConfig cfg;
    const F0Track t440 = estimate_f0(sine(440.0, 1.0, 32000), 50.0, 1100.0, cfg);
    REQUIRE(t440.n_frames() == 101);
    for (int t = 5; t < t440.n_frames() - 5; ++t) {
        REQUIRE(t440.voiced[size_t(t)]);
        CHECK(std::fabs(t440.f0_hz[size_t(t)] - 440.0) <= 2.0);
    }

    AudioClip silence;
    silence.sample_rate = 32000;
    silence.samples.assign(16000, 0.0f);
    const F0Track ts = estimate_f0(silence, 50.0, 1100.0, cfg);
    for (int t = 0; t < ts.n_frames(); ++t) {
        CHECK(!ts.voiced[size_t(t)]);
        CHECK(ts.f0_hz[size_t(t)] == 0.0f);
    }

    const F0Track tn = estimate_f0(noise(1.0, 32000, 77), 50.0, 1100.0, cfg);
    int unvoiced = 0;
    for (int t = 0; t < tn.n_frames(); ++t) unvoiced += tn.voiced[size_t(t)] ? 0 : 1;
    CHECK(double(unvoiced) >= 0.9 * tn.n_frames());
}

TEST_CASE("f0_to_bins mapping") {
    F0Track track;
    track.f0_hz = {0.0f, 50.0f, 1100.0f, 234.52078f, 100.0f, 200.0f, 400.0f};
    track.voiced = {false, true, true, true, true, true, true};
    const auto bins = f0_to_bins(track, 256);
    CHECK(bins[0] == 0);
    CHECK(bins[1] == 1);
    CHECK(bins[2] == 255);
    CHECK(std::abs(bins[3] - 128) <= 1);
    // monotone in f0 for voiced frames
    CHECK(bins[4] < bins[5]);
    CHECK(bins[5] < bins[6]);
    CHECK_THROWS_AS(f0_to_bins(track, 1), ValidationError);
}

TEST_CASE("all analysis streams share one frame count") {
    SpectroConfig cfg;
    AudioClip clip = noise(0.73, 32000, 21);
    const MelSpectrogram mel = log_mel(clip, cfg);
    const F0Track f0 = estimate_f0(clip, 50.0, 1100.0, cfg);
    const ContentFeatures cf = synthetic_content(mel, 5, 16);
    const int t = cfg.frame_count(clip.samples.size());
    CHECK(mel.n_frames() == t);
    CHECK(f0.n_frames() == t);
    CHECK(cf.n_frames() == t);
}
