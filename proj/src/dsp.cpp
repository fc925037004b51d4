#include "svc/dsp.hpp"

#include <algorithm>
#include <cmath>

#include "svc/errors.hpp"
#include "svc/fft.hpp"

namespace svc {

void SpectroConfig::validate() const {
    if (sample_rate <= 0) throw ValidationError("sample_rate must be positive");
    if (n_fft <= 0 || (n_fft & (n_fft - 1)) != 0)
        throw ValidationError("n_fft must be a positive power of two");
    if (hop <= 0) throw ValidationError("hop must be positive");
    if (win_length < 1 || win_length > n_fft)
        throw ValidationError("win_length must be in [1, n_fft]");
    if (n_mels < 1) throw ValidationError("n_mels must be >= 1");
    if (!(fmin < fmax_effective()) || fmax_effective() > sample_rate / 2.0)
        throw ValidationError("need fmin < fmax <= sample_rate/2");
}

std::vector<double> hann_window(int n) {
    if (n < 1) throw ValidationError("hann_window: n must be >= 1");
    std::vector<double> w(size_t(n), 0.0);
    for (int i = 0; i < n; ++i) w[size_t(i)] = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / n));
    return w;
}

namespace {

// Reflect (no edge repeat): [..., x2, x1, | x0, x1, ..., x_{N-1} | x_{N-2}, ...]
int reflect_index(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
}

}  // namespace

std::vector<std::vector<std::complex<double>>> stft(const AudioClip& clip, const SpectroConfig& cfg) {
    cfg.validate();
    if (clip.samples.empty()) throw ValidationError("stft: empty clip");
    if (clip.sample_rate != cfg.sample_rate)
        throw ValidationError("stft: clip rate " + std::to_string(clip.sample_rate) +
                              " != config rate " + std::to_string(cfg.sample_rate));

    const int n = int(clip.samples.size());
    const int t_frames = cfg.frame_count(clip.samples.size());
    const int pad = cfg.n_fft / 2;
    const auto win = hann_window(cfg.win_length);
    const int win_off = (cfg.n_fft - cfg.win_length) / 2;
    const int k_bins = cfg.n_fft / 2 + 1;

    std::vector<std::vector<std::complex<double>>> out(static_cast<size_t>(t_frames));
    std::vector<std::complex<double>> buf(size_t(cfg.n_fft));
    for (int t = 0; t < t_frames; ++t) {
        std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
        const int start = t * cfg.hop - pad;
        for (int i = 0; i < cfg.win_length; ++i) {
            const int src = reflect_index(start + win_off + i, n);
            buf[size_t(win_off + i)] = clip.samples[size_t(src)] * win[size_t(i)];
        }
        fft_pow2(buf, false);
        out[size_t(t)].assign(buf.begin(), buf.begin() + k_bins);
    }
    return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<std::vector<double>> mel_filterbank(const SpectroConfig& cfg) {
    cfg.validate();
    const int k_bins = cfg.n_fft / 2 + 1;
    const double mel_lo = hz_to_mel(cfg.fmin);
    const double mel_hi = hz_to_mel(cfg.fmax_effective());

    std::vector<double> edges(size_t(cfg.n_mels) + 2);
    for (int i = 0; i < cfg.n_mels + 2; ++i)
        edges[size_t(i)] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (cfg.n_mels + 1));

    std::vector<std::vector<double>> fb(size_t(cfg.n_mels), std::vector<double>(size_t(k_bins), 0.0));
    for (int m = 0; m < cfg.n_mels; ++m) {
        const double f_lo = edges[size_t(m)];
        const double f_c = edges[size_t(m) + 1];
        const double f_hi = edges[size_t(m) + 2];
        for (int k = 0; k < k_bins; ++k) {
            const double f = double(k) * cfg.sample_rate / cfg.n_fft;
            double v = 0.0;
            if (f > f_lo && f < f_c)
                v = (f - f_lo) / (f_c - f_lo);
            else if (f >= f_c && f < f_hi)
                v = (f_hi - f) / (f_hi - f_c);
            fb[size_t(m)][size_t(k)] = std::max(v, 0.0);
        }
    }
    return fb;
}

MelSpectrogram log_mel(const AudioClip& clip, const SpectroConfig& cfg) {
    const auto spec = stft(clip, cfg);
    const auto fb = mel_filterbank(cfg);
    const int k_bins = cfg.n_fft / 2 + 1;

    MelSpectrogram mel;
    mel.config = cfg;
    mel.frames.resize(spec.size(), std::vector<float>(size_t(cfg.n_mels)));
    std::vector<double> mag(size_t(k_bins), 0.0);
    for (size_t t = 0; t < spec.size(); ++t) {
        for (int k = 0; k < k_bins; ++k) mag[size_t(k)] = std::abs(spec[t][size_t(k)]);
        for (int m = 0; m < cfg.n_mels; ++m) {
            double acc = 0.0;
            const auto& row = fb[size_t(m)];
            for (int k = 0; k < k_bins; ++k) acc += row[size_t(k)] * mag[size_t(k)];
            mel.frames[t][size_t(m)] = float(std::log(std::max(acc, kLogMelFloor)));
        }
    }
    return mel;
}

F0Track estimate_f0(const AudioClip& clip, double f0_min, double f0_max, const SpectroConfig& cfg) {
    cfg.validate();
    if (!(f0_min < f0_max) || f0_max >= cfg.sample_rate / 2.0)
        throw ValidationError("estimate_f0: need f0_min < f0_max < sample_rate/2");
    if (clip.samples.empty()) throw ValidationError("estimate_f0: empty clip");
    if (clip.sample_rate != cfg.sample_rate)
        throw ValidationError("estimate_f0: clip rate does not match config");

    const int n = int(clip.samples.size());
    const int t_frames = cfg.frame_count(clip.samples.size());
    const int tau_max = int(std::ceil(cfg.sample_rate / f0_min));
    const int tau_min = std::max(2, int(std::floor(cfg.sample_rate / f0_max)));
    const int w = std::max(1024, 2 * tau_max);  // analysis window; lags go up to w/2
    const int half = w / 2;
    const double threshold = 0.1;

    F0Track track;
    track.f0_hz.assign(size_t(t_frames), 0.0f);
    track.voiced.assign(size_t(t_frames), false);

    std::vector<double> frame(size_t(w), 0.0);
    std::vector<double> diff(size_t(half + 1));
    std::vector<double> cmnd(size_t(half + 1));

    for (int t = 0; t < t_frames; ++t) {
        const int start = t * cfg.hop - half;
        for (int i = 0; i < w; ++i)
            frame[size_t(i)] = clip.samples[size_t(reflect_index(start + i, n))];

        diff[0] = 0.0;
        for (int tau = 1; tau <= half && tau <= tau_max; ++tau) {
            double acc = 0.0;
            for (int j = 0; j < half; ++j) {
                const double d = frame[size_t(j)] - frame[size_t(j + tau)];
                acc += d * d;
            }
            diff[size_t(tau)] = acc;
        }

        cmnd[0] = 1.0;
        double running = 0.0;
        const int lag_hi = std::min(half, tau_max);
        for (int tau = 1; tau <= lag_hi; ++tau) {
            running += diff[size_t(tau)];
            cmnd[size_t(tau)] = running > 0.0 ? diff[size_t(tau)] * tau / running : 1.0;
        }

        int best = -1;
        for (int tau = tau_min; tau <= lag_hi; ++tau) {
            if (cmnd[size_t(tau)] < threshold) {
                // slide to the local minimum of this dip
                while (tau + 1 <= lag_hi && cmnd[size_t(tau + 1)] < cmnd[size_t(tau)]) ++tau;
                best = tau;
                break;
            }
        }
        if (best < 0) continue;

        double tau_ref = double(best);
        if (best > tau_min && best < lag_hi) {
            const double a = cmnd[size_t(best) - 1], b = cmnd[size_t(best)], c = cmnd[size_t(best) + 1];
            const double denom = a - 2.0 * b + c;
            if (std::abs(denom) > 1e-12) tau_ref += 0.5 * (a - c) / denom;
        }
        const double f0 = std::clamp(cfg.sample_rate / tau_ref, f0_min, f0_max);
        track.f0_hz[size_t(t)] = float(f0);
        track.voiced[size_t(t)] = true;
    }
    return track;
}

std::vector<int> f0_to_bins(const F0Track& track, int n_bins) {
    if (n_bins < 2) throw ValidationError("f0_to_bins: n_bins must be >= 2");
    const double lo = std::log(50.0), hi = std::log(1100.0);
    std::vector<int> codes(track.f0_hz.size(), 0);
    for (size_t t = 0; t < track.f0_hz.size(); ++t) {
        if (!track.voiced[t]) continue;
        const double f = std::max(double(track.f0_hz[t]), 1e-6);
        const double u = (std::log(f) - lo) / (hi - lo);
        int code = 1 + int(std::lround(std::clamp(u, 0.0, 1.0) * (n_bins - 2)));
        codes[t] = std::clamp(code, 1, n_bins - 1);
    }
    return codes;
}

}  // namespace svc
