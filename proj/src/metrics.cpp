#include "svc/metrics.hpp"

#include <cmath>
#include <sstream>

#include "svc/errors.hpp"

namespace svc {

double secs(const AudioClip& a, const AudioClip& b, const SpeakerEncoder& eval_encoder,
            const SpectroConfig& cfg) {
    if (a.samples.empty() || b.samples.empty()) throw ValidationError("secs: empty clip");
    const SpeakerEmbedding ea = eval_encoder.encode(log_mel(a, cfg));
    const SpeakerEmbedding eb = eval_encoder.encode(log_mel(b, cfg));
    return cosine_similarity(ea, eb);
}

namespace {

constexpr int kStoiRate = 10000;
constexpr int kStoiFft = 512;
constexpr int kStoiHop = 256;
constexpr int kStoiBands = 15;
constexpr int kStoiSegment = 30;
constexpr double kStoiClipDb = -15.0;

// Band envelopes: one-third-octave magnitudes per frame, (T, kStoiBands).
std::vector<std::vector<double>> band_envelopes(const AudioClip& clip) {
    SpectroConfig cfg;
    cfg.sample_rate = kStoiRate;
    cfg.n_fft = kStoiFft;
    cfg.hop = kStoiHop;
    cfg.win_length = kStoiFft;
    const auto frames = stft(clip, cfg);

    const double bin_hz = double(kStoiRate) / kStoiFft;
    std::vector<std::vector<double>> env(frames.size(), std::vector<double>(kStoiBands, 0.0));
    for (int j = 0; j < kStoiBands; ++j) {
        const double center = 150.0 * std::pow(2.0, j / 3.0);
        const double lo = center / std::pow(2.0, 1.0 / 6.0);
        const double hi = center * std::pow(2.0, 1.0 / 6.0);
        const int k_lo = int(std::ceil(lo / bin_hz));
        const int k_hi = std::min(int(std::floor(hi / bin_hz)), kStoiFft / 2);
        for (size_t t = 0; t < frames.size(); ++t) {
            double e = 0.0;
            for (int k = k_lo; k <= k_hi; ++k) e += std::norm(frames[t][size_t(k)]);
            env[t][size_t(j)] = std::sqrt(e);
        }
    }
    return env;
}

double segment_correlation(const std::vector<double>& x, const std::vector<double>& y_raw) {
    double nx = 0.0, ny = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        nx += x[i] * x[i];
        ny += y_raw[i] * y_raw[i];
    }
    const double alpha = ny > 0.0 ? std::sqrt(nx / ny) : 1.0;
    const double clip_gain = 1.0 + std::pow(10.0, kStoiClipDb / 20.0);
    std::vector<double> y(x.size());
    for (size_t i = 0; i < x.size(); ++i) y[i] = std::min(alpha * y_raw[i], clip_gain * x[i]);

    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= double(x.size());
    my /= double(x.size());
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    const double denom = std::sqrt(sxx * syy);
    if (denom < 1e-20) return (sxx < 1e-20 && syy < 1e-20) ? 1.0 : 0.0;
    return sxy / denom;
}

}  // namespace

double stoi(const AudioClip& clean, const AudioClip& degraded) {
    if (clean.samples.empty() || degraded.samples.empty()) throw ValidationError("stoi: empty clip");
    AudioClip x = clean.sample_rate == kStoiRate ? clean : resample(clean, kStoiRate);
    AudioClip y = degraded.sample_rate == kStoiRate ? degraded : resample(degraded, kStoiRate);
    if (std::llabs(int64_t(x.samples.size()) - int64_t(y.samples.size())) > kStoiFft)
        throw ValidationError("stoi: clip durations differ by more than one frame");
    const size_t n = std::min(x.samples.size(), y.samples.size());
    x.samples.resize(n);
    y.samples.resize(n);

    double energy = 0.0;
    for (float s : x.samples) energy += double(s) * double(s);
    if (energy == 0.0) throw ValidationError("stoi: silent clean clip");

    const auto ex = band_envelopes(x);
    const auto ey = band_envelopes(y);
    const int t = int(ex.size());
    if (t < kStoiSegment)
        throw ValidationError("stoi: clip shorter than one segment (" + std::to_string(t) + " frames < " +
                              std::to_string(kStoiSegment) + ")");

    double acc = 0.0;
    int count = 0;
    std::vector<double> seg_x(kStoiSegment), seg_y(kStoiSegment);
    for (int m = kStoiSegment - 1; m < t; ++m) {
        for (int j = 0; j < kStoiBands; ++j) {
            for (int i = 0; i < kStoiSegment; ++i) {
                seg_x[size_t(i)] = ex[size_t(m - kStoiSegment + 1 + i)][size_t(j)];
                seg_y[size_t(i)] = ey[size_t(m - kStoiSegment + 1 + i)][size_t(j)];
            }
            acc += segment_correlation(seg_x, seg_y);
            ++count;
        }
    }
    return acc / double(count);
}

double mel_l1(const AudioClip& a, const AudioClip& b, const SpectroConfig& cfg) {
    const MelSpectrogram ma = log_mel(a, cfg);
    const MelSpectrogram mb = log_mel(b, cfg);
    if (ma.n_frames() != mb.n_frames())
        throw ValidationError("mel_l1: frame count mismatch (" + std::to_string(ma.n_frames()) + " vs " +
                              std::to_string(mb.n_frames()) + ")");
    double acc = 0.0;
    for (int t = 0; t < ma.n_frames(); ++t)
        for (int j = 0; j < cfg.n_mels; ++j)
            acc += std::fabs(double(ma.frames[size_t(t)][size_t(j)]) - double(mb.frames[size_t(t)][size_t(j)]));
    return acc / (double(ma.n_frames()) * cfg.n_mels);
}

MetricReport evaluate(const AudioClip& converted, const AudioClip& source, const AudioClip& reference,
                      const SpeakerEncoder& eval_encoder, const SpectroConfig& cfg) {
    MetricReport r;
    r.secs_vs_reference = secs(converted, reference, eval_encoder, cfg);
    r.secs_vs_source = secs(converted, source, eval_encoder, cfg);
    r.stoi_vs_source = stoi(source, converted);
    // Conversion may run up to one hop long; align before the frame-exact metric.
    const size_t n = std::min(source.samples.size(), converted.samples.size());
    AudioClip src_cut = source, conv_cut = converted;
    src_cut.samples.resize(n);
    conv_cut.samples.resize(n);
    r.mel_l1_vs_source = mel_l1(src_cut, conv_cut, cfg);
    return r;
}

std::string format_report(const MetricReport& r) {
    std::ostringstream os;
    os << "secs_vs_reference=" << r.secs_vs_reference << "\n"
       << "secs_vs_source=" << r.secs_vs_source << "\n"
       << "stoi_vs_source=" << r.stoi_vs_source << "\n"
       << "mel_l1_vs_source=" << r.mel_l1_vs_source << "\n";
    return os.str();
}

}  // namespace svc
