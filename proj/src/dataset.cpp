#include "svc/dataset.hpp"

#include <cmath>

#include "svc/errors.hpp"
#include "svc/rng.hpp"

namespace svc {

namespace {

struct SpeakerVoice {
    double base_f0;
    double formant1, formant2;  // Hz centers of two spectral bumps
    double tilt;                // per-harmonic rolloff
};

SpeakerVoice make_voice(uint64_t seed, int speaker) {
    Rng rng(seed * 1000003ULL + uint64_t(speaker));
    SpeakerVoice v;
    v.base_f0 = rng.uniform(130.0, 300.0);
    v.formant1 = rng.uniform(450.0, 900.0);
    v.formant2 = rng.uniform(1400.0, 2600.0);
    v.tilt = rng.uniform(0.6, 1.1);
    return v;
}

double envelope_gain(const SpeakerVoice& v, double freq) {
    auto bump = [](double f, double center, double width) {
        const double d = (f - center) / width;
        return std::exp(-0.5 * d * d);
    };
    return 0.25 + bump(freq, v.formant1, 220.0) + 0.6 * bump(freq, v.formant2, 420.0);
}

}  // namespace

AudioClip synth_clip(const SynthSpec& spec, int speaker, int clip) {
    if (speaker < 0 || speaker >= spec.n_speakers || clip < 0 || clip >= spec.clips_per_speaker)
        throw ValidationError("synth_clip: speaker/clip index out of range");
    const SpeakerVoice voice = make_voice(spec.seed, speaker);
    Rng rng(spec.seed * 2654435761ULL + uint64_t(speaker) * 97ULL + uint64_t(clip));

    const int sr = spec.sample_rate;
    const int n = int(spec.duration_sec * sr);
    const int n_notes = 4;
    static const double ratios[] = {1.0, 9.0 / 8.0, 5.0 / 4.0, 4.0 / 3.0, 3.0 / 2.0};
    std::vector<double> note_f0(size_t(n_notes), 0.0);
    for (auto& f : note_f0) f = voice.base_f0 * ratios[rng.uniform_int(5)];
    const double vib_rate = rng.uniform(4.5, 6.5);
    const double vib_depth = rng.uniform(0.008, 0.02);
    const double noise_amp = rng.uniform(0.002, 0.006);

    AudioClip out;
    out.sample_rate = sr;
    out.samples.resize(size_t(n));
    double phase = 0.0;
    const int note_len = n / n_notes;
    double peak = 0.0;
    for (int i = 0; i < n; ++i) {
        const int note = std::min(i / note_len, n_notes - 1);
        const double t = double(i) / sr;
        const double f0 = note_f0[size_t(note)] * (1.0 + vib_depth * std::sin(2.0 * M_PI * vib_rate * t));
        phase += 2.0 * M_PI * f0 / sr;
        // soft attack/release inside each note
        const double pos = double(i - note * note_len) / note_len;
        const double env = std::sin(M_PI * std::min(std::max(pos, 0.0), 1.0));
        double s = 0.0;
        const int n_harm = std::min(12, int(0.45 * sr / f0));
        for (int h = 1; h <= n_harm; ++h) {
            const double amp = envelope_gain(voice, h * f0) / std::pow(double(h), voice.tilt);
            s += amp * std::sin(h * phase);
        }
        s = env * s + noise_amp * rng.gaussian();
        out.samples[size_t(i)] = float(s);
        peak = std::max(peak, std::fabs(s));
    }
    if (peak > 0.0) {
        const float g = float(0.5 / peak);
        for (auto& s : out.samples) s *= g;
    }
    return out;
}

std::vector<std::pair<std::string, AudioClip>> synth_dataset(const SynthSpec& spec) {
    if (spec.n_speakers < 1 || spec.clips_per_speaker < 1)
        throw ValidationError("synth_dataset: need at least one speaker and one clip");
    std::vector<std::pair<std::string, AudioClip>> out;
    for (int s = 0; s < spec.n_speakers; ++s)
        for (int c = 0; c < spec.clips_per_speaker; ++c)
            out.emplace_back("spk" + std::to_string(s) + "_clip" + std::to_string(c),
                             synth_clip(spec, s, c));
    return out;
}

}  // namespace svc
