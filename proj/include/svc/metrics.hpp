#pragma once

#include <string>

#include "svc/audio.hpp"
#include "svc/dsp.hpp"
#include "svc/speaker.hpp"

namespace svc {

struct MetricReport {
    double secs_vs_reference = 0.0;
    double secs_vs_source = 0.0;
    double stoi_vs_source = 0.0;
    double mel_l1_vs_source = 0.0;
};

// Cosine similarity of held-out-encoder speaker embeddings.
double secs(const AudioClip& a, const AudioClip& b, const SpeakerEncoder& eval_encoder,
            const SpectroConfig& cfg);

// Short-time objective intelligibility: both clips resampled to 10 kHz,
// 15 one-third-octave bands (first center 150 Hz) over 512/256 Hann frames,
// 30-frame segments, per-segment energy normalization, -15 dB clipping of the
// degraded envelope, mean of per-band per-segment correlations.
double stoi(const AudioClip& clean, const AudioClip& degraded);

// Mean absolute log-mel difference.
double mel_l1(const AudioClip& a, const AudioClip& b, const SpectroConfig& cfg);

MetricReport evaluate(const AudioClip& converted, const AudioClip& source, const AudioClip& reference,
                      const SpeakerEncoder& eval_encoder, const SpectroConfig& cfg);

// key=value lines, one per field.
std::string format_report(const MetricReport& r);

}  // namespace svc
