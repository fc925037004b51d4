#pragma once

#include <string>
#include <vector>

namespace svc {

// Mono waveform plus its rate; the unit every stage consumes and produces.
struct AudioClip {
    std::vector<float> samples;
    int sample_rate = 0;

    double duration_seconds() const {
        return sample_rate > 0 ? double(samples.size()) / sample_rate : 0.0;
    }
};

// RIFF/WAVE reader. Accepts PCM16 and IEEE float32, mono or stereo
// (stereo is averaged down to mono). Samples come back in [-1, 1].
AudioClip read_wav(const std::string& path);

// Writes mono 16-bit PCM. Samples are clamped to [-1, 1] and quantized
// round-half-away-from-zero.
void write_wav(const AudioClip& clip, const std::string& path);

// Windowed-sinc (Kaiser, 64 taps) resampler.
// Output length = round(N * target / source).
AudioClip resample(const AudioClip& clip, int target_rate);

}  // namespace svc
