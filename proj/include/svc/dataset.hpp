#pragma once

#include <string>
#include <utility>
#include <vector>

#include "svc/audio.hpp"

namespace svc {

// Bundled synthetic vocal-like dataset: each speaker gets a base pitch and a
// fixed two-formant spectral envelope; each clip is a short note sequence with
// vibrato and a little breath noise. Fully determined by the seed.
struct SynthSpec {
    int n_speakers = 2;
    int clips_per_speaker = 2;
    double duration_sec = 1.2;
    int sample_rate = 32000;
    uint64_t seed = 7;
};

AudioClip synth_clip(const SynthSpec& spec, int speaker, int clip);

// ids are "spk<i>_clip<j>"
std::vector<std::pair<std::string, AudioClip>> synth_dataset(const SynthSpec& spec);

}  // namespace svc
