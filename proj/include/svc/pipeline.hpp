#pragma once

#include "svc/training.hpp"

namespace svc {

struct ConvertOptions {
    bool retrieval = false;
    int k = 3;
    float temperature = 0.8f;
    double transpose_semitones = 0.0;
    uint64_t seed = 0;
    std::string source_content_path;  // File provider override for the source clip
};

// Content + transposed pitch from the source, timbre from the reference
// (retrieval-averaged against the store when opts.retrieval). Output holds
// hop * T(source) samples at the model sample rate.
AudioClip convert(const AudioClip& source, const AudioClip& reference, TrainState& state,
                  const ConvertOptions& opts = {}, const EmbeddingStore* store = nullptr);

}  // namespace svc
