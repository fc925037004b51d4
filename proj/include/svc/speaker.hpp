#pragma once

#include <string>
#include <vector>

#include "svc/autodiff.hpp"
#include "svc/dsp.hpp"
#include "svc/layers.hpp"
#include "svc/matio.hpp"

namespace svc {

// Unit-norm timbre vector.
struct SpeakerEmbedding {
    std::vector<float> v;
    int dim() const { return int(v.size()); }
};

float cosine_similarity(const SpeakerEmbedding& a, const SpeakerEmbedding& b);

// Small trainable speaker encoder: per-band temporal mean+std pooling
// (n_mels -> 2*n_mels), affine -> tanh -> affine, L2 normalize.
// frozen=true keeps the parameters out of optimizer updates.
struct SpeakerEncoder {
    LinearT<float> fc1, fc2;
    int n_mels = 80;
    int dim = 256;
    bool frozen = false;

    void init(uint64_t seed, int n_mels_ = 80, int dim_ = 256);

    // mel as (n_mels, T) node; returns unit-norm (dim, 1) node.
    NodeRef forward(Graph& g, NodeRef mel);

    // Convenience non-training entry point.
    SpeakerEmbedding encode(const MelSpectrogram& mel) const;

    void params(std::vector<Param*>& out);
    void save(Checkpoint& ckpt, const std::string& prefix = "spk.") const;
    void load(const Checkpoint& ckpt, const std::string& prefix = "spk.");
};

// The retrieval database: insertion-ordered (id, embedding) pairs.
struct EmbeddingStore {
    std::vector<std::pair<std::string, SpeakerEmbedding>> entries;

    void add(const std::string& id, SpeakerEmbedding e);
    size_t size() const { return entries.size(); }

    // Persisted as <name>.svcf (one embedding per row) + <name>.ids.
    void save(const std::string& base_path) const;
    static EmbeddingStore load(const std::string& base_path);
};

EmbeddingStore build_store(const std::vector<std::pair<std::string, AudioClip>>& items,
                           const SpeakerEncoder& enc, const SpectroConfig& cfg);

// k entries of highest cosine similarity, descending; ties keep insertion
// order; k > size returns everything.
std::vector<std::pair<std::string, float>> top_k(const EmbeddingStore& store,
                                                 const SpeakerEmbedding& query, int k);

// Mean of {query} + top-k matches, re-normalized to unit length.
SpeakerEmbedding retrieval_average(const SpeakerEmbedding& query, const EmbeddingStore& store, int k = 3);

}  // namespace svc
