#pragma once

#include <string>
#include <vector>

#include "svc/dsp.hpp"
#include "svc/matio.hpp"

namespace svc {

// Frame-level content stream, one row per analysis frame.
struct ContentFeatures {
    MatF frames;  // T x D
    int n_frames() const { return frames.rows; }
    int dim() const { return frames.cols; }
};

enum class QuantMode { Tensor, Codes };

struct KMeansCodebook {
    MatF centroids;  // k x D
    int iterations_run = 0;
    double final_inertia = 0.0;
    int k() const { return centroids.rows; }
    int dim() const { return centroids.cols; }
};

struct ResidualCodebooks {
    std::vector<KMeansCodebook> stages;  // all share D
    int n_stages() const { return int(stages.size()); }
    int dim() const { return stages.empty() ? 0 : stages.front().dim(); }
};

ContentFeatures load_features(const std::string& path);
void save_features(const ContentFeatures& f, const std::string& path);

// Desk-scale stand-in for pretrained content extractors: a seeded random
// linear projection of each mel frame (orthonormalized columns), then
// per-dimension standardization over the clip.
ContentFeatures synthetic_content(const MelSpectrogram& mel, uint64_t seed, int dim);

// Truncate both to min(T_a, T_b) frames, concatenate feature dims.
ContentFeatures concat_features(const ContentFeatures& a, const ContentFeatures& b);

// k-means++ init + Lloyd iterations; empty clusters re-seeded to the point
// farthest from its centroid. Deterministic given (data, seed, iters).
// inertia_trace, when non-null, receives the inertia after every iteration.
KMeansCodebook kmeans_fit(const MatF& data, int k, int iters, uint64_t seed,
                          std::vector<double>* inertia_trace = nullptr);

// Nearest centroid per frame (Euclidean, ties to the lowest index).
ContentFeatures kmeans_quantize_tensor(const ContentFeatures& f, const KMeansCodebook& cb);
std::vector<int> kmeans_quantize_codes(const ContentFeatures& f, const KMeansCodebook& cb);

// Stage s is a k-means fit on the residual left by stages 1..s-1.
// residual_energy_trace, when non-null, receives mean ||residual||^2 after each stage.
ResidualCodebooks rvq_fit(const MatF& data, int stages, int codes_per_stage, int iters, uint64_t seed,
                          std::vector<double>* residual_energy_trace = nullptr);

// Greedy stage-wise nearest codeword on the running residual.
ContentFeatures rvq_encode_tensor(const ContentFeatures& f, const ResidualCodebooks& rvq);
std::vector<std::vector<int>> rvq_encode_codes(const ContentFeatures& f, const ResidualCodebooks& rvq);

}  // namespace svc
