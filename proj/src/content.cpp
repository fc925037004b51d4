#include "svc/content.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "svc/errors.hpp"
#include "svc/rng.hpp"

namespace svc {

namespace {

double sq_dist(const float* a, const float* b, int d) {
    double acc = 0.0;
    for (int i = 0; i < d; ++i) {
        const double diff = double(a[i]) - double(b[i]);
        acc += diff * diff;
    }
    return acc;
}

// Nearest centroid, ties broken by lowest index.
int nearest(const float* x, const MatF& centroids) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int j = 0; j < centroids.rows; ++j) {
        const double d = sq_dist(x, &centroids.data[size_t(j) * size_t(centroids.cols)], centroids.cols);
        if (d < best_d) {
            best_d = d;
            best = j;
        }
    }
    return best;
}

}  // namespace

ContentFeatures load_features(const std::string& path) {
    ContentFeatures f;
    f.frames = load_svcf(path);
    return f;
}

void save_features(const ContentFeatures& f, const std::string& path) {
    save_svcf(f.frames, path);
}

ContentFeatures synthetic_content(const MelSpectrogram& mel, uint64_t seed, int dim) {
    if (dim < 1) throw ValidationError("synthetic_content: dim must be >= 1");
    const int t_frames = mel.n_frames();
    const int n_mels = mel.config.n_mels;

    // Seeded projection matrix with Gram-Schmidt-orthonormalized columns.
    Rng rng(seed);
    std::vector<std::vector<double>> cols(size_t(dim), std::vector<double>(size_t(n_mels), 0.0));
    for (auto& col : cols)
        for (auto& v : col) v = rng.gaussian();
    for (int j = 0; j < dim; ++j) {
        for (int i = 0; i < std::min(j, n_mels); ++i) {
            double dot = 0.0;
            for (int r = 0; r < n_mels; ++r) dot += cols[size_t(j)][size_t(r)] * cols[size_t(i)][size_t(r)];
            for (int r = 0; r < n_mels; ++r) cols[size_t(j)][size_t(r)] -= dot * cols[size_t(i)][size_t(r)];
        }
        double norm = 0.0;
        for (double v : cols[size_t(j)]) norm += v * v;
        norm = std::sqrt(std::max(norm, 1e-30));
        for (auto& v : cols[size_t(j)]) v /= norm;
    }

    ContentFeatures out;
    out.frames = MatF(t_frames, dim);
    for (int t = 0; t < t_frames; ++t)
        for (int j = 0; j < dim; ++j) {
            double acc = 0.0;
            for (int r = 0; r < n_mels; ++r) acc += cols[size_t(j)][size_t(r)] * mel.frames[size_t(t)][size_t(r)];
            out.frames.at(t, j) = float(acc);
        }

    // Per-dimension standardization over the clip.
    for (int j = 0; j < dim; ++j) {
        double mean = 0.0;
        for (int t = 0; t < t_frames; ++t) mean += out.frames.at(t, j);
        mean /= std::max(t_frames, 1);
        double var = 0.0;
        for (int t = 0; t < t_frames; ++t) {
            const double d = out.frames.at(t, j) - mean;
            var += d * d;
        }
        var /= std::max(t_frames, 1);
        const double inv = 1.0 / std::sqrt(std::max(var, 1e-12));
        for (int t = 0; t < t_frames; ++t)
            out.frames.at(t, j) = float((out.frames.at(t, j) - mean) * inv);
    }
    return out;
}

ContentFeatures concat_features(const ContentFeatures& a, const ContentFeatures& b) {
    const int t = std::min(a.n_frames(), b.n_frames());
    ContentFeatures out;
    out.frames = MatF(t, a.dim() + b.dim());
    for (int i = 0; i < t; ++i) {
        for (int j = 0; j < a.dim(); ++j) out.frames.at(i, j) = a.frames.at(i, j);
        for (int j = 0; j < b.dim(); ++j) out.frames.at(i, a.dim() + j) = b.frames.at(i, j);
    }
    return out;
}

KMeansCodebook kmeans_fit(const MatF& data, int k, int iters, uint64_t seed,
                          std::vector<double>* inertia_trace) {
    const int n = data.rows, d = data.cols;
    if (k < 1) throw ValidationError("kmeans_fit: k must be >= 1");
    if (n < k) throw ValidationError("kmeans_fit: need at least k points (" + std::to_string(n) +
                                     " < " + std::to_string(k) + ")");

    Rng rng(seed);
    KMeansCodebook cb;
    cb.centroids = MatF(k, d);

    // k-means++ seeding
    std::vector<double> min_d(size_t(n), std::numeric_limits<double>::infinity());
    int first = int(rng.uniform_int(uint64_t(n)));
    for (int j = 0; j < d; ++j) cb.centroids.at(0, j) = data.at(first, j);
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            const double dd = sq_dist(&data.data[size_t(i) * size_t(d)],
                                      &cb.centroids.data[size_t(c - 1) * size_t(d)], d);
            min_d[size_t(i)] = std::min(min_d[size_t(i)], dd);
            total += min_d[size_t(i)];
        }
        int pick = 0;
        if (total > 0.0) {
            double r = rng.uniform() * total, acc = 0.0;
            for (int i = 0; i < n; ++i) {
                acc += min_d[size_t(i)];
                if (acc >= r) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = int(rng.uniform_int(uint64_t(n)));
        }
        for (int j = 0; j < d; ++j) cb.centroids.at(c, j) = data.at(pick, j);
    }

    std::vector<int> assign(size_t(n), -1);
    std::vector<double> sums(size_t(k) * size_t(d));
    std::vector<int> counts(size_t(k), 0);
    for (int it = 0; it < iters; ++it) {
        bool changed = false;
        double inertia = 0.0;
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (int i = 0; i < n; ++i) {
            const float* x = &data.data[size_t(i) * size_t(d)];
            const int a = nearest(x, cb.centroids);
            inertia += sq_dist(x, &cb.centroids.data[size_t(a) * size_t(d)], d);
            if (a != assign[size_t(i)]) changed = true;
            assign[size_t(i)] = a;
            counts[size_t(a)]++;
            for (int j = 0; j < d; ++j) sums[size_t(a) * size_t(d) + size_t(j)] += x[j];
        }
        if (inertia_trace) inertia_trace->push_back(inertia);
        cb.final_inertia = inertia;
        cb.iterations_run = it + 1;
        if (!changed && it > 0) break;
        for (int c = 0; c < k; ++c) {
            if (counts[size_t(c)] > 0) {
                for (int j = 0; j < d; ++j)
                    cb.centroids.at(c, j) = float(sums[size_t(c) * size_t(d) + size_t(j)] / counts[size_t(c)]);
            } else {
                // re-seed empty cluster to the point farthest from its centroid
                int far_i = 0;
                double far_d = -1.0;
                for (int i = 0; i < n; ++i) {
                    const double dd = sq_dist(&data.data[size_t(i) * size_t(d)],
                                              &cb.centroids.data[size_t(assign[size_t(i)]) * size_t(d)], d);
                    if (dd > far_d) {
                        far_d = dd;
                        far_i = i;
                    }
                }
                for (int j = 0; j < d; ++j) cb.centroids.at(c, j) = data.at(far_i, j);
            }
        }
    }
    return cb;
}

ContentFeatures kmeans_quantize_tensor(const ContentFeatures& f, const KMeansCodebook& cb) {
    if (f.dim() != cb.dim())
        throw ValidationError("kmeans_quantize: feature dim " + std::to_string(f.dim()) +
                              " != codebook dim " + std::to_string(cb.dim()));
    ContentFeatures out;
    out.frames = MatF(f.n_frames(), f.dim());
    for (int t = 0; t < f.n_frames(); ++t) {
        const int j = nearest(&f.frames.data[size_t(t) * size_t(f.dim())], cb.centroids);
        for (int c = 0; c < f.dim(); ++c) out.frames.at(t, c) = cb.centroids.at(j, c);
    }
    return out;
}

std::vector<int> kmeans_quantize_codes(const ContentFeatures& f, const KMeansCodebook& cb) {
    if (f.dim() != cb.dim())
        throw ValidationError("kmeans_quantize: feature dim " + std::to_string(f.dim()) +
                              " != codebook dim " + std::to_string(cb.dim()));
    std::vector<int> codes(size_t(f.n_frames()));
    for (int t = 0; t < f.n_frames(); ++t)
        codes[size_t(t)] = nearest(&f.frames.data[size_t(t) * size_t(f.dim())], cb.centroids);
    return codes;
}

ResidualCodebooks rvq_fit(const MatF& data, int stages, int codes_per_stage, int iters, uint64_t seed,
                          std::vector<double>* residual_energy_trace) {
    if (stages < 1) throw ValidationError("rvq_fit: stages must be >= 1");
    ResidualCodebooks rvq;
    MatF residual = data;
    for (int s = 0; s < stages; ++s) {
        KMeansCodebook cb = kmeans_fit(residual, codes_per_stage, iters, seed + uint64_t(s));
        // subtract the selected codewords to form the next residual
        double energy = 0.0;
        for (int i = 0; i < residual.rows; ++i) {
            const int j = nearest(&residual.data[size_t(i) * size_t(residual.cols)], cb.centroids);
            for (int c = 0; c < residual.cols; ++c) {
                residual.at(i, c) -= cb.centroids.at(j, c);
                energy += double(residual.at(i, c)) * double(residual.at(i, c));
            }
        }
        if (residual_energy_trace) residual_energy_trace->push_back(energy / std::max(residual.rows, 1));
        rvq.stages.push_back(std::move(cb));
    }
    return rvq;
}

ContentFeatures rvq_encode_tensor(const ContentFeatures& f, const ResidualCodebooks& rvq) {
    if (f.dim() != rvq.dim())
        throw ValidationError("rvq_encode: feature dim " + std::to_string(f.dim()) +
                              " != codebook dim " + std::to_string(rvq.dim()));
    ContentFeatures out;
    out.frames = MatF(f.n_frames(), f.dim());
    std::vector<float> residual(size_t(f.dim()));
    for (int t = 0; t < f.n_frames(); ++t) {
        for (int c = 0; c < f.dim(); ++c) residual[size_t(c)] = f.frames.at(t, c);
        for (const auto& cb : rvq.stages) {
            const int j = nearest(residual.data(), cb.centroids);
            for (int c = 0; c < f.dim(); ++c) {
                out.frames.at(t, c) += cb.centroids.at(j, c);
                residual[size_t(c)] -= cb.centroids.at(j, c);
            }
        }
    }
    return out;
}

std::vector<std::vector<int>> rvq_encode_codes(const ContentFeatures& f, const ResidualCodebooks& rvq) {
    if (f.dim() != rvq.dim())
        throw ValidationError("rvq_encode: feature dim " + std::to_string(f.dim()) +
                              " != codebook dim " + std::to_string(rvq.dim()));
    std::vector<std::vector<int>> codes(size_t(rvq.n_stages()), std::vector<int>(size_t(f.n_frames())));
    std::vector<float> residual(size_t(f.dim()));
    for (int t = 0; t < f.n_frames(); ++t) {
        for (int c = 0; c < f.dim(); ++c) residual[size_t(c)] = f.frames.at(t, c);
        for (int s = 0; s < rvq.n_stages(); ++s) {
            const auto& cb = rvq.stages[size_t(s)];
            const int j = nearest(residual.data(), cb.centroids);
            codes[size_t(s)][size_t(t)] = j;
            for (int c = 0; c < f.dim(); ++c) residual[size_t(c)] -= cb.centroids.at(j, c);
        }
    }
    return codes;
}

}  // namespace svc
