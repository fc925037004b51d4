#pragma once

#include <optional>
#include <string>
#include <vector>

#include "svc/audio.hpp"
#include "svc/content.hpp"
#include "svc/losses.hpp"
#include "svc/model.hpp"
#include "svc/rng.hpp"
#include "svc/speaker.hpp"

namespace svc {

// How content features are produced and (optionally) compressed.
struct ContentSpec {
    enum class Provider { Synthetic, File };
    enum class Compression { None, KMeans, Rvq };

    Provider provider = Provider::Synthetic;
    std::string file_path;     // File provider: .svcf next to each clip, or explicit path
    uint64_t seed = 1234;
    int dim = 64;
    Compression compression = Compression::None;
    QuantMode mode = QuantMode::Tensor;
    int kmeans_k = 900;
    int rvq_stages = 4;
    int codes_per_stage = 256;
    int fit_iters = 25;
};

struct TrainConfig {
    uint64_t seed = 1;
    int steps = 500;
    int batch_size = 1;
    int segment_frames = 50;
    double learning_rate = 2e-4;
    double adam_beta1 = 0.8;
    double adam_beta2 = 0.99;
    double adam_eps = 1e-9;
    LossWeights weights;
    DisOrientation orientation = DisOrientation::Lsgan;
    bool freeze_speaker = false;
    int checkpoint_interval = 100;
    double f0_min = 50.0;
    double f0_max = 1100.0;
    ContentSpec content;
    SpectroConfig spectro;
    ModelConfig model;

    void validate() const;
};

struct AdamState {
    std::vector<Tensor> m, v;
    int64_t t = 0;
};

// One Adam update over params, in list order; non-trainable parameters are
// skipped (their moments stay zero).
void adam_step(std::vector<Param*>& params, AdamState& opt, double lr, double b1, double b2, double eps);

// Per-clip analysis cache; all streams share the clip's mel frame count.
struct DatasetItem {
    std::string id;
    AudioClip clip;
    MelSpectrogram mel;
    std::vector<int> pitch_bins;
    ContentFeatures content;               // Tensor mode (possibly quantized)
    std::vector<std::vector<int>> codes;   // Codes mode streams
};

struct TrainState {
    TrainConfig cfg;
    SvcModel model;
    SpeakerEncoder speaker;
    DiscriminatorBank disc;
    std::optional<KMeansCodebook> kmeans_cb;
    std::optional<ResidualCodebooks> rvq_cb;
    AdamState opt_g, opt_d;
    int64_t step = 0;
    Rng rng;

    void init(const TrainConfig& c);
    std::vector<Param*> generator_params();
    std::vector<Param*> discriminator_params();
};

// Raw content features for one clip (before compression).
ContentFeatures extract_content(const AudioClip& clip, const MelSpectrogram& mel, const ContentSpec& spec,
                                const std::string& clip_path = "");

// Fits compression codebooks (when configured) on the whole dataset's raw
// features, then builds the per-clip caches.
std::vector<DatasetItem> prepare_dataset(const std::vector<std::pair<std::string, AudioClip>>& clips,
                                         TrainState& state);

struct BatchItem {
    Tensor mel_seg;     // (n_mels, F)
    Tensor wave_seg;    // (hop * F,)
    Tensor spk_mel;     // (n_mels, T_full) speaker-source mel
    Tensor content_seg; // (D, F) Tensor mode
    std::vector<std::vector<int>> codes_seg;
    std::vector<int> pitch_seg;
};

std::vector<BatchItem> make_batch(const std::vector<DatasetItem>& dataset, const TrainConfig& cfg, Rng& rng);

// One discriminator step followed by one generator step.
LossBreakdown train_step(TrainState& state, const std::vector<BatchItem>& batch);

// Full loop; writes ckpt_<step>.svck, final.svck and train_log.csv under
// out_dir, returns the final checkpoint path.
std::string train(const std::vector<std::pair<std::string, AudioClip>>& clips, const TrainConfig& cfg,
                  const std::string& out_dir);

void save_checkpoint(const TrainState& state, const std::string& path);
TrainState load_checkpoint(const std::string& path);

}  // namespace svc
