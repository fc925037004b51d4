#include "svc/pipeline.hpp"

#include <cmath>

#include "svc/errors.hpp"

namespace svc {

AudioClip convert(const AudioClip& source, const AudioClip& reference, TrainState& state,
                  const ConvertOptions& opts, const EmbeddingStore* store) {
    if (source.samples.empty() || reference.samples.empty())
        throw ValidationError("convert: empty input clip");
    const TrainConfig& cfg = state.cfg;
    const int sr = cfg.spectro.sample_rate;
    if (source.sample_rate != sr || reference.sample_rate != sr)
        throw ValidationError("convert: clips must be at the model sample rate (" + std::to_string(sr) +
                              " Hz)");
    if (opts.retrieval && store == nullptr)
        throw ValidationError("convert: retrieval requested without an embedding store");

    // Timbre from the reference.
    const MelSpectrogram ref_mel = log_mel(reference, cfg.spectro);
    SpeakerEmbedding emb = state.speaker.encode(ref_mel);
    if (opts.retrieval) emb = retrieval_average(emb, *store, opts.k);

    // Content + pitch from the source.
    const MelSpectrogram src_mel = log_mel(source, cfg.spectro);
    ContentSpec cspec = cfg.content;
    if (!opts.source_content_path.empty()) {
        cspec.provider = ContentSpec::Provider::File;
        cspec.file_path = opts.source_content_path;
    }
    ContentFeatures content = extract_content(source, src_mel, cspec);

    std::vector<std::vector<int>> codes;
    if (cfg.content.compression == ContentSpec::Compression::KMeans) {
        if (!state.kmeans_cb) throw ValidationError("convert: model has no k-means codebook");
        if (cfg.content.mode == QuantMode::Tensor)
            content = kmeans_quantize_tensor(content, *state.kmeans_cb);
        else
            codes = {kmeans_quantize_codes(content, *state.kmeans_cb)};
    } else if (cfg.content.compression == ContentSpec::Compression::Rvq) {
        if (!state.rvq_cb) throw ValidationError("convert: model has no RVQ codebooks");
        if (cfg.content.mode == QuantMode::Tensor)
            content = rvq_encode_tensor(content, *state.rvq_cb);
        else
            codes = rvq_encode_codes(content, *state.rvq_cb);
    }

    F0Track f0 = estimate_f0(source, cfg.f0_min, cfg.f0_max, cfg.spectro);
    if (opts.transpose_semitones != 0.0) {
        const float factor = float(std::pow(2.0, opts.transpose_semitones / 12.0));
        for (auto& f : f0.f0_hz) f *= factor;
    }
    const std::vector<int> pitch = f0_to_bins(f0, cfg.model.pitch_bins);

    Graph g;
    Tensor spk_t(std::vector<int>{emb.dim(), 1});
    spk_t.data = emb.v;
    NodeRef spk = g.constant(std::move(spk_t));

    StatsT<float> prior;
    if (!codes.empty()) {
        prior = state.model.prior.forward_codes(g, codes, pitch);
    } else {
        Tensor c(std::vector<int>{content.dim(), content.n_frames()});
        for (int t = 0; t < content.n_frames(); ++t)
            for (int j = 0; j < content.dim(); ++j) c.at(j, t) = content.frames.at(t, j);
        prior = state.model.prior.forward(g, g.constant(std::move(c)), pitch);
    }

    Rng rng(opts.seed);
    Tensor noise(prior.mu->value.shape);
    for (auto& v : noise.data) v = float(rng.gaussian());
    NodeRef z_p = reparam_sample(g, prior, g.constant(std::move(noise)), opts.temperature);
    LatentT<float> z_t = state.model.flow.forward(g, z_p, spk);
    NodeRef wave = state.model.decoder.forward(g, z_t.z, spk);

    AudioClip out;
    out.sample_rate = sr;
    out.samples = wave->value.data;
    return out;
}

}  // namespace svc
