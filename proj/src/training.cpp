#include "svc/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "svc/errors.hpp"

namespace svc {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
    if (steps < 1) throw ValidationError("steps must be >= 1");
    if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
    if (segment_frames < 2) throw ValidationError("segment_frames must be >= 2");
    if (learning_rate <= 0) throw ValidationError("learning_rate must be positive");
    if (!(f0_min < f0_max) || f0_max >= spectro.sample_rate / 2.0)
        throw ValidationError("need f0_min < f0_max < sample_rate/2");
    spectro.validate();
    if (model.total_upsample() != spectro.hop)
        throw ValidationError("decoder upsampling (" + std::to_string(model.total_upsample()) +
                              ") must equal hop (" + std::to_string(spectro.hop) + ")");
}

void adam_step(std::vector<Param*>& params, AdamState& opt, double lr, double b1, double b2, double eps) {
    if (opt.m.empty()) {
        for (Param* p : params) {
            opt.m.emplace_back(p->value.shape);
            opt.v.emplace_back(p->value.shape);
        }
    }
    if (opt.m.size() != params.size()) throw ValidationError("adam_step: moment/param count mismatch");
    opt.t += 1;
    const double bc1 = 1.0 - std::pow(b1, double(opt.t));
    const double bc2 = 1.0 - std::pow(b2, double(opt.t));
    for (size_t i = 0; i < params.size(); ++i) {
        Param* p = params[i];
        if (!p->trainable) continue;
        auto& m = opt.m[i].data;
        auto& v = opt.v[i].data;
        for (size_t j = 0; j < p->value.data.size(); ++j) {
            const double gj = double(p->grad.data[j]);
            m[j] = float(b1 * double(m[j]) + (1.0 - b1) * gj);
            v[j] = float(b2 * double(v[j]) + (1.0 - b2) * gj * gj);
            const double mhat = double(m[j]) / bc1;
            const double vhat = double(v[j]) / bc2;
            p->value.data[j] = float(double(p->value.data[j]) - lr * mhat / (std::sqrt(vhat) + eps));
        }
    }
}

void TrainState::init(const TrainConfig& c) {
    cfg = c;
    cfg.validate();

    // Derive the prior-encoder input mode from the content spec.
    ModelConfig& mc = cfg.model;
    mc.n_mels = cfg.spectro.n_mels;
    mc.codes_mode = (cfg.content.compression != ContentSpec::Compression::None &&
                     cfg.content.mode == QuantMode::Codes);
    if (mc.codes_mode) {
        if (cfg.content.compression == ContentSpec::Compression::KMeans) {
            mc.code_vocab = cfg.content.kmeans_k;
            mc.code_tables = 1;
        } else {
            mc.code_vocab = cfg.content.codes_per_stage;
            mc.code_tables = cfg.content.rvq_stages;
        }
    } else {
        mc.content_dim = cfg.content.dim;
    }

    Rng init_rng(cfg.seed);
    model.init(init_rng, mc);
    disc.init("disc", init_rng, mc);
    speaker.init(cfg.seed + 1, mc.n_mels, mc.spk_dim);
    speaker.frozen = cfg.freeze_speaker;
    std::vector<Param*> sp;
    speaker.params(sp);
    for (Param* p : sp) p->trainable = !cfg.freeze_speaker;

    opt_g = AdamState{};
    opt_d = AdamState{};
    step = 0;
    rng = Rng(cfg.seed + 2);
}

std::vector<Param*> TrainState::generator_params() {
    std::vector<Param*> p;
    model.params(p);
    speaker.params(p);
    return p;
}

std::vector<Param*> TrainState::discriminator_params() {
    std::vector<Param*> p;
    disc.params(p);
    return p;
}

ContentFeatures extract_content(const AudioClip& clip, const MelSpectrogram& mel, const ContentSpec& spec,
                                const std::string& clip_path) {
    if (spec.provider == ContentSpec::Provider::Synthetic)
        return synthetic_content(mel, spec.seed, spec.dim);
    std::string path = spec.file_path;
    if (!clip_path.empty()) {
        path = clip_path;
        const auto dot = path.rfind('.');
        if (dot != std::string::npos) path = path.substr(0, dot);
        path += ".svcf";
    }
    if (path.empty()) throw ValidationError("file content provider needs a path");
    ContentFeatures f = load_features(path);
    (void)clip;
    return f;
}

std::vector<DatasetItem> prepare_dataset(const std::vector<std::pair<std::string, AudioClip>>& clips,
                                         TrainState& state) {
    const TrainConfig& cfg = state.cfg;
    std::vector<DatasetItem> items;
    items.reserve(clips.size());
    for (const auto& [id, clip] : clips) {
        DatasetItem item;
        item.id = id;
        item.clip = clip;
        item.mel = log_mel(clip, cfg.spectro);
        const F0Track f0 = estimate_f0(clip, cfg.f0_min, cfg.f0_max, cfg.spectro);
        item.pitch_bins = f0_to_bins(f0, cfg.model.pitch_bins);
        item.content = extract_content(clip, item.mel, cfg.content);
        items.push_back(std::move(item));
    }

    if (cfg.content.compression != ContentSpec::Compression::None) {
        // Fit codebooks on the pooled training features.
        int total = 0;
        const int d = items.empty() ? 0 : items.front().content.dim();
        for (const auto& it : items) total += it.content.n_frames();
        MatF pooled(total, d);
        int row = 0;
        for (const auto& it : items)
            for (int t = 0; t < it.content.n_frames(); ++t, ++row)
                for (int j = 0; j < d; ++j) pooled.at(row, j) = it.content.frames.at(t, j);

        if (cfg.content.compression == ContentSpec::Compression::KMeans) {
            state.kmeans_cb = kmeans_fit(pooled, cfg.content.kmeans_k, cfg.content.fit_iters, cfg.seed);
        } else {
            state.rvq_cb = rvq_fit(pooled, cfg.content.rvq_stages, cfg.content.codes_per_stage,
                                   cfg.content.fit_iters, cfg.seed);
        }
        for (auto& it : items) {
            if (cfg.content.compression == ContentSpec::Compression::KMeans) {
                if (cfg.content.mode == QuantMode::Tensor)
                    it.content = kmeans_quantize_tensor(it.content, *state.kmeans_cb);
                else
                    it.codes = {kmeans_quantize_codes(it.content, *state.kmeans_cb)};
            } else {
                if (cfg.content.mode == QuantMode::Tensor)
                    it.content = rvq_encode_tensor(it.content, *state.rvq_cb);
                else
                    it.codes = rvq_encode_codes(it.content, *state.rvq_cb);
            }
        }
    }
    return items;
}

namespace {

Tensor mel_to_tensor(const MelSpectrogram& mel, int t0, int t1) {
    const int n_mels = mel.config.n_mels;
    Tensor m(std::vector<int>{n_mels, t1 - t0});
    for (int t = t0; t < t1; ++t)
        for (int b = 0; b < n_mels; ++b) m.at(b, t - t0) = mel.frames[size_t(t)][size_t(b)];
    return m;
}

Tensor content_to_tensor(const ContentFeatures& f, int t0, int t1) {
    Tensor m(std::vector<int>{f.dim(), t1 - t0});
    for (int t = t0; t < t1; ++t)
        for (int j = 0; j < f.dim(); ++j) m.at(j, t - t0) = f.frames.at(t, j);
    return m;
}

Tensor mel_filter_tensor(const SpectroConfig& sc) {
    const auto fb = mel_filterbank(sc);
    const int k = sc.n_fft / 2 + 1;
    Tensor m(std::vector<int>{sc.n_mels, k});
    for (int i = 0; i < sc.n_mels; ++i)
        for (int j = 0; j < k; ++j) m.at(i, j) = float(fb[size_t(i)][size_t(j)]);
    return m;
}

// Differentiable log-mel of a waveform node.
NodeRef graph_log_mel(Graph& g, NodeRef wave, const SpectroConfig& sc, const Tensor& mel_w) {
    NodeRef mag = g.stft_mag(wave, sc.n_fft, sc.hop, hann_window(sc.win_length));
    return g.log_(g.clamp_min(g.matmul(g.constant(mel_w), mag), float(kLogMelFloor)));
}

Tensor gaussian_tensor(Rng& rng, std::vector<int> shape) {
    Tensor t(std::move(shape));
    for (auto& v : t.data) v = float(rng.gaussian());
    return t;
}

}  // namespace

std::vector<BatchItem> make_batch(const std::vector<DatasetItem>& dataset, const TrainConfig& cfg, Rng& rng) {
    if (dataset.empty()) throw ValidationError("make_batch: empty dataset");
    const int f = cfg.segment_frames;
    const int hop = cfg.spectro.hop;
    std::vector<BatchItem> batch;
    batch.reserve(size_t(cfg.batch_size));
    for (int b = 0; b < cfg.batch_size; ++b) {
        const size_t idx = size_t(rng.uniform_int(dataset.size()));
        const DatasetItem& item = dataset[idx];
        const int max_t0 = int(item.clip.samples.size()) / hop - f;
        if (max_t0 < 0)
            throw ValidationError("clip too short for segment: " + item.id + " (" +
                                  std::to_string(item.clip.samples.size()) + " samples < " +
                                  std::to_string(f * hop) + ")");
        const int t0 = int(rng.uniform_int(uint64_t(max_t0) + 1));

        BatchItem out;
        out.mel_seg = mel_to_tensor(item.mel, t0, t0 + f);
        out.wave_seg = Tensor(std::vector<int>{f * hop});
        for (int i = 0; i < f * hop; ++i) out.wave_seg.data[size_t(i)] = item.clip.samples[size_t(t0 * hop + i)];
        out.spk_mel = mel_to_tensor(item.mel, 0, item.mel.n_frames());
        out.pitch_seg.assign(item.pitch_bins.begin() + t0, item.pitch_bins.begin() + t0 + f);
        if (!item.codes.empty()) {
            for (const auto& stream : item.codes)
                out.codes_seg.emplace_back(stream.begin() + t0, stream.begin() + t0 + f);
        } else {
            out.content_seg = content_to_tensor(item.content, t0, t0 + f);
        }
        batch.push_back(std::move(out));
    }
    return batch;
}

LossBreakdown train_step(TrainState& state, const std::vector<BatchItem>& batch) {
    const TrainConfig& cfg = state.cfg;
    const int n = int(batch.size());
    if (n < 1) throw ValidationError("train_step: empty batch");
    const float inv_n = 1.0f / float(n);
    const Tensor mel_w = mel_filter_tensor(cfg.spectro);

    // (1) generator forward
    Graph g;
    struct ItemNodes {
        NodeRef spk, fake, real_wave;
        StatsT<float> post, prior;
        NodeRef z_q;
    };
    std::vector<ItemNodes> nodes;
    nodes.reserve(size_t(n));
    for (const BatchItem& item : batch) {
        ItemNodes in;
        in.spk = state.speaker.forward(g, g.constant(item.spk_mel));
        in.post = state.model.posterior.forward(g, g.constant(item.mel_seg), in.spk);
        const Tensor noise_q = gaussian_tensor(state.rng, in.post.mu->value.shape);
        in.z_q = reparam_sample(g, in.post, g.constant(noise_q), 1.0f);
        in.fake = state.model.decoder.forward(g, in.z_q, in.spk);
        in.real_wave = g.constant(item.wave_seg);
        if (!item.codes_seg.empty())
            in.prior = state.model.prior.forward_codes(g, item.codes_seg, item.pitch_seg);
        else
            in.prior = state.model.prior.forward(g, g.constant(item.content_seg), item.pitch_seg);
        nodes.push_back(std::move(in));
    }

    // (2) discriminator step on (real, detached fake)
    LossBreakdown br;
    {
        Graph gd;
        std::vector<NodeRef> real_scores, fake_scores;
        for (int i = 0; i < n; ++i) {
            auto rd = state.disc.forward(gd, gd.constant(batch[size_t(i)].wave_seg));
            auto fd = state.disc.forward(gd, gd.constant(nodes[size_t(i)].fake->value));
            for (auto& d : rd)
                for (auto& s : d.scores) real_scores.push_back(s);
            for (auto& d : fd)
                for (auto& s : d.scores) fake_scores.push_back(s);
        }
        NodeRef dl = l_dis(gd, real_scores, fake_scores, cfg.orientation);
        br.l_dis = double(dl->value.scalar_value());
        if (!std::isfinite(br.l_dis)) throw NumericError("non-finite l_dis");
        auto dp = state.discriminator_params();
        for (Param* p : dp) p->zero_grad();
        gd.backward(dl);
        adam_step(dp, state.opt_d, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    }

    // (3) generator step against the updated discriminator (frozen weights)
    NodeRef wav_acc = g.constant_scalar(0.0f);
    NodeRef mel_acc = g.constant_scalar(0.0f);
    NodeRef kl_acc = g.constant_scalar(0.0f);
    NodeRef adv_acc = g.constant_scalar(0.0f);
    NodeRef fmap_acc = g.constant_scalar(0.0f);
    NodeRef stft_acc = g.constant_scalar(0.0f);
    for (int i = 0; i < n; ++i) {
        ItemNodes& in = nodes[size_t(i)];
        wav_acc = g.add(wav_acc, l_wav(g, in.real_wave, in.fake));
        NodeRef real_mel = graph_log_mel(g, in.real_wave, cfg.spectro, mel_w);
        NodeRef fake_mel = graph_log_mel(g, in.fake, cfg.spectro, mel_w);
        mel_acc = g.add(mel_acc, l_mel(g, real_mel, fake_mel));
        stft_acc = g.add(stft_acc, l_stft(g, in.real_wave, in.fake));

        // KL: reuse z_q for the inverse-direction term, fresh z_p for forward.
        const float inv_numel = 1.0f / float(in.post.mu->value.numel());
        LatentT<float> inv = state.model.flow.inverse(g, in.z_q, in.spk);
        NodeRef term_q = g.sub(g.sub(gaussian_nll(g, inv.z, in.prior), gaussian_nll(g, in.z_q, in.post)),
                               g.scale(inv.log_det, inv_numel));
        const Tensor noise_p = gaussian_tensor(state.rng, in.prior.mu->value.shape);
        NodeRef z_p = reparam_sample(g, in.prior, g.constant(noise_p), 1.0f);
        LatentT<float> fwd = state.model.flow.forward(g, z_p, in.spk);
        NodeRef term_p = g.sub(g.sub(gaussian_nll(g, fwd.z, in.post), gaussian_nll(g, z_p, in.prior)),
                               g.scale(fwd.log_det, inv_numel));
        kl_acc = g.add(kl_acc, g.add(term_q, term_p));

        auto fd = state.disc.forward(g, in.fake, /*frozen=*/true);
        auto rd = state.disc.forward(g, in.real_wave, /*frozen=*/true);
        std::vector<NodeRef> fake_scores, real_fmaps, fake_fmaps;
        for (auto& d : fd) {
            for (auto& s : d.scores) fake_scores.push_back(s);
            for (auto& m : d.fmaps) fake_fmaps.push_back(m);
        }
        for (auto& d : rd)
            for (auto& m : d.fmaps) real_fmaps.push_back(m);
        adv_acc = g.add(adv_acc, l_adv(g, fake_scores));
        fmap_acc = g.add(fmap_acc, l_fmap(g, real_fmaps, fake_fmaps));
    }
    wav_acc = g.scale(wav_acc, inv_n);
    mel_acc = g.scale(mel_acc, inv_n);
    kl_acc = g.scale(kl_acc, inv_n);
    adv_acc = g.scale(adv_acc, inv_n);
    fmap_acc = g.scale(fmap_acc, inv_n);
    stft_acc = g.scale(stft_acc, inv_n);

    NodeRef gen = l_gen(g, wav_acc, mel_acc, kl_acc, adv_acc, fmap_acc, stft_acc, cfg.weights);
    br.l_wav = double(wav_acc->value.scalar_value());
    br.l_mel = double(mel_acc->value.scalar_value());
    br.l_kl = double(kl_acc->value.scalar_value());
    br.l_adv = double(adv_acc->value.scalar_value());
    br.l_fmap = double(fmap_acc->value.scalar_value());
    br.l_stft = double(stft_acc->value.scalar_value());
    br.l_gen = double(gen->value.scalar_value());
    if (!std::isfinite(br.l_gen)) throw NumericError("non-finite l_gen");

    auto gp = state.generator_params();
    for (Param* p : gp) p->zero_grad();
    g.backward(gen);
    adam_step(gp, state.opt_g, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);

    state.step += 1;
    return br;
}

// ---------------------------------------------------------------------------
// checkpointing

namespace {

// doubles are stored bit-exactly as two float words so that a resumed run
// sees the same hyperparameters the original run used
void push_f64(std::vector<float>& v, double d) {
    uint64_t bits;
    std::memcpy(&bits, &d, 8);
    const uint32_t lo = uint32_t(bits), hi = uint32_t(bits >> 32);
    float a, b;
    std::memcpy(&a, &lo, 4);
    std::memcpy(&b, &hi, 4);
    v.push_back(a);
    v.push_back(b);
}

double pop_f64(const std::vector<float>& v, size_t& i) {
    uint32_t lo, hi;
    std::memcpy(&lo, &v[i], 4);
    std::memcpy(&hi, &v[i + 1], 4);
    i += 2;
    const uint64_t bits = uint64_t(lo) | (uint64_t(hi) << 32);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
}

std::vector<float> pack_train_cfg(const TrainConfig& c) {
    std::vector<float> v{
        float(c.seed), float(c.steps), float(c.batch_size), float(c.segment_frames)};
    push_f64(v, c.learning_rate);
    push_f64(v, c.adam_beta1);
    push_f64(v, c.adam_beta2);
    push_f64(v, c.adam_eps);
    push_f64(v, c.weights.alpha);
    push_f64(v, c.weights.beta);
    push_f64(v, c.weights.gamma);
    push_f64(v, c.weights.w_adv);
    push_f64(v, c.weights.w_fmap);
    v.push_back(c.orientation == DisOrientation::Lsgan ? 0.0f : 1.0f);
    v.push_back(c.freeze_speaker ? 1.0f : 0.0f);
    v.push_back(float(c.checkpoint_interval));
    push_f64(v, c.f0_min);
    push_f64(v, c.f0_max);
    // content spec
    v.push_back(float(int(c.content.provider)));
    v.push_back(float(c.content.seed));
    v.push_back(float(c.content.dim));
    v.push_back(float(int(c.content.compression)));
    v.push_back(c.content.mode == QuantMode::Tensor ? 0.0f : 1.0f);
    v.push_back(float(c.content.kmeans_k));
    v.push_back(float(c.content.rvq_stages));
    v.push_back(float(c.content.codes_per_stage));
    v.push_back(float(c.content.fit_iters));
    // spectro
    v.push_back(float(c.spectro.sample_rate));
    v.push_back(float(c.spectro.n_fft));
    v.push_back(float(c.spectro.hop));
    v.push_back(float(c.spectro.win_length));
    v.push_back(float(c.spectro.n_mels));
    push_f64(v, c.spectro.fmin);
    push_f64(v, c.spectro.fmax);
    // model widths
    v.push_back(float(c.model.d_z));
    v.push_back(float(c.model.hidden));
    v.push_back(float(c.model.spk_dim));
    v.push_back(float(c.model.content_dim));
    v.push_back(float(c.model.pitch_bins));
    v.push_back(float(c.model.pitch_embed_dim));
    v.push_back(float(c.model.dec_ch));
    v.push_back(float(c.model.flow_blocks));
    v.push_back(float(c.model.flow_hidden));
    return v;
}

TrainConfig unpack_train_cfg(const std::vector<float>& v, const std::vector<float>& ups,
                             const std::vector<float>& periods, const std::vector<float>& scales) {
    TrainConfig c;
    size_t i = 0;
    c.seed = uint64_t(v[i++]);
    c.steps = int(v[i++]);
    c.batch_size = int(v[i++]);
    c.segment_frames = int(v[i++]);
    c.learning_rate = pop_f64(v, i);
    c.adam_beta1 = pop_f64(v, i);
    c.adam_beta2 = pop_f64(v, i);
    c.adam_eps = pop_f64(v, i);
    c.weights.alpha = pop_f64(v, i);
    c.weights.beta = pop_f64(v, i);
    c.weights.gamma = pop_f64(v, i);
    c.weights.w_adv = pop_f64(v, i);
    c.weights.w_fmap = pop_f64(v, i);
    c.orientation = v[i++] == 0.0f ? DisOrientation::Lsgan : DisOrientation::AsPrinted;
    c.freeze_speaker = v[i++] != 0.0f;
    c.checkpoint_interval = int(v[i++]);
    c.f0_min = pop_f64(v, i);
    c.f0_max = pop_f64(v, i);
    c.content.provider = ContentSpec::Provider(int(v[i++]));
    c.content.seed = uint64_t(v[i++]);
    c.content.dim = int(v[i++]);
    c.content.compression = ContentSpec::Compression(int(v[i++]));
    c.content.mode = v[i++] == 0.0f ? QuantMode::Tensor : QuantMode::Codes;
    c.content.kmeans_k = int(v[i++]);
    c.content.rvq_stages = int(v[i++]);
    c.content.codes_per_stage = int(v[i++]);
    c.content.fit_iters = int(v[i++]);
    c.spectro.sample_rate = int(v[i++]);
    c.spectro.n_fft = int(v[i++]);
    c.spectro.hop = int(v[i++]);
    c.spectro.win_length = int(v[i++]);
    c.spectro.n_mels = int(v[i++]);
    c.spectro.fmin = pop_f64(v, i);
    c.spectro.fmax = pop_f64(v, i);
    c.model.d_z = int(v[i++]);
    c.model.hidden = int(v[i++]);
    c.model.spk_dim = int(v[i++]);
    c.model.content_dim = int(v[i++]);
    c.model.pitch_bins = int(v[i++]);
    c.model.pitch_embed_dim = int(v[i++]);
    c.model.dec_ch = int(v[i++]);
    c.model.flow_blocks = int(v[i++]);
    c.model.flow_hidden = int(v[i++]);
    c.model.upsample.clear();
    for (float f : ups) c.model.upsample.push_back(int(f));
    c.model.periods.clear();
    for (float f : periods) c.model.periods.push_back(int(f));
    c.model.scales.clear();
    for (float f : scales) c.model.scales.push_back(int(f));
    return c;
}

std::vector<float> to_floats(const std::vector<int>& v) {
    std::vector<float> out;
    for (int x : v) out.push_back(float(x));
    return out;
}

}  // namespace

void save_checkpoint(const TrainState& state, const std::string& path) {
    Checkpoint ckpt;
    std::vector<float> packed = pack_train_cfg(state.cfg);
    const int packed_n = int(packed.size());
    ckpt.add("__cfg.train", {packed_n}, std::move(packed));
    ckpt.add("__cfg.upsample", {int(state.cfg.model.upsample.size())}, to_floats(state.cfg.model.upsample));
    ckpt.add("__cfg.periods", {int(state.cfg.model.periods.size())}, to_floats(state.cfg.model.periods));
    ckpt.add("__cfg.scales", {int(state.cfg.model.scales.size())}, to_floats(state.cfg.model.scales));

    auto& self = const_cast<TrainState&>(state);
    for (Param* p : self.generator_params()) {
        if (p->name.rfind("fc", 0) == 0)
            continue;  // speaker params written below under the spk. prefix
        ckpt.add(p->name, p->value.shape, p->value.data);
    }
    state.speaker.save(ckpt, "spk.");
    for (Param* p : self.discriminator_params()) ckpt.add(p->name, p->value.shape, p->value.data);

    if (state.kmeans_cb)
        ckpt.add("cbk.kmeans", {state.kmeans_cb->k(), state.kmeans_cb->dim()}, state.kmeans_cb->centroids.data);
    if (state.rvq_cb)
        for (int s = 0; s < state.rvq_cb->n_stages(); ++s)
            ckpt.add("cbk.rvq." + std::to_string(s),
                     {state.rvq_cb->stages[size_t(s)].k(), state.rvq_cb->stages[size_t(s)].dim()},
                     state.rvq_cb->stages[size_t(s)].centroids.data);

    auto add_moments = [&](const char* tag, AdamState& opt, std::vector<Param*> params) {
        ckpt.add(std::string("__opt.") + tag + ".t", {1}, {float(opt.t)});
        if (opt.m.empty()) return;
        for (size_t i = 0; i < params.size(); ++i) {
            ckpt.add(std::string("__opt.") + tag + ".m." + params[i]->name, opt.m[i].shape, opt.m[i].data);
            ckpt.add(std::string("__opt.") + tag + ".v." + params[i]->name, opt.v[i].shape, opt.v[i].data);
        }
    };
    add_moments("g", self.opt_g, self.generator_params());
    add_moments("d", self.opt_d, self.discriminator_params());

    ckpt.add("__step", {1}, {float(state.step)});
    const auto words = state.rng.dump_state();
    std::vector<float> rng_bits(words.size());
    std::memcpy(rng_bits.data(), words.data(), words.size() * 4);
    ckpt.add("__rng.state", {int(words.size())}, rng_bits);

    save_svck(ckpt, path);
}

TrainState load_checkpoint(const std::string& path) {
    Checkpoint ckpt = load_svck(path);
    const auto& cfg_t = ckpt.require("__cfg.train");
    TrainConfig cfg = unpack_train_cfg(cfg_t.data, ckpt.require("__cfg.upsample").data,
                                       ckpt.require("__cfg.periods").data, ckpt.require("__cfg.scales").data);
    TrainState state;
    state.init(cfg);

    for (Param* p : state.generator_params()) {
        if (p->name.rfind("fc", 0) == 0) continue;
        const auto& t = ckpt.require(p->name);
        if (t.shape != p->value.shape) throw FormatError("tensor " + p->name + " has unexpected shape");
        p->value.data = t.data;
    }
    state.speaker.load(ckpt, "spk.");
    state.speaker.frozen = cfg.freeze_speaker;
    {
        std::vector<Param*> sp;
        state.speaker.params(sp);
        for (Param* p : sp) p->trainable = !cfg.freeze_speaker;
    }
    for (Param* p : state.discriminator_params()) {
        const auto& t = ckpt.require(p->name);
        if (t.shape != p->value.shape) throw FormatError("tensor " + p->name + " has unexpected shape");
        p->value.data = t.data;
    }

    if (cfg.content.compression == ContentSpec::Compression::KMeans) {
        const auto& t = ckpt.require("cbk.kmeans");
        KMeansCodebook cb;
        cb.centroids = MatF(t.shape[0], t.shape[1]);
        cb.centroids.data = t.data;
        state.kmeans_cb = std::move(cb);
    } else if (cfg.content.compression == ContentSpec::Compression::Rvq) {
        ResidualCodebooks rvq;
        for (int s = 0; s < cfg.content.rvq_stages; ++s) {
            const auto& t = ckpt.require("cbk.rvq." + std::to_string(s));
            KMeansCodebook cb;
            cb.centroids = MatF(t.shape[0], t.shape[1]);
            cb.centroids.data = t.data;
            rvq.stages.push_back(std::move(cb));
        }
        state.rvq_cb = std::move(rvq);
    }

    auto load_moments = [&](const char* tag, AdamState& opt, std::vector<Param*> params) {
        opt.t = int64_t(ckpt.require(std::string("__opt.") + tag + ".t").data[0]);
        if (!ckpt.find(std::string("__opt.") + tag + ".m." + params.front()->name)) return;
        opt.m.clear();
        opt.v.clear();
        for (Param* p : params) {
            const auto& m = ckpt.require(std::string("__opt.") + tag + ".m." + p->name);
            const auto& v = ckpt.require(std::string("__opt.") + tag + ".v." + p->name);
            Tensor tm(p->value.shape), tv(p->value.shape);
            tm.data = m.data;
            tv.data = v.data;
            opt.m.push_back(std::move(tm));
            opt.v.push_back(std::move(tv));
        }
    };
    load_moments("g", state.opt_g, state.generator_params());
    load_moments("d", state.opt_d, state.discriminator_params());

    state.step = int64_t(ckpt.require("__step").data[0]);
    const auto& rng_t = ckpt.require("__rng.state");
    std::vector<uint32_t> words(rng_t.data.size());
    std::memcpy(words.data(), rng_t.data.data(), words.size() * 4);
    state.rng.restore_state(words);
    return state;
}

std::string train(const std::vector<std::pair<std::string, AudioClip>>& clips, const TrainConfig& cfg,
                  const std::string& out_dir) {
    fs::create_directories(out_dir);
    TrainState state;
    state.init(cfg);
    const auto dataset = prepare_dataset(clips, state);

    std::ofstream log(out_dir + "/train_log.csv");
    if (!log) throw IoError("cannot open training log in " + out_dir);
    log << "step,l_gen,l_dis,l_wav,l_mel,l_kl,l_adv,l_fmap,l_stft\n";

    for (int s = 0; s < cfg.steps; ++s) {
        const auto batch = make_batch(dataset, cfg, state.rng);
        LossBreakdown br;
        try {
            br = train_step(state, batch);
        } catch (const NumericError& e) {
            throw NumericError(std::string(e.what()) + " at step " + std::to_string(state.step + 1));
        }
        log << state.step << "," << br.l_gen << "," << br.l_dis << "," << br.l_wav << "," << br.l_mel << ","
            << br.l_kl << "," << br.l_adv << "," << br.l_fmap << "," << br.l_stft << "\n";
        if (cfg.checkpoint_interval > 0 && state.step % cfg.checkpoint_interval == 0 &&
            s + 1 < cfg.steps)
            save_checkpoint(state, out_dir + "/ckpt_" + std::to_string(state.step) + ".svck");
    }
    const std::string final_path = out_dir + "/final.svck";
    save_checkpoint(state, final_path);
    return final_path;
}

}  // namespace svc
