#pragma once

// The generative stack: posterior encoder, prior encoder, speaker-conditioned
// affine-coupling flow, upsampling decoder, and the multi-period/multi-scale
// discriminator bank. Everything is templated on the scalar so the gradient
// checks can instantiate it in double.
//
// Flow direction naming: *forward* maps prior-side latents toward the
// posterior side (z_p -> z_t); *inverse* maps z_q -> z_f. Inference uses the
// forward direction.

#include <numeric>
#include <string>
#include <vector>

#include "svc/layers.hpp"

namespace svc {

struct ModelConfig {
    int n_mels = 80;
    int d_z = 32;
    int hidden = 128;
    int spk_dim = 256;
    int content_dim = 64;       // continuous content input width (Tensor mode)
    bool codes_mode = false;    // code indices feed embedding lookups instead
    int code_vocab = 900;
    int code_tables = 1;        // >1 for RVQ codes (one table per stage, summed)
    int pitch_bins = 256;
    int pitch_embed_dim = 64;
    std::vector<int> upsample = {5, 4, 4, 4};
    int dec_ch = 128;
    int flow_blocks = 2;
    int flow_hidden = 64;
    std::vector<int> periods = {2, 3, 5};
    std::vector<int> scales = {1, 2, 4};

    int total_upsample() const {
        return std::accumulate(upsample.begin(), upsample.end(), 1, std::multiplies<int>());
    }
};

template <class S>
struct StatsT {
    Ref<S> mu;
    Ref<S> log_sigma;
};

template <class S>
struct LatentT {
    Ref<S> z;
    Ref<S> log_det;  // scalar node; zero constant unless the flow produced z
};

template <class S>
Ref<S> reparam_sample(GraphT<S>& g, const StatsT<S>& stats, Ref<S> noise, S temperature) {
    if (stats.mu->value.shape != noise->value.shape)
        throw ValidationError("reparam_sample: noise shape " + noise->value.shape_str() +
                              " != mu shape " + stats.mu->value.shape_str());
    return g.add(stats.mu, g.scale(g.mul(g.exp_(stats.log_sigma), noise), temperature));
}

// ---------------------------------------------------------------------------

template <class S>
struct PosteriorEncoderT {
    Conv1dT<S> pre, mid, out;
    LinearT<S> spk_proj;
    int n_mels = 0, d_z = 0;

    void init(const std::string& name, Rng& rng, const ModelConfig& cfg) {
        n_mels = cfg.n_mels;
        d_z = cfg.d_z;
        pre.init(name + ".pre", rng, cfg.n_mels, cfg.hidden, 5, 1, 2);
        mid.init(name + ".mid", rng, cfg.hidden, cfg.hidden, 5, 1, 2);
        out.init(name + ".out", rng, cfg.hidden, 2 * cfg.d_z, 3, 1, 1);
        spk_proj.init(name + ".spk", rng, cfg.spk_dim, cfg.hidden);
    }

    // mel (n_mels, T), spk (spk_dim, 1) -> stats (d_z, T)
    StatsT<S> forward(GraphT<S>& g, Ref<S> mel, Ref<S> spk) {
        if (mel->value.rows() != n_mels)
            throw ValidationError("posterior encoder expects " + std::to_string(n_mels) + " mel bands, got " +
                                  std::to_string(mel->value.rows()));
        Ref<S> h = g.leaky_relu(g.add_col(pre.forward(g, mel), g.flatten(spk_proj.forward(g, spk))));
        h = g.leaky_relu(mid.forward(g, h));
        Ref<S> st = out.forward(g, h);
        return {g.slice_rows(st, 0, d_z), g.clamp(g.slice_rows(st, d_z, 2 * d_z), S(-9), S(4))};
    }

    void params(std::vector<ParameterT<S>*>& p) {
        pre.params(p);
        mid.params(p);
        out.params(p);
        spk_proj.params(p);
    }
};

template <class S>
struct PriorEncoderT {
    Conv1dT<S> content_proj;               // Tensor mode
    std::vector<EmbeddingT<S>> code_emb;   // Codes mode, one table per stage
    EmbeddingT<S> pitch_emb;
    Conv1dT<S> pitch_proj, mid, out;
    ModelConfig cfg;

    void init(const std::string& name, Rng& rng, const ModelConfig& c) {
        cfg = c;
        if (cfg.codes_mode) {
            code_emb.resize(size_t(cfg.code_tables));
            for (int s = 0; s < cfg.code_tables; ++s)
                code_emb[size_t(s)].init(name + ".code" + std::to_string(s), rng, cfg.code_vocab, cfg.hidden);
        } else {
            content_proj.init(name + ".content", rng, cfg.content_dim, cfg.hidden, 3, 1, 1);
        }
        pitch_emb.init(name + ".pitch", rng, cfg.pitch_bins, cfg.pitch_embed_dim);
        pitch_proj.init(name + ".pitchproj", rng, cfg.pitch_embed_dim, cfg.hidden, 1, 1, 0);
        mid.init(name + ".mid", rng, cfg.hidden, cfg.hidden, 5, 1, 2);
        out.init(name + ".out", rng, cfg.hidden, 2 * cfg.d_z, 3, 1, 1);
    }

    // Tensor mode entry: content (D, T). Codes mode entry below.
    StatsT<S> forward(GraphT<S>& g, Ref<S> content, const std::vector<int>& pitch_codes) {
        if (cfg.codes_mode) throw ValidationError("prior encoder is in Codes mode; pass code sequences");
        Ref<S> h = content_proj.forward(g, content);
        return finish(g, h, pitch_codes);
    }

    StatsT<S> forward_codes(GraphT<S>& g, const std::vector<std::vector<int>>& codes,
                            const std::vector<int>& pitch_codes) {
        if (!cfg.codes_mode) throw ValidationError("prior encoder is in Tensor mode; pass a feature matrix");
        if (int(codes.size()) != cfg.code_tables)
            throw ValidationError("prior encoder expects " + std::to_string(cfg.code_tables) +
                                  " code streams, got " + std::to_string(codes.size()));
        Ref<S> h = code_emb[0].forward(g, codes[0]);
        for (size_t s = 1; s < codes.size(); ++s) h = g.add(h, code_emb[s].forward(g, codes[s]));
        return finish(g, h, pitch_codes);
    }

    void params(std::vector<ParameterT<S>*>& p) {
        if (cfg.codes_mode)
            for (auto& e : code_emb) e.params(p);
        else
            content_proj.params(p);
        pitch_emb.params(p);
        pitch_proj.params(p);
        mid.params(p);
        out.params(p);
    }

  private:
    StatsT<S> finish(GraphT<S>& g, Ref<S> h_content, const std::vector<int>& pitch_codes) {
        const int t = h_content->value.cols();
        std::vector<int> pc = pitch_codes;
        if (int(pc.size()) > t) pc.resize(size_t(t));
        if (int(pc.size()) < t)
            throw ValidationError("prior encoder: pitch stream shorter than content (" +
                                  std::to_string(pc.size()) + " < " + std::to_string(t) + ")");
        Ref<S> hp = pitch_proj.forward(g, pitch_emb.forward(g, pc));
        Ref<S> h = g.leaky_relu(g.add(h_content, hp));
        h = g.leaky_relu(mid.forward(g, h));
        Ref<S> st = out.forward(g, h);
        return {g.slice_rows(st, 0, cfg.d_z), g.clamp(g.slice_rows(st, cfg.d_z, 2 * cfg.d_z), S(-9), S(4))};
    }
};

// ---------------------------------------------------------------------------

template <class S>
struct CouplingT {
    Conv1dT<S> pre, mid, out;
    LinearT<S> spk_proj;
    int half = 0;

    void init(const std::string& name, Rng& rng, const ModelConfig& cfg) {
        half = cfg.d_z / 2;
        pre.init(name + ".pre", rng, half, cfg.flow_hidden, 3, 1, 1);
        mid.init(name + ".mid", rng, cfg.flow_hidden, cfg.flow_hidden, 3, 1, 1);
        out.init(name + ".out", rng, cfg.flow_hidden, 2 * half, 3, 1, 1);
        out.zero_init();  // identity at start
        spk_proj.init(name + ".spk", rng, cfg.spk_dim, cfg.flow_hidden);
    }

    // Returns (shift, log_scale) from the conditioning half.
    std::pair<Ref<S>, Ref<S>> net(GraphT<S>& g, Ref<S> xa, Ref<S> spk) {
        Ref<S> h = g.leaky_relu(g.add_col(pre.forward(g, xa), g.flatten(spk_proj.forward(g, spk))));
        h = g.leaky_relu(mid.forward(g, h));
        Ref<S> st = out.forward(g, h);
        Ref<S> m = g.slice_rows(st, 0, half);
        Ref<S> s = g.scale(g.tanh_(g.slice_rows(st, half, 2 * half)), S(2));
        return {m, s};
    }

    // y = [xa, xb * exp(s) + m]; returns log_det contribution sum(s).
    std::pair<Ref<S>, Ref<S>> forward(GraphT<S>& g, Ref<S> x, Ref<S> spk) {
        Ref<S> xa = g.slice_rows(x, 0, half);
        Ref<S> xb = g.slice_rows(x, half, 2 * half);
        auto [m, s] = net(g, xa, spk);
        Ref<S> yb = g.add(g.mul(xb, g.exp_(s)), m);
        return {g.concat_rows(xa, yb), g.sum(s)};
    }

    std::pair<Ref<S>, Ref<S>> inverse(GraphT<S>& g, Ref<S> y, Ref<S> spk) {
        Ref<S> ya = g.slice_rows(y, 0, half);
        Ref<S> yb = g.slice_rows(y, half, 2 * half);
        auto [m, s] = net(g, ya, spk);
        Ref<S> xb = g.mul(g.sub(yb, m), g.exp_(g.neg(s)));
        return {g.concat_rows(ya, xb), g.neg(g.sum(s))};
    }

    void params(std::vector<ParameterT<S>*>& p) {
        pre.params(p);
        mid.params(p);
        out.params(p);
        spk_proj.params(p);
    }
};

template <class S>
struct FlowT {
    std::vector<CouplingT<S>> blocks;
    int d_z = 0;

    void init(const std::string& name, Rng& rng, const ModelConfig& cfg) {
        d_z = cfg.d_z;
        blocks.resize(size_t(cfg.flow_blocks));
        for (int i = 0; i < cfg.flow_blocks; ++i)
            blocks[size_t(i)].init(name + ".block" + std::to_string(i), rng, cfg);
    }

    Ref<S> flip(GraphT<S>& g, Ref<S> x) {
        const int half = d_z / 2;
        return g.concat_rows(g.slice_rows(x, half, d_z), g.slice_rows(x, 0, half));
    }

    // z_p -> z_t
    LatentT<S> forward(GraphT<S>& g, Ref<S> z, Ref<S> spk) {
        check(z);
        Ref<S> log_det = g.constant_scalar(S(0));
        for (auto& block : blocks) {
            auto [y, ld] = block.forward(g, z, spk);
            z = flip(g, y);
            log_det = g.add(log_det, ld);
        }
        return {z, log_det};
    }

    // z_q -> z_f (exact analytic inverse, reverse order)
    LatentT<S> inverse(GraphT<S>& g, Ref<S> z, Ref<S> spk) {
        check(z);
        Ref<S> log_det = g.constant_scalar(S(0));
        for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) {
            auto [x, ld] = it->inverse(g, flip(g, z), spk);
            z = x;
            log_det = g.add(log_det, ld);
        }
        return {z, log_det};
    }

    void params(std::vector<ParameterT<S>*>& p) {
        for (auto& block : blocks) block.params(p);
    }

  private:
    void check(const Ref<S>& z) {
        if (z->value.rows() != d_z)
            throw ValidationError("flow expects " + std::to_string(d_z) + " channels, got " +
                                  std::to_string(z->value.rows()));
    }
};

// ---------------------------------------------------------------------------

template <class S>
struct DecoderT {
    Conv1dT<S> pre, post;
    LinearT<S> spk_proj;
    std::vector<TConv1dT<S>> ups;
    std::vector<Conv1dT<S>> res;
    ModelConfig cfg;

    void init(const std::string& name, Rng& rng, const ModelConfig& c) {
        cfg = c;
        pre.init(name + ".pre", rng, cfg.d_z, cfg.dec_ch, 7, 1, 3);
        spk_proj.init(name + ".spk", rng, cfg.spk_dim, cfg.dec_ch);
        int ch = cfg.dec_ch;
        for (size_t i = 0; i < cfg.upsample.size(); ++i) {
            const int f = cfg.upsample[i];
            const int next = std::max(ch / 2, 4);
            // kernel/pad chosen so T maps exactly to T*f
            const int k = (f % 2 == 0) ? 2 * f : 3 * f;
            const int pad = (f % 2 == 0) ? f / 2 : f;
            ups.emplace_back();
            ups.back().init(name + ".up" + std::to_string(i), rng, ch, next, k, f, pad);
            res.emplace_back();
            res.back().init(name + ".res" + std::to_string(i), rng, next, next, 3, 1, 1);
            ch = next;
        }
        post.init(name + ".post", rng, ch, 1, 7, 1, 3);
        post.zero_init();  // start from silence: stabilizes the first adversarial steps
    }

    // z (d_z, T), spk (spk_dim, 1) -> waveform (total_upsample * T,), in (-1, 1)
    Ref<S> forward(GraphT<S>& g, Ref<S> z, Ref<S> spk) {
        Ref<S> h = g.add_col(pre.forward(g, z), g.flatten(spk_proj.forward(g, spk)));
        for (size_t i = 0; i < ups.size(); ++i) {
            h = ups[i].forward(g, g.leaky_relu(h));
            h = g.add(h, res[i].forward(g, g.leaky_relu(h)));
        }
        return g.flatten(g.tanh_(post.forward(g, g.leaky_relu(h))));
    }

    void params(std::vector<ParameterT<S>*>& p) {
        pre.params(p);
        spk_proj.params(p);
        for (auto& u : ups) u.params(p);
        for (auto& r : res) r.params(p);
        post.params(p);
    }
};

// ---------------------------------------------------------------------------

template <class S>
struct DiscOutputT {
    std::vector<Ref<S>> scores;  // one score map per branch
    std::vector<Ref<S>> fmaps;   // intermediate activations in fixed layer order
};

// One 1-D conv stack shared by both discriminator families.
template <class S>
struct DiscStackT {
    std::vector<Conv1dT<S>> convs;
    Conv1dT<S> post;

    void init(const std::string& name, Rng& rng, const std::vector<int>& channels, int k, int stride) {
        int cin = 1;
        for (size_t i = 0; i < channels.size(); ++i) {
            convs.emplace_back();
            convs.back().init(name + ".c" + std::to_string(i), rng, cin, channels[i], k,
                              i + 1 < channels.size() ? stride : 1, (k - 1) / 2);
            cin = channels[i];
        }
        post.init(name + ".post", rng, cin, 1, 3, 1, 1);
    }

    // x (1, L): appends feature maps, returns the score map. frozen=true
    // routes weights in as constants (used during the generator step).
    Ref<S> forward(GraphT<S>& g, Ref<S> x, std::vector<Ref<S>>& fmaps, bool frozen = false) {
        Ref<S> h = x;
        for (auto& c : convs) {
            h = g.leaky_relu(frozen ? c.forward_frozen(g, h) : c.forward(g, h));
            fmaps.push_back(h);
        }
        return frozen ? post.forward_frozen(g, h) : post.forward(g, h);
    }

    void params(std::vector<ParameterT<S>*>& p) {
        for (auto& c : convs) c.params(p);
        post.params(p);
    }
};

template <class S>
struct DiscriminatorBankT {
    std::vector<DiscStackT<S>> period_stacks;  // one per period
    std::vector<DiscStackT<S>> scale_stacks;   // one per scale
    ModelConfig cfg;

    void init(const std::string& name, Rng& rng, const ModelConfig& c) {
        cfg = c;
        for (size_t i = 0; i < cfg.periods.size(); ++i) {
            period_stacks.emplace_back();
            period_stacks.back().init(name + ".p" + std::to_string(cfg.periods[i]), rng, {8, 16, 32, 32}, 5, 3);
        }
        for (size_t i = 0; i < cfg.scales.size(); ++i) {
            scale_stacks.emplace_back();
            scale_stacks.back().init(name + ".s" + std::to_string(cfg.scales[i]), rng, {8, 16, 32, 32}, 15, 4);
        }
    }

    // wave: 1-D (L). Returns one DiscOutput per sub-discriminator,
    // periods first, then scales.
    std::vector<DiscOutputT<S>> forward(GraphT<S>& g, Ref<S> wave, bool frozen = false) {
        if (wave->value.shape.size() != 1) throw ValidationError("discriminator expects a 1-D waveform");
        const int len = int(wave->value.data.size());
        if (len < 30)
            throw ValidationError("discriminator input too short: " + std::to_string(len) + " < 30 samples");
        std::vector<DiscOutputT<S>> out;
        for (size_t i = 0; i < cfg.periods.size(); ++i) {
            const int p = cfg.periods[i];
            DiscOutputT<S> d;
            for (int phase = 0; phase < p; ++phase) {
                Ref<S> col = g.reshape(g.downsample_phase(wave, p, phase), {1, (len + p - 1) / p});
                d.scores.push_back(g.flatten(period_stacks[i].forward(g, col, d.fmaps, frozen)));
            }
            out.push_back(std::move(d));
        }
        for (size_t i = 0; i < cfg.scales.size(); ++i) {
            const int s = cfg.scales[i];
            Ref<S> x = g.reshape(wave, {1, len});
            if (s > 1) x = g.avg_pool1d(x, s);
            DiscOutputT<S> d;
            d.scores.push_back(g.flatten(scale_stacks[i].forward(g, x, d.fmaps, frozen)));
            out.push_back(std::move(d));
        }
        return out;
    }

    void params(std::vector<ParameterT<S>*>& p) {
        for (auto& s : period_stacks) s.params(p);
        for (auto& s : scale_stacks) s.params(p);
    }
};

// ---------------------------------------------------------------------------

template <class S>
struct SvcModelT {
    ModelConfig cfg;
    PosteriorEncoderT<S> posterior;
    PriorEncoderT<S> prior;
    FlowT<S> flow;
    DecoderT<S> decoder;

    void init(Rng& rng, const ModelConfig& c) {
        cfg = c;
        posterior.init("post", rng, cfg);
        prior.init("prior", rng, cfg);
        flow.init("flow", rng, cfg);
        decoder.init("dec", rng, cfg);
    }

    void params(std::vector<ParameterT<S>*>& p) {
        posterior.params(p);
        prior.params(p);
        flow.params(p);
        decoder.params(p);
    }
};

using SvcModel = SvcModelT<float>;
using DiscriminatorBank = DiscriminatorBankT<float>;

}  // namespace svc
