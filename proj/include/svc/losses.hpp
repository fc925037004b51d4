#pragma once

// The training loss suite: waveform L1+L2, mel L1+L2, the two-direction
// Monte-Carlo KL through the flow, multi-resolution STFT loss, LSGAN
// discriminator/adversarial terms, and the feature-map L1.

#include <cmath>
#include <string>
#include <vector>

#include "svc/autodiff.hpp"
#include "svc/dsp.hpp"
#include "svc/model.hpp"

namespace svc {

struct LossWeights {
    double alpha = 1.0;   // scales l_wav + l_mel
    double beta = 0.2;    // scales l_kl
    double gamma = 9.0;   // scales l_stft
    double w_adv = 1.0;
    double w_fmap = 1.0;
};

// The printed discriminator objective rewards D(a') -> 1, which contradicts
// the generator objective; Lsgan is the standard orientation and the default.
enum class DisOrientation { Lsgan, AsPrinted };

struct LossBreakdown {
    double l_wav = 0, l_mel = 0, l_kl = 0, l_adv = 0, l_fmap = 0, l_stft = 0;
    double l_gen = 0, l_dis = 0;
};

struct StftResolution {
    int n_fft;
    int hop;
};

inline std::vector<StftResolution> default_stft_resolutions() {
    return {{512, 128}, {1024, 256}, {2048, 512}};
}

// mean|r-f| + mean(r-f)^2
template <class S>
Ref<S> l_wav(GraphT<S>& g, Ref<S> real, Ref<S> fake) {
    if (real->value.shape != fake->value.shape)
        throw ValidationError("l_wav: length mismatch " + real->value.shape_str() + " vs " +
                              fake->value.shape_str());
    Ref<S> d = g.sub(real, fake);
    return g.add(g.mean(g.abs_(d)), g.mean(g.mul(d, d)));
}

// Same L1+L2 form on log-mel entries.
template <class S>
Ref<S> l_mel(GraphT<S>& g, Ref<S> real_mel, Ref<S> fake_mel) {
    if (real_mel->value.shape != fake_mel->value.shape)
        throw ValidationError("l_mel: shape mismatch " + real_mel->value.shape_str() + " vs " +
                              fake_mel->value.shape_str());
    Ref<S> d = g.sub(real_mel, fake_mel);
    return g.add(g.mean(g.abs_(d)), g.mean(g.mul(d, d)));
}

// Element-mean of log s2 - log s1 + (s1^2 + (mu1-mu2)^2) / (2 s2^2) - 1/2.
template <class S>
Ref<S> gaussian_kl(GraphT<S>& g, const StatsT<S>& s1, const StatsT<S>& s2) {
    if (s1.mu->value.shape != s2.mu->value.shape)
        throw ValidationError("gaussian_kl: shape mismatch");
    Ref<S> dmu = g.sub(s1.mu, s2.mu);
    Ref<S> var1 = g.exp_(g.scale(s1.log_sigma, S(2)));
    Ref<S> inv_var2 = g.exp_(g.scale(s2.log_sigma, S(-2)));
    Ref<S> quad = g.scale(g.mul(g.add(var1, g.mul(dmu, dmu)), inv_var2), S(0.5));
    return g.mean(g.add_scalar(g.add(g.sub(s2.log_sigma, s1.log_sigma), quad), S(-0.5)));
}

// Per-element diagonal-Gaussian negative log-density.
template <class S>
Ref<S> gaussian_nll(GraphT<S>& g, Ref<S> z, const StatsT<S>& stats) {
    Ref<S> d = g.sub(z, stats.mu);
    Ref<S> quad = g.scale(g.mul(g.mul(d, d), g.exp_(g.scale(stats.log_sigma, S(-2)))), S(0.5));
    return g.mean(g.add_scalar(g.add(stats.log_sigma, quad), S(0.5 * std::log(2.0 * M_PI))));
}

// Two single-sample Monte-Carlo change-of-variable terms, pairing
// (z_f, prior) with (z_q, posterior) and (z_t, posterior) with (z_p, prior).
template <class S>
Ref<S> l_kl(GraphT<S>& g, const StatsT<S>& posterior, const StatsT<S>& prior, FlowT<S>& flow,
            Ref<S> spk, Ref<S> noise_q, Ref<S> noise_p) {
    const S inv_numel = S(1.0 / double(posterior.mu->value.numel()));

    Ref<S> z_q = reparam_sample(g, posterior, noise_q, S(1));
    LatentT<S> inv = flow.inverse(g, z_q, spk);
    Ref<S> term_q = g.sub(g.sub(gaussian_nll(g, inv.z, prior), gaussian_nll(g, z_q, posterior)),
                          g.scale(inv.log_det, inv_numel));

    Ref<S> z_p = reparam_sample(g, prior, noise_p, S(1));
    LatentT<S> fwd = flow.forward(g, z_p, spk);
    Ref<S> term_p = g.sub(g.sub(gaussian_nll(g, fwd.z, posterior), gaussian_nll(g, z_p, prior)),
                          g.scale(fwd.log_det, inv_numel));

    return g.add(term_q, term_p);
}

// Sum over resolutions of spectral convergence + log-magnitude L1,
// magnitudes floored at 1e-5.
template <class S>
Ref<S> l_stft(GraphT<S>& g, Ref<S> real, Ref<S> fake,
              const std::vector<StftResolution>& resolutions = default_stft_resolutions()) {
    if (real->value.shape != fake->value.shape)
        throw ValidationError("l_stft: length mismatch");
    double energy = 0.0;
    for (S x : real->value.data) energy += double(x) * double(x);
    if (energy == 0.0)
        throw ValidationError("l_stft: all-zero real signal (spectral convergence undefined)");

    Ref<S> total = g.constant_scalar(S(0));
    for (const auto& res : resolutions) {
        const auto win = hann_window(res.n_fft);
        Ref<S> rm = g.clamp_min(g.stft_mag(real, res.n_fft, res.hop, win), S(1e-5));
        Ref<S> fm = g.clamp_min(g.stft_mag(fake, res.n_fft, res.hop, win), S(1e-5));
        Ref<S> d = g.sub(rm, fm);
        double norm_r = 0.0;
        for (S x : rm->value.data) norm_r += double(x) * double(x);
        Ref<S> sc = g.scale(g.sqrt_(g.add_scalar(g.sum(g.mul(d, d)), S(1e-20))),
                            S(1.0 / std::sqrt(norm_r)));
        Ref<S> lg = g.mean(g.abs_(g.sub(g.log_(rm), g.log_(fm))));
        total = g.add(total, g.add(sc, lg));
    }
    return total;
}

namespace detail {
template <class S>
int64_t total_elems(const std::vector<Ref<S>>& maps) {
    int64_t n = 0;
    for (const auto& m : maps) n += m->value.numel();
    return n;
}
}  // namespace detail

// Mean over all score elements of (1-D(a))^2 + D(a')^2 (Lsgan orientation).
template <class S>
Ref<S> l_dis(GraphT<S>& g, const std::vector<Ref<S>>& real_scores, const std::vector<Ref<S>>& fake_scores,
             DisOrientation orientation = DisOrientation::Lsgan) {
    if (real_scores.size() != fake_scores.size())
        throw ValidationError("l_dis: score list length mismatch (" + std::to_string(real_scores.size()) +
                              " vs " + std::to_string(fake_scores.size()) + ")");
    if (real_scores.empty()) throw ValidationError("l_dis: empty score lists");
    const int64_t n = detail::total_elems(real_scores);
    Ref<S> acc = g.constant_scalar(S(0));
    for (size_t i = 0; i < real_scores.size(); ++i) {
        Ref<S> r = real_scores[i], f = fake_scores[i];
        Ref<S> real_term, fake_term;
        if (orientation == DisOrientation::Lsgan) {
            Ref<S> rd = g.add_scalar(g.neg(r), S(1));  // 1 - D(a)
            real_term = g.sum(g.mul(rd, rd));
            fake_term = g.sum(g.mul(f, f));
        } else {
            Ref<S> fd = g.add_scalar(g.neg(f), S(1));
            real_term = g.sum(g.mul(r, r));
            fake_term = g.sum(g.mul(fd, fd));
        }
        acc = g.add(acc, g.add(real_term, fake_term));
    }
    return g.scale(acc, S(1.0 / double(n)));
}

// Mean of (1 - D(a'))^2.
template <class S>
Ref<S> l_adv(GraphT<S>& g, const std::vector<Ref<S>>& fake_scores) {
    if (fake_scores.empty()) throw ValidationError("l_adv: empty score list");
    const int64_t n = detail::total_elems(fake_scores);
    Ref<S> acc = g.constant_scalar(S(0));
    for (const auto& f : fake_scores) {
        Ref<S> d = g.add_scalar(g.neg(f), S(1));
        acc = g.add(acc, g.sum(g.mul(d, d)));
    }
    return g.scale(acc, S(1.0 / double(n)));
}

// Sum over layers of mean|F_real - F_fake|.
template <class S>
Ref<S> l_fmap(GraphT<S>& g, const std::vector<Ref<S>>& real_fmaps, const std::vector<Ref<S>>& fake_fmaps) {
    if (real_fmaps.size() != fake_fmaps.size())
        throw ValidationError("l_fmap: feature-map list length mismatch");
    Ref<S> acc = g.constant_scalar(S(0));
    for (size_t i = 0; i < real_fmaps.size(); ++i) {
        if (real_fmaps[i]->value.shape != fake_fmaps[i]->value.shape)
            throw ValidationError("l_fmap: shape mismatch at layer " + std::to_string(i));
        acc = g.add(acc, g.mean(g.abs_(g.sub(real_fmaps[i], fake_fmaps[i]))));
    }
    return acc;
}

// alpha*(l_wav + l_mel) + beta*l_kl + w_adv*l_adv + w_fmap*l_fmap + gamma*l_stft
template <class S>
Ref<S> l_gen(GraphT<S>& g, Ref<S> wav, Ref<S> mel, Ref<S> kl, Ref<S> adv, Ref<S> fmap, Ref<S> stft,
             const LossWeights& w) {
    auto check = [](const Ref<S>& r, const char* name) {
        if (!std::isfinite(double(r->value.scalar_value())))
            throw NumericError(std::string("l_gen: non-finite component ") + name);
    };
    check(wav, "l_wav");
    check(mel, "l_mel");
    check(kl, "l_kl");
    check(adv, "l_adv");
    check(fmap, "l_fmap");
    check(stft, "l_stft");
    Ref<S> total = g.scale(g.add(wav, mel), S(w.alpha));
    total = g.add(total, g.scale(kl, S(w.beta)));
    total = g.add(total, g.scale(adv, S(w.w_adv)));
    total = g.add(total, g.scale(fmap, S(w.w_fmap)));
    total = g.add(total, g.scale(stft, S(w.gamma)));
    return total;
}

}  // namespace svc
