#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "svc/config.hpp"
#include "svc/dataset.hpp"
#include "svc/errors.hpp"
#include "svc/metrics.hpp"
#include "svc/pipeline.hpp"

namespace fs = std::filesystem;
using namespace svc;

namespace {

AudioClip load_wav_at(const std::string& path, int sample_rate) {
    AudioClip clip = read_wav(path);
    if (clip.sample_rate != sample_rate) clip = resample(clip, sample_rate);
    return clip;
}

std::vector<std::pair<std::string, AudioClip>> load_wav_dir(const std::string& dir, int sample_rate) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".wav")
            paths.push_back(entry.path().string());
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) throw ValidationError("no .wav files in " + dir);
    std::vector<std::pair<std::string, AudioClip>> out;
    for (const auto& p : paths) out.emplace_back(fs::path(p).stem().string(), load_wav_at(p, sample_rate));
    return out;
}

SpeakerEncoder load_encoder(const std::string& path) {
    SpeakerEncoder enc;
    enc.load(load_svck(path), "spk.");
    return enc;
}

ContentFeatures features_of(const std::string& wav_path, const std::string& provider, uint64_t seed,
                            int dim, const SpectroConfig& cfg) {
    if (provider.rfind("file:", 0) == 0) return load_features(provider.substr(5));
    if (provider != "synthetic")
        throw ValidationError("provider must be 'synthetic' or 'file:PATH', got '" + provider + "'");
    const AudioClip clip = load_wav_at(wav_path, cfg.sample_rate);
    return synthetic_content(log_mel(clip, cfg), seed, dim);
}

void write_codes(const std::vector<std::vector<int>>& streams, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write: " + path);
    const size_t t = streams.empty() ? 0 : streams.front().size();
    for (size_t i = 0; i < t; ++i) {
        for (size_t s = 0; s < streams.size(); ++s) out << (s ? " " : "") << streams[s][i];
        out << "\n";
    }
}

ResidualCodebooks load_rvq(const std::string& base) {
    std::ifstream in(base + ".manifest");
    if (!in) throw IoError("cannot open: " + base + ".manifest");
    ResidualCodebooks rvq;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        KMeansCodebook cb;
        cb.centroids = load_svcf(line);
        rvq.stages.push_back(std::move(cb));
    }
    if (rvq.stages.empty()) throw FormatError("empty RVQ manifest: " + base + ".manifest");
    return rvq;
}

int run_verify();

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"flow-based singing voice conversion toolkit"};
    app.require_subcommand(1);

    // features extract / compress
    auto* features = app.add_subcommand("features", "content feature operations");
    features->require_subcommand(1);
    auto* fx = features->add_subcommand("extract", "extract content features from a clip");
    std::string fx_in, fx_out, fx_provider = "synthetic";
    uint64_t fx_seed = 1234;
    int fx_dim = 64;
    fx->add_option("--in", fx_in)->required();
    fx->add_option("--out", fx_out)->required();
    fx->add_option("--provider", fx_provider);
    fx->add_option("--seed", fx_seed);
    fx->add_option("--dim", fx_dim);

    auto* fc = features->add_subcommand("compress", "quantize features against fitted codebooks");
    std::string fc_in, fc_out, fc_codebook, fc_rvq, fc_mode = "tensor";
    fc->add_option("--in", fc_in)->required();
    fc->add_option("--out", fc_out)->required();
    fc->add_option("--codebook", fc_codebook, "k-means codebook .svcf");
    fc->add_option("--rvq", fc_rvq, "RVQ codebook base path");
    fc->add_option("--mode", fc_mode)->check(CLI::IsMember({"tensor", "codes"}));

    auto* km = app.add_subcommand("kmeans", "k-means codebooks");
    km->require_subcommand(1);
    auto* kmf = km->add_subcommand("fit", "fit a codebook");
    std::string km_in, km_out;
    int km_k = 64, km_iters = 25;
    uint64_t km_seed = 1;
    kmf->add_option("--in", km_in)->required();
    kmf->add_option("--out", km_out)->required();
    kmf->add_option("--k", km_k);
    kmf->add_option("--iters", km_iters);
    kmf->add_option("--seed", km_seed);

    auto* rvq = app.add_subcommand("rvq", "residual vector quantization");
    rvq->require_subcommand(1);
    auto* rvqf = rvq->add_subcommand("fit", "fit stage-wise codebooks");
    std::string rvq_in, rvq_out;
    int rvq_stages = 4, rvq_codes = 64, rvq_iters = 25;
    uint64_t rvq_seed = 1;
    rvqf->add_option("--in", rvq_in)->required();
    rvqf->add_option("--out", rvq_out, "base path; writes <base>.stage<i>.svcf + <base>.manifest")->required();
    rvqf->add_option("--stages", rvq_stages);
    rvqf->add_option("--codes", rvq_codes);
    rvqf->add_option("--iters", rvq_iters);
    rvqf->add_option("--seed", rvq_seed);

    auto* store_cmd = app.add_subcommand("store", "speaker embedding stores");
    store_cmd->require_subcommand(1);
    auto* sb = store_cmd->add_subcommand("build", "embed every WAV in a directory");
    std::string sb_dir, sb_enc, sb_out;
    sb->add_option("--dir", sb_dir)->required();
    sb->add_option("--encoder", sb_enc)->required();
    sb->add_option("--out", sb_out)->required();

    auto* tr = app.add_subcommand("train", "run the training loop");
    std::string tr_cfg, tr_data, tr_out;
    tr->add_option("--config", tr_cfg)->required();
    tr->add_option("--data", tr_data)->required();
    tr->add_option("--out", tr_out)->required();

    auto* cv = app.add_subcommand("convert", "convert a source clip to a reference timbre");
    std::string cv_src, cv_ref, cv_model, cv_store, cv_out;
    bool cv_retrieval = false;
    int cv_topk = 3;
    double cv_transpose = 0.0, cv_temperature = 0.8;
    uint64_t cv_seed = 0;
    cv->add_option("--source", cv_src)->required();
    cv->add_option("--reference", cv_ref)->required();
    cv->add_option("--model", cv_model)->required();
    cv->add_option("--out", cv_out)->required();
    cv->add_flag("--retrieval", cv_retrieval);
    cv->add_option("--store", cv_store);
    cv->add_option("--topk", cv_topk);
    cv->add_option("--transpose", cv_transpose);
    cv->add_option("--temperature", cv_temperature);
    cv->add_option("--seed", cv_seed);

    auto* ev = app.add_subcommand("eval", "objective metrics for a converted clip");
    std::string ev_conv, ev_src, ev_ref, ev_enc;
    ev->add_option("--converted", ev_conv)->required();
    ev->add_option("--source", ev_src)->required();
    ev->add_option("--reference", ev_ref)->required();
    ev->add_option("--encoder", ev_enc)->required();

    auto* vf = app.add_subcommand("verify", "run the built-in invariant checks");

    auto* enc_cmd = app.add_subcommand("encoder", "speaker encoder utilities");
    enc_cmd->require_subcommand(1);
    auto* ei = enc_cmd->add_subcommand("init", "write a freshly seeded encoder checkpoint");
    std::string ei_out;
    uint64_t ei_seed = 99;
    int ei_mels = 80, ei_dim = 256;
    ei->add_option("--out", ei_out)->required();
    ei->add_option("--seed", ei_seed);
    ei->add_option("--n-mels", ei_mels);
    ei->add_option("--dim", ei_dim);

    auto* ds = app.add_subcommand("dataset", "bundled synthetic dataset");
    ds->require_subcommand(1);
    auto* dss = ds->add_subcommand("synth", "write seeded synthetic clips");
    std::string ds_out;
    SynthSpec ds_spec;
    dss->add_option("--out", ds_out)->required();
    dss->add_option("--speakers", ds_spec.n_speakers);
    dss->add_option("--clips", ds_spec.clips_per_speaker);
    dss->add_option("--seconds", ds_spec.duration_sec);
    dss->add_option("--sample-rate", ds_spec.sample_rate);
    dss->add_option("--seed", ds_spec.seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (fx->parsed()) {
            SpectroConfig cfg;
            ContentFeatures f = features_of(fx_in, fx_provider, fx_seed, fx_dim, cfg);
            save_features(f, fx_out);
            std::cout << f.n_frames() << "x" << f.dim() << "\n";
        } else if (fc->parsed()) {
            if (fc_codebook.empty() == fc_rvq.empty())
                throw ValidationError("features compress: pass exactly one of --codebook / --rvq");
            ContentFeatures f;
            f.frames = load_svcf(fc_in);
            if (!fc_codebook.empty()) {
                KMeansCodebook cb;
                cb.centroids = load_svcf(fc_codebook);
                if (fc_mode == "tensor")
                    save_features(kmeans_quantize_tensor(f, cb), fc_out);
                else
                    write_codes({kmeans_quantize_codes(f, cb)}, fc_out);
            } else {
                ResidualCodebooks r = load_rvq(fc_rvq);
                if (fc_mode == "tensor")
                    save_features(rvq_encode_tensor(f, r), fc_out);
                else
                    write_codes(rvq_encode_codes(f, r), fc_out);
            }
        } else if (kmf->parsed()) {
            const MatF data = load_svcf(km_in);
            const KMeansCodebook cb = kmeans_fit(data, km_k, km_iters, km_seed);
            save_svcf(cb.centroids, km_out);
            std::cout << "k=" << cb.k() << " inertia=" << cb.final_inertia << "\n";
        } else if (rvqf->parsed()) {
            const MatF data = load_svcf(rvq_in);
            const ResidualCodebooks r = rvq_fit(data, rvq_stages, rvq_codes, rvq_iters, rvq_seed);
            std::ofstream manifest(rvq_out + ".manifest", std::ios::binary);
            if (!manifest) throw IoError("cannot write: " + rvq_out + ".manifest");
            for (int s = 0; s < r.n_stages(); ++s) {
                const std::string p = rvq_out + ".stage" + std::to_string(s) + ".svcf";
                save_svcf(r.stages[size_t(s)].centroids, p);
                manifest << p << "\n";
            }
        } else if (sb->parsed()) {
            SpectroConfig cfg;
            const SpeakerEncoder enc = load_encoder(sb_enc);
            cfg.n_mels = enc.n_mels;
            const auto clips = load_wav_dir(sb_dir, cfg.sample_rate);
            build_store(clips, enc, cfg).save(sb_out);
            std::cout << clips.size() << " embeddings\n";
        } else if (tr->parsed()) {
            const TrainConfig cfg = parse_run_config(tr_cfg);
            const auto clips = load_wav_dir(tr_data, cfg.spectro.sample_rate);
            const std::string final_path = train(clips, cfg, tr_out);
            std::cout << final_path << "\n";
        } else if (cv->parsed()) {
            if (cv_retrieval && cv_store.empty()) {
                std::cerr << "convert: --retrieval requires --store\n";
                return 1;
            }
            TrainState state = load_checkpoint(cv_model);
            const int sr = state.cfg.spectro.sample_rate;
            const AudioClip src = load_wav_at(cv_src, sr);
            const AudioClip ref = load_wav_at(cv_ref, sr);
            ConvertOptions opts;
            opts.retrieval = cv_retrieval;
            opts.k = cv_topk;
            opts.temperature = float(cv_temperature);
            opts.transpose_semitones = cv_transpose;
            opts.seed = cv_seed;
            EmbeddingStore store;
            if (cv_retrieval) store = EmbeddingStore::load(cv_store);
            const AudioClip out = convert(src, ref, state, opts, cv_retrieval ? &store : nullptr);
            write_wav(out, cv_out);
        } else if (ev->parsed()) {
            const SpeakerEncoder enc = load_encoder(ev_enc);
            SpectroConfig cfg;
            cfg.n_mels = enc.n_mels;
            const AudioClip conv_clip = load_wav_at(ev_conv, cfg.sample_rate);
            const AudioClip src = load_wav_at(ev_src, cfg.sample_rate);
            const AudioClip ref = load_wav_at(ev_ref, cfg.sample_rate);
            std::cout << format_report(evaluate(conv_clip, src, ref, enc, cfg));
        } else if (vf->parsed()) {
            return run_verify();
        } else if (ei->parsed()) {
            SpeakerEncoder enc;
            enc.init(ei_seed, ei_mels, ei_dim);
            Checkpoint ckpt;
            enc.save(ckpt, "spk.");
            save_svck(ckpt, ei_out);
        } else if (dss->parsed()) {
            fs::create_directories(ds_out);
            for (const auto& [id, clip] : synth_dataset(ds_spec))
                write_wav(clip, ds_out + "/" + id + ".wav");
        }
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}

namespace {

int run_verify() {
    int failures = 0;
    auto check = [&](const std::string& name, bool ok) {
        std::cout << (ok ? "PASS " : "FAIL ") << name << "\n";
        if (!ok) ++failures;
    };

    // gradient spot check: conv -> tanh -> mean through a linear head
    {
        Rng rng(5);
        Conv1dT<float> conv;
        conv.init("c", rng, 2, 3, 3, 1, 1);
        LinearT<float> lin;
        lin.init("l", rng, 3, 2);
        Tensor x(std::vector<int>{2, 7});
        for (auto& v : x.data) v = float(rng.uniform(-1.0, 1.0));
        std::vector<Param*> ps;
        conv.params(ps);
        lin.params(ps);
        auto fn = [&](bool with_grad) {
            Graph g;
            NodeRef out = g.mean(g.tanh_(lin.forward(g, g.tanh_(conv.forward(g, g.constant(x))))));
            if (with_grad) g.backward(out);
            return double(out->value.scalar_value());
        };
        check("grad_check conv+linear < 1e-2", grad_check<float>(fn, ps) < 1e-2);
    }

    // flow round trip
    {
        Rng rng(11);
        ModelConfig mc;
        mc.d_z = 8;
        mc.flow_hidden = 16;
        FlowT<float> flow;
        flow.init("f", rng, mc);
        // perturb away from identity
        std::vector<Param*> ps;
        flow.params(ps);
        for (Param* p : ps)
            for (auto& v : p->value.data) v += float(rng.uniform(-0.05, 0.05));
        Graph g;
        Tensor z(std::vector<int>{8, 6});
        for (auto& v : z.data) v = float(rng.gaussian());
        NodeRef zn = g.constant(z);
        Tensor spk(std::vector<int>{256, 1});
        for (auto& v : spk.data) v = float(rng.gaussian() * 0.1);
        NodeRef s = g.constant(spk);
        auto fwd = flow.forward(g, zn, s);
        auto back = flow.inverse(g, fwd.z, s);
        double max_abs = 0.0, ld = 0.0;
        for (size_t i = 0; i < z.data.size(); ++i)
            max_abs = std::max(max_abs, std::fabs(double(back.z->value.data[i]) - double(z.data[i])));
        ld = std::fabs(double(fwd.log_det->value.scalar_value()) +
                       double(back.log_det->value.scalar_value()));
        check("flow inverse(forward(z)) = z within 1e-4", max_abs < 1e-4);
        check("flow log-det antisymmetry within 1e-5", ld < 1e-5);
    }

    // retrieval vs brute force
    {
        Rng rng(17);
        EmbeddingStore store;
        std::vector<SpeakerEmbedding> all;
        for (int i = 0; i < 200; ++i) {
            SpeakerEmbedding e;
            e.v.resize(16);
            double n = 0;
            for (auto& v : e.v) {
                v = float(rng.gaussian());
                n += double(v) * v;
            }
            for (auto& v : e.v) v = float(v / std::sqrt(n));
            store.add("id" + std::to_string(i), e);
            all.push_back(e);
        }
        SpeakerEmbedding q = all[7];
        auto got = top_k(store, q, 3);
        std::vector<std::pair<float, std::string>> brute;
        for (int i = 0; i < 200; ++i)
            brute.emplace_back(cosine_similarity(q, all[size_t(i)]), "id" + std::to_string(i));
        std::stable_sort(brute.begin(), brute.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        bool ok = got.size() == 3;
        for (size_t i = 0; ok && i < 3; ++i) ok = got[i].first == brute[i].second;
        check("top_k matches brute-force sort", ok);
    }

    // loss anchors
    {
        Graph g;
        LossWeights w;
        NodeRef one = g.constant_scalar(1.0f);
        const double composite =
            double(l_gen(g, one, one, one, one, one, one, w)->value.scalar_value());
        check("composite loss of unit components = 13.2", std::fabs(composite - 13.2) < 1e-6);

        StatsT<float> s1{g.constant(Tensor({1}, 1.0f)), g.constant(Tensor({1}, 0.0f))};
        StatsT<float> s2{g.constant(Tensor({1}, 0.0f)), g.constant(Tensor({1}, 0.0f))};
        check("gaussian_kl(N(1,1),N(0,1)) = 0.5",
              std::fabs(double(gaussian_kl(g, s1, s2)->value.scalar_value()) - 0.5) < 1e-6);

        std::vector<NodeRef> ones = {g.constant(Tensor({4}, 1.0f))};
        std::vector<NodeRef> zeros = {g.constant(Tensor({4}, 0.0f))};
        std::vector<NodeRef> halves = {g.constant(Tensor({4}, 0.5f))};
        check("perfect-case discriminator loss = 0",
              std::fabs(double(l_dis(g, ones, zeros)->value.scalar_value())) < 1e-6);
        check("adversarial loss at 0.5 = 0.25",
              std::fabs(double(l_adv(g, halves)->value.scalar_value()) - 0.25) < 1e-6);
    }

    std::cout << (failures == 0 ? "all checks passed" : std::to_string(failures) + " checks failed")
              << "\n";
    return failures == 0 ? 0 : 3;
}

}  // namespace
