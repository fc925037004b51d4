#include "svc/speaker.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "svc/errors.hpp"

namespace svc {

float cosine_similarity(const SpeakerEmbedding& a, const SpeakerEmbedding& b) {
    if (a.dim() != b.dim()) throw ValidationError("cosine_similarity: dim mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int i = 0; i < a.dim(); ++i) {
        dot += double(a.v[size_t(i)]) * b.v[size_t(i)];
        na += double(a.v[size_t(i)]) * a.v[size_t(i)];
        nb += double(b.v[size_t(i)]) * b.v[size_t(i)];
    }
    return float(dot / std::max(std::sqrt(na) * std::sqrt(nb), 1e-12));
}

void SpeakerEncoder::init(uint64_t seed, int n_mels_, int dim_) {
    n_mels = n_mels_;
    dim = dim_;
    Rng rng(seed);
    fc1.init("fc1", rng, 2 * n_mels, dim);
    fc2.init("fc2", rng, dim, dim);
}

NodeRef SpeakerEncoder::forward(Graph& g, NodeRef mel) {
    if (mel->value.rows() != n_mels)
        throw ValidationError("speaker encoder expects " + std::to_string(n_mels) + " mel bands");
    if (mel->value.cols() < 2)
        throw ValidationError("speaker encoder needs at least 2 frames for std pooling");
    NodeRef mu = g.mean_cols(mel);                       // (n_mels, 1)
    NodeRef diff = g.sub_col(mel, g.flatten(mu));
    NodeRef var = g.mean_cols(g.mul(diff, diff));
    NodeRef sd = g.sqrt_(g.add_scalar(var, 1e-6f));
    NodeRef pooled = g.concat_rows(mu, sd);              // (2*n_mels, 1)
    NodeRef h = g.tanh_(fc1.forward(g, pooled));
    NodeRef e = fc2.forward(g, h);
    NodeRef norm = g.sqrt_(g.add_scalar(g.sum(g.mul(e, e)), 1e-12f));
    return g.div_by_scalar(e, norm);
}

SpeakerEmbedding SpeakerEncoder::encode(const MelSpectrogram& mel) const {
    Graph g;
    Tensor m(std::vector<int>{n_mels, mel.n_frames()});
    for (int t = 0; t < mel.n_frames(); ++t) {
        if (int(mel.frames[size_t(t)].size()) != n_mels)
            throw ValidationError("speaker encoder expects " + std::to_string(n_mels) + " mel bands");
        for (int b = 0; b < n_mels; ++b) m.at(b, t) = mel.frames[size_t(t)][size_t(b)];
    }
    // const_cast is safe: forward only reads parameter values here.
    NodeRef out = const_cast<SpeakerEncoder*>(this)->forward(g, g.constant(std::move(m)));
    SpeakerEmbedding e;
    e.v = out->value.data;
    return e;
}

void SpeakerEncoder::params(std::vector<Param*>& out) {
    fc1.params(out);
    fc2.params(out);
}

void SpeakerEncoder::save(Checkpoint& ckpt, const std::string& prefix) const {
    auto* self = const_cast<SpeakerEncoder*>(this);
    std::vector<Param*> ps;
    self->params(ps);
    ckpt.add(prefix + "meta", {3},
             {float(n_mels), float(dim), frozen ? 1.0f : 0.0f});
    for (Param* p : ps) ckpt.add(prefix + p->name, p->value.shape, p->value.data);
}

void SpeakerEncoder::load(const Checkpoint& ckpt, const std::string& prefix) {
    const auto& meta = ckpt.require(prefix + "meta");
    init(0, int(meta.data[0]), int(meta.data[1]));
    frozen = meta.data[2] != 0.0f;
    std::vector<Param*> ps;
    params(ps);
    for (Param* p : ps) {
        const auto& t = ckpt.require(prefix + p->name);
        if (t.shape != p->value.shape)
            throw FormatError("tensor " + p->name + " has unexpected shape");
        p->value.data = t.data;
    }
}

void EmbeddingStore::add(const std::string& id, SpeakerEmbedding e) {
    for (const auto& [eid, _] : entries)
        if (eid == id) throw ValidationError("duplicate speaker id: " + id);
    if (!entries.empty() && entries.front().second.dim() != e.dim())
        throw ValidationError("embedding dim mismatch in store");
    entries.emplace_back(id, std::move(e));
}

void EmbeddingStore::save(const std::string& base_path) const {
    const int d = entries.empty() ? 0 : entries.front().second.dim();
    MatF m(int(entries.size()), d);
    std::string ids;
    for (size_t i = 0; i < entries.size(); ++i) {
        for (int j = 0; j < d; ++j) m.at(int(i), j) = entries[i].second.v[size_t(j)];
        ids += entries[i].first + "\n";
    }
    save_svcf(m, base_path + ".svcf");
    std::ofstream out(base_path + ".ids", std::ios::binary);
    if (!out) throw IoError("cannot write: " + base_path + ".ids");
    out << ids;
}

EmbeddingStore EmbeddingStore::load(const std::string& base_path) {
    MatF m = load_svcf(base_path + ".svcf");
    std::ifstream in(base_path + ".ids");
    if (!in) throw IoError("cannot open: " + base_path + ".ids");
    EmbeddingStore store;
    std::string id;
    int row = 0;
    while (std::getline(in, id)) {
        if (id.empty()) continue;
        if (row >= m.rows) throw FormatError("more ids than embedding rows: " + base_path);
        SpeakerEmbedding e;
        e.v.assign(m.data.begin() + ptrdiff_t(row) * m.cols, m.data.begin() + ptrdiff_t(row + 1) * m.cols);
        store.add(id, std::move(e));
        ++row;
    }
    if (row != m.rows) throw FormatError("fewer ids than embedding rows: " + base_path);
    return store;
}

EmbeddingStore build_store(const std::vector<std::pair<std::string, AudioClip>>& items,
                           const SpeakerEncoder& enc, const SpectroConfig& cfg) {
    EmbeddingStore store;
    for (const auto& [id, clip] : items) store.add(id, enc.encode(log_mel(clip, cfg)));
    return store;
}

std::vector<std::pair<std::string, float>> top_k(const EmbeddingStore& store,
                                                 const SpeakerEmbedding& query, int k) {
    if (store.entries.empty()) throw ValidationError("top_k: empty store");
    std::vector<std::pair<float, size_t>> scored;
    scored.reserve(store.size());
    for (size_t i = 0; i < store.size(); ++i)
        scored.emplace_back(cosine_similarity(query, store.entries[i].second), i);
    // descending similarity, ties by insertion order
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    const size_t n = std::min(size_t(std::max(k, 0)), scored.size());
    std::vector<std::pair<std::string, float>> out;
    out.reserve(n);
    for (size_t i = 0; i < n; ++i)
        out.emplace_back(store.entries[scored[i].second].first, scored[i].first);
    return out;
}

SpeakerEmbedding retrieval_average(const SpeakerEmbedding& query, const EmbeddingStore& store, int k) {
    const auto matches = top_k(store, query, k);
    std::vector<double> acc(query.v.begin(), query.v.end());
    for (const auto& [id, sim] : matches) {
        (void)sim;
        for (const auto& entry : store.entries)
            if (entry.first == id) {
                for (size_t i = 0; i < acc.size(); ++i) acc[i] += entry.second.v[i];
                break;
            }
    }
    const double denom = double(matches.size()) + 1.0;
    double norm = 0.0;
    for (auto& x : acc) {
        x /= denom;
        norm += x * x;
    }
    norm = std::sqrt(norm);
    if (norm < 1e-9) throw ValidationError("retrieval_average: averaged embedding has zero norm");
    SpeakerEmbedding out;
    out.v.resize(acc.size());
    for (size_t i = 0; i < acc.size(); ++i) out.v[i] = float(acc[i] / norm);
    return out;
}

}  // namespace svc
