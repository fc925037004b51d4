#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <numeric>

#include "doctest.h"
#include "helpers.hpp"
#include "svc/errors.hpp"
#include "svc/speaker.hpp"

using namespace svc;
using namespace testutil;

namespace {

SpeakerEmbedding unit(std::vector<float> v) {
    double n = 0.0;
    for (float x : v) n += double(x) * x;
    n = std::sqrt(n);
    for (auto& x : v) x = float(x / n);
    SpeakerEmbedding e;
    e.v = std::move(v);
    return e;
}

SpeakerEmbedding random_unit(int dim, Rng& rng) {
    std::vector<float> v(size_t(dim), 0.0f);
    for (auto& x : v) x = float(rng.gaussian());
    return unit(std::move(v));
}

double norm_of(const SpeakerEmbedding& e) {
    double n = 0.0;
    for (float x : e.v) n += double(x) * x;
    return std::sqrt(n);
}

}  // namespace

TEST_CASE("encoder output is unit norm and deterministic") {
    SpeakerEncoder enc;
    enc.init(3, 80, 64);
    const MelSpectrogram mel = log_mel(noise(0.4, 32000, 8), SpectroConfig{});
    const SpeakerEmbedding a = enc.encode(mel);
    const SpeakerEmbedding b = enc.encode(mel);
    REQUIRE(a.dim() == 64);
    CHECK(std::fabs(norm_of(a) - 1.0) < 1e-6);
    CHECK(a.v == b.v);
}

TEST_CASE("encoder is invariant to frame permutation") {
    SpeakerEncoder enc;
    enc.init(3, 80, 64);
    MelSpectrogram mel = log_mel(noise(0.5, 32000, 12), SpectroConfig{});
    const SpeakerEmbedding a = enc.encode(mel);
    std::reverse(mel.frames.begin(), mel.frames.end());
    std::rotate(mel.frames.begin(), mel.frames.begin() + 7, mel.frames.end());
    const SpeakerEmbedding b = enc.encode(mel);
    for (int i = 0; i < a.dim(); ++i) CHECK(std::fabs(a.v[size_t(i)] - b.v[size_t(i)]) < 1e-6);
}

TEST_CASE("distinct clips give distinct embeddings") {
    SpeakerEncoder enc;
    enc.init(3, 80, 64);
    const SpeakerEmbedding a = enc.encode(log_mel(sine(220.0, 0.4, 32000, 0.7), SpectroConfig{}));
    const SpeakerEmbedding b = enc.encode(log_mel(noise(0.4, 32000, 5), SpectroConfig{}));
    CHECK(cosine_similarity(a, b) < 1.0f - 1e-6f);
}

TEST_CASE("encoder rejects too-short and wrong-band input") {
    SpeakerEncoder enc;
    enc.init(1);
    MelSpectrogram one;
    one.frames = {std::vector<float>(80, -1.0f)};
    CHECK_THROWS_AS(enc.encode(one), ValidationError);
    MelSpectrogram bad;
    bad.frames = {std::vector<float>(40, 0.0f), std::vector<float>(40, 0.0f)};
    CHECK_THROWS_AS(enc.encode(bad), ValidationError);
}

TEST_CASE("store add preserves order and rejects duplicates and dim mixing") {
    EmbeddingStore store;
    store.add("a", unit({1, 0}));
    store.add("b", unit({0, 1}));
    store.add("c", unit({1, 1}));
    REQUIRE(store.size() == 3);
    CHECK(store.entries[0].first == "a");
    CHECK(store.entries[2].first == "c");
    CHECK_THROWS_AS(store.add("a", unit({1, 1})), ValidationError);
    CHECK_THROWS_AS(store.add("d", unit({1, 1, 1})), ValidationError);
}

TEST_CASE("build_store keeps input order and is deterministic") {
    SpeakerEncoder enc;
    enc.init(9, 80, 32);
    std::vector<std::pair<std::string, AudioClip>> items;
    items.emplace_back("x", noise(0.3, 32000, 1));
    items.emplace_back("y", noise(0.3, 32000, 2));
    const SpectroConfig cfg;
    const EmbeddingStore s1 = build_store(items, enc, cfg);
    const EmbeddingStore s2 = build_store(items, enc, cfg);
    REQUIRE(s1.size() == 2);
    CHECK(s1.entries[0].first == "x");
    CHECK(s1.entries[1].first == "y");
    CHECK(s1.entries[0].second.v == s2.entries[0].second.v);
    CHECK(s1.entries[1].second.v == s2.entries[1].second.v);
}

TEST_CASE("top_k anchors: ordering, ties, k overflow, empty store") {
    EmbeddingStore store;
    store.add("best", unit({1, 0}));
    store.add("tie1", unit({1, 1}));
    store.add("tie2", unit({1, 1}));
    store.add("anti", unit({-1, 0}));
    SpeakerEmbedding q = unit({1, 0});
    const auto top = top_k(store, q, 3);
    REQUIRE(top.size() == 3);
    CHECK(top[0].first == "best");
    CHECK(top[0].second == doctest::Approx(1.0));
    CHECK(top[1].first == "tie1");
    CHECK(top[2].first == "tie2");
    CHECK(top_k(store, q, 100).size() == 4);
    CHECK(top_k(store, q, 100).back().first == "anti");
    CHECK_THROWS_AS(top_k(EmbeddingStore{}, q, 1), ValidationError);
}

TEST_CASE("top_k matches full-sort brute force on 1000 embeddings") {
    Rng rng(404);
    EmbeddingStore store;
    for (int i = 0; i < 1000; ++i) store.add("e" + std::to_string(i), random_unit(16, rng));
    const SpeakerEmbedding q = random_unit(16, rng);

    std::vector<size_t> order(1000);
    std::iota(order.begin(), order.end(), size_t(0));
    std::vector<float> sims(1000);
    for (size_t i = 0; i < 1000; ++i) sims[i] = cosine_similarity(q, store.entries[i].second);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return sims[a] > sims[b]; });

    for (int k : {1, 3, 10}) {
        const auto top = top_k(store, q, k);
        REQUIRE(int(top.size()) == k);
        for (int i = 0; i < k; ++i) {
            CHECK(top[size_t(i)].first == store.entries[order[size_t(i)]].first);
            CHECK(top[size_t(i)].second == sims[order[size_t(i)]]);
        }
    }
}

TEST_CASE("retrieval_average fixed point and closed forms") {
    EmbeddingStore same;
    same.add("a", unit({3, 4}));
    same.add("b", unit({3, 4}));
    same.add("c", unit({3, 4}));
    const SpeakerEmbedding q = unit({3, 4});
    const SpeakerEmbedding avg = retrieval_average(q, same, 3);
    for (int i = 0; i < 2; ++i) CHECK(std::fabs(avg.v[size_t(i)] - q.v[size_t(i)]) < 1e-6);

    // query (1,0) with single match (0,1): mean renormalizes to (sqrt2/2, sqrt2/2)
    EmbeddingStore ortho;
    ortho.add("o", unit({0, 1}));
    const SpeakerEmbedding mix = retrieval_average(unit({1, 0}), ortho, 1);
    CHECK(std::fabs(mix.v[0] - float(std::sqrt(2.0) / 2.0)) < 1e-6);
    CHECK(std::fabs(mix.v[1] - float(std::sqrt(2.0) / 2.0)) < 1e-6);
    CHECK(std::fabs(norm_of(mix) - 1.0) < 1e-6);

    // store smaller than k: averages whatever exists
    const SpeakerEmbedding small = retrieval_average(unit({1, 0}), ortho, 10);
    CHECK(std::fabs(small.v[0] - float(std::sqrt(2.0) / 2.0)) < 1e-6);

    // query + match cancel -> zero-norm error
    EmbeddingStore anti;
    anti.add("n", unit({-1, 0}));
    CHECK_THROWS_AS(retrieval_average(unit({1, 0}), anti, 1), ValidationError);
}

TEST_CASE("store save/load round trip") {
    TempDir td("spk_store");
    Rng rng(7);
    EmbeddingStore store;
    for (int i = 0; i < 5; ++i) store.add("id" + std::to_string(i), random_unit(8, rng));
    store.save(td.file("store"));
    const EmbeddingStore back = EmbeddingStore::load(td.file("store"));
    REQUIRE(back.size() == 5);
    for (size_t i = 0; i < 5; ++i) {
        CHECK(back.entries[i].first == store.entries[i].first);
        CHECK(back.entries[i].second.v == store.entries[i].second.v);
    }
}

TEST_CASE("encoder checkpoint round trip is bit exact") {
    TempDir td("spk_enc");
    SpeakerEncoder enc;
    enc.init(5, 80, 48);
    enc.frozen = true;
    Checkpoint ckpt;
    enc.save(ckpt);
    save_svck(ckpt, td.file("enc.svck"));

    SpeakerEncoder back;
    back.load(load_svck(td.file("enc.svck")));
    CHECK(back.n_mels == 80);
    CHECK(back.dim == 48);
    CHECK(back.frozen);
    CHECK(back.fc1.w.value.data == enc.fc1.w.value.data);
    CHECK(back.fc2.b.value.data == enc.fc2.b.value.data);

    const MelSpectrogram mel = log_mel(noise(0.3, 32000, 2), SpectroConfig{});
    CHECK(back.encode(mel).v == enc.encode(mel).v);
}
