#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <limits>

#include "doctest.h"
#include "helpers.hpp"
#include "svc/content.hpp"
#include "svc/dsp.hpp"
#include "svc/errors.hpp"

using namespace svc;
using namespace testutil;

namespace {

MatF random_mat(int n, int d, uint64_t seed, double scale = 1.0) {
    MatF m(n, d);
    Rng rng(seed);
    for (auto& v : m.data) v = float(scale * rng.gaussian());
    return m;
}

}  // namespace

TEST_CASE("svcf round trip and format errors") {
    TempDir td("content_io");
    ContentFeatures f;
    f.frames = random_mat(13, 7, 3);
    save_features(f, td.file("f.svcf"));
    const ContentFeatures back = load_features(td.file("f.svcf"));
    REQUIRE(back.n_frames() == 13);
    REQUIRE(back.dim() == 7);
    CHECK(back.frames.data == f.frames.data);

    write_bytes(td.file("empty.svcf"), {});
    CHECK_THROWS_AS(load_features(td.file("empty.svcf")), FormatError);

    auto bytes = read_bytes(td.file("f.svcf"));
    bytes.resize(bytes.size() - 5);  // truncate payload below rows*cols
    write_bytes(td.file("trunc.svcf"), bytes);
    CHECK_THROWS_AS(load_features(td.file("trunc.svcf")), FormatError);
}

TEST_CASE("synthetic content is deterministic and standardized") {
    SpectroConfig cfg;
    const MelSpectrogram mel = log_mel(noise(0.4, 32000, 11, 0.5), cfg);
    const ContentFeatures a = synthetic_content(mel, 99, 24);
    const ContentFeatures b = synthetic_content(mel, 99, 24);
    CHECK(a.frames.data == b.frames.data);
    CHECK(a.n_frames() == mel.n_frames());
    CHECK(a.dim() == 24);

    for (int j = 0; j < a.dim(); ++j) {
        double mean = 0.0, var = 0.0;
        for (int t = 0; t < a.n_frames(); ++t) mean += a.frames.at(t, j);
        mean /= a.n_frames();
        for (int t = 0; t < a.n_frames(); ++t) {
            const double d = a.frames.at(t, j) - mean;
            var += d * d;
        }
        var /= a.n_frames();
        CHECK(std::fabs(mean) < 1e-6);
        CHECK(std::fabs(std::sqrt(var) - 1.0) < 1e-6);
    }
}

TEST_CASE("concat_features shape laws") {
    ContentFeatures a, b, c;
    a.frames = random_mat(10, 4, 1);
    b.frames = random_mat(12, 6, 2);
    c.frames = random_mat(11, 3, 3);
    const ContentFeatures ab = concat_features(a, b);
    CHECK(ab.n_frames() == 10);
    CHECK(ab.dim() == 10);
    const ContentFeatures aa = concat_features(a, a);
    for (int t = 0; t < 10; ++t)
        for (int j = 0; j < 4; ++j) {
            CHECK(aa.frames.at(t, j) == a.frames.at(t, j));
            CHECK(aa.frames.at(t, j + 4) == a.frames.at(t, j));
        }
    CHECK(concat_features(ab, c).dim() == 4 + 6 + 3);
}

TEST_CASE("kmeans separated clusters recovered exactly") {
    MatF data(20, 2);
    for (int i = 0; i < 10; ++i) {
        data.at(i, 0) = 0.0f;
        data.at(i, 1) = 0.0f;
        data.at(10 + i, 0) = 10.0f;
        data.at(10 + i, 1) = 10.0f;
    }
    const KMeansCodebook cb = kmeans_fit(data, 2, 25, 4);
    REQUIRE(cb.k() == 2);
    const bool a0 = cb.centroids.at(0, 0) == 0.0f;
    const int z = a0 ? 0 : 1, t = a0 ? 1 : 0;
    CHECK(cb.centroids.at(z, 0) == 0.0f);
    CHECK(cb.centroids.at(z, 1) == 0.0f);
    CHECK(cb.centroids.at(t, 0) == 10.0f);
    CHECK(cb.centroids.at(t, 1) == 10.0f);
}

TEST_CASE("kmeans k=1 gives the data mean, N<k rejected") {
    const MatF data = random_mat(50, 3, 8);
    const KMeansCodebook cb = kmeans_fit(data, 1, 10, 1);
    for (int j = 0; j < 3; ++j) {
        double mean = 0.0;
        for (int i = 0; i < 50; ++i) mean += data.at(i, j);
        mean /= 50.0;
        CHECK(cb.centroids.at(0, j) == doctest::Approx(mean).epsilon(1e-5));
    }
    CHECK_THROWS_AS(kmeans_fit(random_mat(3, 2, 1), 5, 10, 1), ValidationError);
}

TEST_CASE("kmeans inertia trace is non-increasing") {
    const MatF data = random_mat(300, 6, 123);
    std::vector<double> trace;
    const KMeansCodebook cb = kmeans_fit(data, 8, 30, 9, &trace);
    REQUIRE(!trace.empty());
    for (size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] + 1e-9);
    CHECK(cb.final_inertia == doctest::Approx(trace.back()));
    // determinism
    const KMeansCodebook cb2 = kmeans_fit(data, 8, 30, 9);
    CHECK(cb.centroids.data == cb2.centroids.data);
}

TEST_CASE("quantization matches the brute-force nearest-neighbor oracle") {
    const MatF data = random_mat(400, 5, 31);
    const KMeansCodebook cb = kmeans_fit(data, 16, 20, 2);
    ContentFeatures f;
    f.frames = random_mat(1000, 5, 77);
    const auto codes = kmeans_quantize_codes(f, cb);
    const ContentFeatures q = kmeans_quantize_tensor(f, cb);
    REQUIRE(int(codes.size()) == 1000);
    for (int i = 0; i < 1000; ++i) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int c = 0; c < cb.k(); ++c) {
            double d = 0.0;
            for (int j = 0; j < 5; ++j) {
                const double x = double(f.frames.at(i, j)) - double(cb.centroids.at(c, j));
                d += x * x;
            }
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        REQUIRE(codes[size_t(i)] == best);
        for (int j = 0; j < 5; ++j) CHECK(q.frames.at(i, j) == cb.centroids.at(best, j));
    }
    // idempotence and exact-match routing
    const ContentFeatures qq = kmeans_quantize_tensor(q, cb);
    CHECK(qq.frames.data == q.frames.data);
    ContentFeatures one;
    one.frames = MatF(1, 5);
    for (int j = 0; j < 5; ++j) one.frames.at(0, j) = cb.centroids.at(3, j);
    CHECK(kmeans_quantize_codes(one, cb)[0] == 3);

    ContentFeatures wrong;
    wrong.frames = random_mat(4, 7, 5);
    CHECK_THROWS_AS(kmeans_quantize_codes(wrong, cb), ValidationError);
}

TEST_CASE("rvq single stage reduces to kmeans") {
    const MatF data = random_mat(200, 4, 55);
    const ResidualCodebooks rvq = rvq_fit(data, 1, 8, 15, 42);
    const KMeansCodebook km = kmeans_fit(data, 8, 15, 42);
    REQUIRE(rvq.n_stages() == 1);
    CHECK(rvq.stages[0].centroids.data == km.centroids.data);
}

TEST_CASE("rvq exhausts residuals on exactly-coded data") {
    MatF data(60, 3);
    const float pts[4][3] = {{1, 0, 0}, {0, 2, 0}, {0, 0, 3}, {-1, -1, -1}};
    for (int i = 0; i < 60; ++i)
        for (int j = 0; j < 3; ++j) data.at(i, j) = pts[i % 4][j];
    const ResidualCodebooks rvq = rvq_fit(data, 2, 4, 25, 6);
    for (const float c : rvq.stages[1].centroids.data) CHECK(std::fabs(c) < 1e-9);
}

TEST_CASE("rvq residual energy non-increasing across stages") {
    const MatF data = random_mat(500, 8, 99);
    std::vector<double> energy;
    rvq_fit(data, 4, 16, 15, 3, &energy);
    REQUIRE(int(energy.size()) == 4);
    for (size_t i = 1; i < energy.size(); ++i) CHECK(energy[i] <= energy[i - 1] + 1e-9);
}

TEST_CASE("rvq encode: exact codeword, stage monotonicity, determinism") {
    const MatF data = random_mat(300, 4, 13);
    const ResidualCodebooks rvq4 = rvq_fit(data, 4, 8, 15, 21);
    ContentFeatures f;
    f.frames = random_mat(50, 4, 44);

    const auto codes1 = rvq_encode_codes(f, rvq4);
    const auto codes2 = rvq_encode_codes(f, rvq4);
    REQUIRE(codes1.size() == 4);
    CHECK(codes1 == codes2);

    // mean reconstruction error over in-distribution frames is non-increasing
    // in stage count (the stage codebooks were fitted on exactly these residuals)
    ContentFeatures train_frames;
    train_frames.frames = data;
    double prev_err = std::numeric_limits<double>::infinity();
    for (int s = 1; s <= 4; ++s) {
        ResidualCodebooks trunc;
        trunc.stages.assign(rvq4.stages.begin(), rvq4.stages.begin() + s);
        const ContentFeatures enc = rvq_encode_tensor(train_frames, trunc);
        double err = 0.0;
        for (size_t i = 0; i < data.data.size(); ++i) {
            const double d = double(data.data[i]) - double(enc.frames.data[i]);
            err += d * d;
        }
        CHECK(err <= prev_err + 1e-9);
        prev_err = err;
    }

    // single stage containing the exact input vector
    ContentFeatures one;
    one.frames = MatF(1, 4);
    for (int j = 0; j < 4; ++j) one.frames.at(0, j) = rvq4.stages[0].centroids.at(2, j);
    ResidualCodebooks first;
    first.stages = {rvq4.stages[0]};
    const ContentFeatures out = rvq_encode_tensor(one, first);
    for (int j = 0; j < 4; ++j) CHECK(out.frames.at(0, j) == one.frames.at(0, j));
}
