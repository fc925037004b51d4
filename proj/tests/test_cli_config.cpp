#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "svc/config.hpp"
#include "svc/errors.hpp"

using namespace svc;
using namespace testutil;

TEST_CASE("empty config text yields the documented defaults") {
    const TrainConfig cfg = parse_run_config_text("");
    CHECK(cfg.seed == 1);
    CHECK(cfg.steps == 500);
    CHECK(cfg.batch_size == 1);
    CHECK(cfg.segment_frames == 50);
    CHECK(cfg.learning_rate == 2e-4);
    CHECK(cfg.adam_beta1 == 0.8);
    CHECK(cfg.adam_beta2 == 0.99);
    CHECK(cfg.adam_eps == 1e-9);
    CHECK(cfg.weights.alpha == 1.0);
    CHECK(cfg.weights.beta == 0.2);
    CHECK(cfg.weights.gamma == 9.0);
    CHECK(cfg.orientation == DisOrientation::Lsgan);
    CHECK(!cfg.freeze_speaker);
    CHECK(cfg.checkpoint_interval == 100);
    CHECK(cfg.f0_min == 50.0);
    CHECK(cfg.f0_max == 1100.0);
    CHECK(cfg.spectro.sample_rate == 32000);
    CHECK(cfg.spectro.hop == 320);
    CHECK(cfg.spectro.n_mels == 80);
    CHECK(cfg.model.upsample == std::vector<int>{5, 4, 4, 4});
    CHECK(cfg.model.periods == std::vector<int>{2, 3, 5});
    CHECK(cfg.model.scales == std::vector<int>{1, 2, 4});
}

TEST_CASE("every recognized key lands in the matching field") {
    const std::string text =
        "seed = 9\n"
        "steps = 12\n"
        "batch_size = 2\n"
        "segment_frames = 20\n"
        "learning_rate = 1e-3\n"
        "adam_beta1 = 0.5\n"
        "adam_beta2 = 0.9\n"
        "adam_eps = 1e-8\n"
        "alpha = 2.0\n"
        "beta = 0.1\n"
        "gamma = 3.0\n"
        "w_adv = 0.5\n"
        "w_fmap = 0.25\n"
        "dis_orientation = as_printed\n"
        "freeze_speaker = true\n"
        "checkpoint_interval = 7\n"
        "f0_min = 60\n"
        "f0_max = 900\n"
        "content_provider = synthetic\n"
        "content_seed = 5\n"
        "content_dim = 32\n"
        "compression = kmeans\n"
        "quant_mode = codes\n"
        "kmeans_k = 40\n"
        "rvq_stages = 3\n"
        "codes_per_stage = 16\n"
        "fit_iters = 6\n"
        "sample_rate = 16000\n"
        "n_fft = 512\n"
        "hop = 64\n"
        "win_length = 512\n"
        "n_mels = 40\n"
        "fmin = 20\n"
        "fmax = 7000\n"
        "d_z = 16\n"
        "hidden = 64\n"
        "spk_dim = 64\n"
        "pitch_bins = 128\n"
        "pitch_embed_dim = 32\n"
        "dec_ch = 64\n"
        "flow_blocks = 1\n"
        "flow_hidden = 32\n"
        "upsample = 4,4,4\n"
        "periods = 2,3\n"
        "scales = 1,2\n";
    const TrainConfig cfg = parse_run_config_text(text);
    CHECK(cfg.seed == 9);
    CHECK(cfg.steps == 12);
    CHECK(cfg.batch_size == 2);
    CHECK(cfg.segment_frames == 20);
    CHECK(cfg.learning_rate == 1e-3);
    CHECK(cfg.adam_beta1 == 0.5);
    CHECK(cfg.adam_beta2 == 0.9);
    CHECK(cfg.adam_eps == 1e-8);
    CHECK(cfg.weights.alpha == 2.0);
    CHECK(cfg.weights.beta == 0.1);
    CHECK(cfg.weights.gamma == 3.0);
    CHECK(cfg.weights.w_adv == 0.5);
    CHECK(cfg.weights.w_fmap == 0.25);
    CHECK(cfg.orientation == DisOrientation::AsPrinted);
    CHECK(cfg.freeze_speaker);
    CHECK(cfg.checkpoint_interval == 7);
    CHECK(cfg.f0_min == 60.0);
    CHECK(cfg.f0_max == 900.0);
    CHECK(cfg.content.provider == ContentSpec::Provider::Synthetic);
    CHECK(cfg.content.seed == 5);
    CHECK(cfg.content.dim == 32);
    CHECK(cfg.content.compression == ContentSpec::Compression::KMeans);
    CHECK(cfg.content.mode == QuantMode::Codes);
    CHECK(cfg.content.kmeans_k == 40);
    CHECK(cfg.content.rvq_stages == 3);
    CHECK(cfg.content.codes_per_stage == 16);
    CHECK(cfg.content.fit_iters == 6);
    CHECK(cfg.spectro.sample_rate == 16000);
    CHECK(cfg.spectro.n_fft == 512);
    CHECK(cfg.spectro.hop == 64);
    CHECK(cfg.spectro.win_length == 512);
    CHECK(cfg.spectro.n_mels == 40);
    CHECK(cfg.spectro.fmin == 20.0);
    CHECK(cfg.spectro.fmax == 7000.0);
    CHECK(cfg.model.d_z == 16);
    CHECK(cfg.model.hidden == 64);
    CHECK(cfg.model.spk_dim == 64);
    CHECK(cfg.model.pitch_bins == 128);
    CHECK(cfg.model.pitch_embed_dim == 32);
    CHECK(cfg.model.dec_ch == 64);
    CHECK(cfg.model.flow_blocks == 1);
    CHECK(cfg.model.flow_hidden == 32);
    CHECK(cfg.model.upsample == std::vector<int>{4, 4, 4});
    CHECK(cfg.model.periods == std::vector<int>{2, 3});
    CHECK(cfg.model.scales == std::vector<int>{1, 2});
}

TEST_CASE("comments, blank lines and file provider are handled") {
    const TrainConfig cfg = parse_run_config_text(
        "# a full-line comment\n"
        "\n"
        "steps = 3   # trailing comment\n"
        "   content_provider =   file:/tmp/feat.svcf\n");
    CHECK(cfg.steps == 3);
    CHECK(cfg.content.provider == ContentSpec::Provider::File);
    CHECK(cfg.content.file_path == "/tmp/feat.svcf");
}

TEST_CASE("unknown keys and malformed lines are rejected by name") {
    try {
        parse_run_config_text("stepz = 10\n");
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("unknown key 'stepz'") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_run_config_text("steps\n"), ValidationError);
    CHECK_THROWS_AS(parse_run_config_text("= 4\n"), ValidationError);
}

TEST_CASE("bad values are rejected") {
    CHECK_THROWS_AS(parse_run_config_text("steps = ten\n"), ValidationError);
    CHECK_THROWS_AS(parse_run_config_text("learning_rate = 1e-3x\n"), ValidationError);
    CHECK_THROWS_AS(parse_run_config_text("freeze_speaker = maybe\n"), ValidationError);
    CHECK_THROWS_AS(parse_run_config_text("dis_orientation = flipped\n"), ValidationError);
    CHECK_THROWS_AS(parse_run_config_text("compression = zip\n"), ValidationError);
    CHECK_THROWS_AS(parse_run_config_text("upsample = ,\n"), ValidationError);
}

TEST_CASE("cross-field validation runs after parsing") {
    // hop stays 320 but the upsample product becomes 64
    CHECK_THROWS_AS(parse_run_config_text("upsample = 4,4,4\n"), ValidationError);
    CHECK_THROWS_AS(parse_run_config_text("steps = 0\n"), ValidationError);
    CHECK_THROWS_AS(parse_run_config_text("f0_min = 1200\n"), ValidationError);
}

TEST_CASE("parse_run_config reads a file and reports missing ones") {
    TempDir td("cfg");
    const std::string path = td.file("run.cfg");
    {
        std::ofstream out(path);
        out << "steps = 2\nseed = 4\n";
    }
    const TrainConfig cfg = parse_run_config(path);
    CHECK(cfg.steps == 2);
    CHECK(cfg.seed == 4);
    CHECK_THROWS_AS(parse_run_config(td.file("missing.cfg")), IoError);
}
