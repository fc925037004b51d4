#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstring>

#include "doctest.h"
#include "helpers.hpp"
#include "svc/audio.hpp"
#include "svc/errors.hpp"

using namespace svc;
using namespace testutil;

namespace {

void push_u32(std::vector<unsigned char>& v, uint32_t x) {
    for (int i = 0; i < 4; ++i) v.push_back((unsigned char)(x >> (8 * i)));
}
void push_u16(std::vector<unsigned char>& v, uint16_t x) {
    v.push_back((unsigned char)(x & 0xff));
    v.push_back((unsigned char)(x >> 8));
}
void push_tag(std::vector<unsigned char>& v, const char* t) {
    v.insert(v.end(), t, t + 4);
}

std::vector<unsigned char> make_wav(uint16_t format, uint16_t channels, uint32_t rate, uint16_t bits,
                                    const std::vector<unsigned char>& payload,
                                    const std::vector<unsigned char>& extra_chunk = {}) {
    std::vector<unsigned char> v;
    push_tag(v, "RIFF");
    const uint32_t riff_size = 4 + (8 + 16) + uint32_t(extra_chunk.size()) + (8 + uint32_t(payload.size()));
    push_u32(v, riff_size);
    push_tag(v, "WAVE");
    v.insert(v.end(), extra_chunk.begin(), extra_chunk.end());
    push_tag(v, "fmt ");
    push_u32(v, 16);
    push_u16(v, format);
    push_u16(v, channels);
    push_u32(v, rate);
    push_u32(v, rate * channels * bits / 8);
    push_u16(v, uint16_t(channels * bits / 8));
    push_u16(v, bits);
    push_tag(v, "data");
    push_u32(v, uint32_t(payload.size()));
    v.insert(v.end(), payload.begin(), payload.end());
    return v;
}

}  // namespace

TEST_CASE("wav round trip within 16-bit quantization") {
    TempDir td("audio_rt");
    AudioClip clip = noise(0.25, 32000, 42, 0.8);
    write_wav(clip, td.file("a.wav"));
    AudioClip back = read_wav(td.file("a.wav"));
    REQUIRE(back.sample_rate == 32000);
    REQUIRE(back.samples.size() == clip.samples.size());
    // write scales by 32767, read divides by 32768: half an LSB plus |x|/32768
    for (size_t i = 0; i < clip.samples.size(); ++i)
        CHECK(std::fabs(back.samples[i] - clip.samples[i]) <= (0.51 + std::fabs(clip.samples[i])) / 32768.0);
}

TEST_CASE("one second of silence round trips to 32000 zeros") {
    TempDir td("audio_sil");
    AudioClip clip;
    clip.sample_rate = 32000;
    clip.samples.assign(32000, 0.0f);
    write_wav(clip, td.file("s.wav"));
    AudioClip back = read_wav(td.file("s.wav"));
    REQUIRE(back.samples.size() == 32000);
    for (float s : back.samples) CHECK(s == 0.0f);
}

TEST_CASE("stereo channels x and -x average to silence") {
    TempDir td("audio_st");
    std::vector<unsigned char> payload;
    for (int i = 0; i < 100; ++i) {
        const int16_t x = int16_t(1000 + 17 * i);
        const int16_t nx = int16_t(-x);
        push_u16(payload, uint16_t(x));
        push_u16(payload, uint16_t(nx));
    }
    write_bytes(td.file("st.wav"), make_wav(1, 2, 16000, 16, payload));
    AudioClip clip = read_wav(td.file("st.wav"));
    REQUIRE(clip.samples.size() == 100);
    REQUIRE(clip.sample_rate == 16000);
    for (float s : clip.samples) CHECK(s == 0.0f);
}

TEST_CASE("float32 wav and unknown chunk skipping") {
    TempDir td("audio_f32");
    std::vector<unsigned char> payload;
    const float vals[3] = {0.5f, -0.25f, 1.0f};
    for (float v : vals) {
        unsigned char b[4];
        std::memcpy(b, &v, 4);
        payload.insert(payload.end(), b, b + 4);
    }
    std::vector<unsigned char> junk;
    push_tag(junk, "LIST");
    push_u32(junk, 5);
    junk.insert(junk.end(), {1, 2, 3, 4, 5, 0});  // odd-size chunk padded to even
    write_bytes(td.file("f.wav"), make_wav(3, 1, 32000, 32, payload, junk));
    AudioClip clip = read_wav(td.file("f.wav"));
    REQUIRE(clip.samples.size() == 3);
    CHECK(clip.samples[0] == doctest::Approx(0.5).epsilon(1e-7));
    CHECK(clip.samples[1] == doctest::Approx(-0.25).epsilon(1e-7));
    CHECK(clip.samples[2] == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("write clamps and quantizes round-half-away") {
    TempDir td("audio_q");
    AudioClip clip;
    clip.sample_rate = 32000;
    clip.samples = {1.5f, 0.0f, -2.0f, 0.5f};
    write_wav(clip, td.file("q.wav"));
    const auto bytes = read_bytes(td.file("q.wav"));
    // data chunk is the last 8 + 2N bytes of our writer's output
    REQUIRE(bytes.size() >= 8 + 8);
    const size_t data_off = bytes.size() - 8;
    auto sample_at = [&](size_t i) {
        return int16_t(uint16_t(bytes[data_off + 2 * i]) | (uint16_t(bytes[data_off + 2 * i + 1]) << 8));
    };
    CHECK(sample_at(0) == 32767);   // clamped
    CHECK(sample_at(1) == 0);
    CHECK(sample_at(2) == -32767);  // clamped to -1 then scaled
    CHECK(sample_at(3) == int16_t(std::lround(0.5 * 32767)));
    // data chunk holds 2N payload bytes
    CHECK(bytes.size() >= 44 + 2 * clip.samples.size());
}

TEST_CASE("read errors") {
    TempDir td("audio_err");
    CHECK_THROWS_AS(read_wav(td.file("missing.wav")), IoError);
    write_bytes(td.file("bad.wav"), {'n', 'o', 't', 'a', 'w', 'a', 'v', '!'});
    CHECK_THROWS_AS(read_wav(td.file("bad.wav")), FormatError);
}

TEST_CASE("resample identity at equal rates") {
    AudioClip clip = noise(0.1, 32000, 7);
    AudioClip out = resample(clip, 32000);
    REQUIRE(out.samples.size() == clip.samples.size());
    for (size_t i = 0; i < clip.samples.size(); ++i) CHECK(out.samples[i] == clip.samples[i]);
}

TEST_CASE("resample length law and duration preservation") {
    AudioClip clip = noise(0.5, 16000, 3);
    AudioClip up = resample(clip, 32000);
    CHECK(up.sample_rate == 32000);
    CHECK(up.samples.size() == 2 * clip.samples.size());

    AudioClip odd = noise(0.1, 22050, 4);
    AudioClip out = resample(odd, 32000);
    CHECK(int64_t(out.samples.size()) == llround(double(odd.samples.size()) * 32000.0 / 22050.0));
    CHECK(std::fabs(out.duration_seconds() - odd.duration_seconds()) <= 1.0 / 22050.0);
}

TEST_CASE("resampled 440 Hz tone keeps its DFT peak") {
    AudioClip tone = sine(440.0, 1.0, 16000);
    AudioClip up = resample(tone, 32000);
    const double peak = dft_peak_freq(up, 430.0, 450.0, 0.5);
    CHECK(std::fabs(peak - 440.0) <= 1.0);
}
