#include "svc/matio.hpp"

#include <cstring>
#include <fstream>

#include "svc/errors.hpp"

namespace svc {

namespace {

void put_u32(std::ostream& out, uint32_t v) {
    char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff), char((v >> 24) & 0xff)};
    out.write(b, 4);
}

void put_u16(std::ostream& out, uint16_t v) {
    char b[2] = {char(v & 0xff), char((v >> 8) & 0xff)};
    out.write(b, 2);
}

uint32_t get_u32(std::istream& in, const std::string& path, const char* what) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in)
        throw FormatError(std::string("truncated ") + what + " at byte " +
                          std::to_string(long(in.tellg() < 0 ? -1 : long(in.tellg()))) + ": " + path);
    return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}

uint16_t get_u16(std::istream& in, const std::string& path, const char* what) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    if (!in) throw FormatError(std::string("truncated ") + what + ": " + path);
    return uint16_t(b[0]) | uint16_t(b[1]) << 8;
}

void read_floats(std::istream& in, std::vector<float>& out, size_t n, const std::string& path) {
    out.resize(n);
    in.read(reinterpret_cast<char*>(out.data()), std::streamsize(n * 4));
    if (size_t(in.gcount()) != n * 4)
        throw FormatError("payload shorter than header promises (wanted " + std::to_string(n * 4) +
                          " bytes): " + path);
}

}  // namespace

MatF load_svcf(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "SVCF", 4) != 0)
        throw FormatError("bad magic at byte 0 (expected SVCF): " + path);
    const uint32_t version = get_u32(in, path, "version");
    if (version != 1) throw FormatError("unsupported SVCF version " + std::to_string(version) + ": " + path);
    const uint32_t rows = get_u32(in, path, "rows");
    const uint32_t cols = get_u32(in, path, "cols");
    MatF m;
    m.rows = int(rows);
    m.cols = int(cols);
    read_floats(in, m.data, size_t(rows) * size_t(cols), path);
    return m;
}

void save_svcf(const MatF& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write("SVCF", 4);
    put_u32(out, 1);
    put_u32(out, uint32_t(m.rows));
    put_u32(out, uint32_t(m.cols));
    out.write(reinterpret_cast<const char*>(m.data.data()), std::streamsize(m.data.size() * 4));
    if (!out) throw IoError("write failed: " + path);
}

const NamedTensor* Checkpoint::find(const std::string& name) const {
    for (const auto& t : tensors)
        if (t.name == name) return &t;
    return nullptr;
}

const NamedTensor& Checkpoint::require(const std::string& name) const {
    const NamedTensor* t = find(name);
    if (!t) throw FormatError("checkpoint missing tensor: " + name);
    return *t;
}

void Checkpoint::add(const std::string& name, std::vector<int> shape, std::vector<float> data) {
    size_t n = 1;
    for (int d : shape) n *= size_t(d);
    if (n != data.size()) throw ValidationError("tensor " + name + ": shape/payload mismatch");
    tensors.push_back({name, std::move(shape), std::move(data)});
}

Checkpoint load_svck(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "SVCK", 4) != 0)
        throw FormatError("bad magic (expected SVCK): " + path);
    const uint32_t version = get_u32(in, path, "version");
    if (version != 1) throw FormatError("unsupported SVCK version " + std::to_string(version) + ": " + path);
    const uint32_t count = get_u32(in, path, "tensor count");

    Checkpoint ckpt;
    ckpt.tensors.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        NamedTensor t;
        const uint16_t name_len = get_u16(in, path, "name length");
        t.name.resize(name_len);
        in.read(t.name.data(), name_len);
        if (!in) throw FormatError("truncated tensor name: " + path);
        unsigned char ndim;
        in.read(reinterpret_cast<char*>(&ndim), 1);
        if (!in) throw FormatError("truncated ndim for tensor " + t.name + ": " + path);
        size_t numel = 1;
        for (int d = 0; d < int(ndim); ++d) {
            const uint32_t dim = get_u32(in, path, "dim");
            t.shape.push_back(int(dim));
            numel *= dim;
        }
        read_floats(in, t.data, numel, path + " (tensor " + t.name + ")");
        ckpt.tensors.push_back(std::move(t));
    }
    return ckpt;
}

void save_svck(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write("SVCK", 4);
    put_u32(out, 1);
    put_u32(out, uint32_t(ckpt.tensors.size()));
    for (const auto& t : ckpt.tensors) {
        put_u16(out, uint16_t(t.name.size()));
        out.write(t.name.data(), std::streamsize(t.name.size()));
        const unsigned char ndim = (unsigned char)(t.shape.size());
        out.write(reinterpret_cast<const char*>(&ndim), 1);
        for (int d : t.shape) put_u32(out, uint32_t(d));
        out.write(reinterpret_cast<const char*>(t.data.data()), std::streamsize(t.data.size() * 4));
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace svc
