#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace svc {

// Row-major float matrix used by feature files and embedding stores.
struct MatF {
    int rows = 0;
    int cols = 0;
    std::vector<float> data;

    MatF() = default;
    MatF(int r, int c) : rows(r), cols(c), data(size_t(r) * size_t(c), 0.0f) {}
    float& at(int r, int c) { return data[size_t(r) * size_t(cols) + size_t(c)]; }
    float at(int r, int c) const { return data[size_t(r) * size_t(cols) + size_t(c)]; }
};

// SVCF: "SVCF", u32 version=1, u32 rows, u32 cols, rows*cols float32 LE, row-major.
MatF load_svcf(const std::string& path);
void save_svcf(const MatF& m, const std::string& path);

// One named tensor inside a checkpoint.
struct NamedTensor {
    std::string name;
    std::vector<int> shape;
    std::vector<float> data;
};

// SVCK: "SVCK", u32 version=1, u32 tensor count, then per tensor
// u16 name length, name bytes, u8 ndim, u32 dims..., float32 LE payload.
// Order is preserved so save(load(p)) is byte-identical.
struct Checkpoint {
    std::vector<NamedTensor> tensors;

    const NamedTensor* find(const std::string& name) const;
    const NamedTensor& require(const std::string& name) const;
    void add(const std::string& name, std::vector<int> shape, std::vector<float> data);
};

Checkpoint load_svck(const std::string& path);
void save_svck(const Checkpoint& ckpt, const std::string& path);

}  // namespace svc
