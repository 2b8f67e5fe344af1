#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace kfr {

struct Tensor {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::vector<float> data;

    std::size_t count() const {
        std::size_t n = 1;
        for (std::uint32_t d : dims) n *= d;
        return n;
    }
};

// Named float32 tensor collection. Insertion order is preserved so that a
// load/save cycle reproduces the file byte for byte.
class WeightStore {
public:
    void add(std::string name, std::vector<std::uint32_t> dims, std::vector<float> data);
    bool contains(const std::string& name) const;

    // Throws MissingWeight when absent; the shape-checked overload throws
    // ShapeMismatch when dims differ from expectation.
    const Tensor& get(const std::string& name) const;
    const Tensor& get(const std::string& name, std::span<const std::uint32_t> expect) const;

    std::size_t size() const { return tensors_.size(); }
    const std::vector<Tensor>& tensors() const { return tensors_; }

    // Binary weight file, little-endian:
    //   magic "KFRW" | version u32 | tensor count u32
    //   per tensor: name length u16, UTF-8 name, rank u8, dims u32 each,
    //   float32 payload.
    static WeightStore load(const std::string& path);
    void save(const std::string& path) const;

private:
    std::vector<Tensor> tensors_;
    std::unordered_map<std::string, std::size_t> index_;
};

inline constexpr std::uint32_t kWeightFileVersion = 1;

}  // namespace kfr
