#include "kfr/weights.hpp"

#include <cstring>
#include <fstream>

#include "kfr/errors.hpp"

namespace kfr {

namespace {

void put_u16(std::string& buf, std::uint16_t v) {
    buf.push_back(static_cast<char>(v & 0xff));
    buf.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
    std::ifstream in;
    std::string path;

    void read(void* dst, std::size_t n) {
        in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (in.gcount() != static_cast<std::streamsize>(n))
            throw ParseError(path + ": truncated weight file");
    }
    std::uint16_t u16() {
        unsigned char b[2];
        read(b, 2);
        return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
    }
    std::uint32_t u32() {
        unsigned char b[4];
        read(b, 4);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) |
               (static_cast<std::uint32_t>(b[3]) << 24);
    }
};

std::string shape_str(std::span<const std::uint32_t> dims) {
    std::string s = "[";
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(dims[i]);
    }
    return s + "]";
}

}  // namespace

void WeightStore::add(std::string name, std::vector<std::uint32_t> dims,
                      std::vector<float> data) {
    Tensor t;
    t.name = std::move(name);
    t.dims = std::move(dims);
    t.data = std::move(data);
    if (t.count() != t.data.size())
        throw ShapeMismatch("tensor " + t.name + ": payload does not match dims");
    if (index_.count(t.name)) throw Error("duplicate tensor name: " + t.name);
    index_.emplace(t.name, tensors_.size());
    tensors_.push_back(std::move(t));
}

bool WeightStore::contains(const std::string& name) const { return index_.count(name) > 0; }

const Tensor& WeightStore::get(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) throw MissingWeight("missing tensor: " + name);
    return tensors_[it->second];
}

const Tensor& WeightStore::get(const std::string& name,
                               std::span<const std::uint32_t> expect) const {
    const Tensor& t = get(name);
    const bool ok = t.dims.size() == expect.size() &&
                    std::equal(t.dims.begin(), t.dims.end(), expect.begin());
    if (!ok)
        throw ShapeMismatch("tensor " + name + ": shape " +
                            shape_str(t.dims) + ", expected " + shape_str(expect));
    return t;
}

WeightStore WeightStore::load(const std::string& path) {
    Reader r{std::ifstream(path, std::ios::binary), path};
    if (!r.in) throw MissingFile(path + ": cannot open");
    char magic[4];
    r.read(magic, 4);
    if (std::memcmp(magic, "KFRW", 4) != 0)
        throw ParseError(path + ": bad magic, not a weight file");
    const std::uint32_t version = r.u32();
    if (version != kWeightFileVersion)
        throw ParseError(path + ": unsupported weight file version " + std::to_string(version));
    const std::uint32_t count = r.u32();
    WeightStore store;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint16_t name_len = r.u16();
        std::string name(name_len, '\0');
        r.read(name.data(), name_len);
        unsigned char rank;
        r.read(&rank, 1);
        std::vector<std::uint32_t> dims(rank);
        std::size_t n = 1;
        for (unsigned char d = 0; d < rank; ++d) {
            dims[d] = r.u32();
            n *= dims[d];
        }
        std::vector<float> data(n);
        r.read(data.data(), n * sizeof(float));
        store.add(std::move(name), std::move(dims), std::move(data));
    }
    return store;
}

void WeightStore::save(const std::string& path) const {
    std::string buf;
    buf.reserve(64);
    buf += "KFRW";
    put_u32(buf, kWeightFileVersion);
    put_u32(buf, static_cast<std::uint32_t>(tensors_.size()));

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path + ": cannot write");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    for (const Tensor& t : tensors_) {
        std::string head;
        put_u16(head, static_cast<std::uint16_t>(t.name.size()));
        head += t.name;
        head.push_back(static_cast<char>(t.dims.size()));
        for (std::uint32_t d : t.dims) put_u32(head, d);
        out.write(head.data(), static_cast<std::streamsize>(head.size()));
        out.write(reinterpret_cast<const char*>(t.data.data()),
                  static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    }
    if (!out) throw IoError(path + ": write failed");
}

}  // namespace kfr
