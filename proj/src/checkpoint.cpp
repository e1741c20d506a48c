#include "offrec/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "offrec/errors.hpp"

namespace offrec::nn {

namespace {

constexpr char kMagic[6] = {'O', 'R', 'E', 'C', 'v', '1'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

template <typename T>
void write_pod(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw DataError("checkpoint: truncated file");
    return v;
}

}  // namespace

void save_checkpoint(const ParamStore& store, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("checkpoint: cannot open for writing: " + path);
    out.write(kMagic, sizeof(kMagic));
    write_pod<std::uint8_t>(out, 0x01);
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(store.count()));
    for (const auto& [name, p] : store) {
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.shape.size()));
        for (std::size_t d : p.value.shape) write_pod<std::uint64_t>(out, d);
        out.write(reinterpret_cast<const char*>(p.value.values.data()),
                  static_cast<std::streamsize>(p.value.values.size() * sizeof(double)));
    }
    if (!out) throw DataError("checkpoint: write failed: " + path);
}

ParamStore load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("checkpoint: cannot open: " + path);
    char magic[6];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw DataError("checkpoint: bad magic in " + path);
    auto endian = read_pod<std::uint8_t>(in);
    if (endian != 0x01) throw DataError("checkpoint: unsupported endianness flag");
    auto count = read_pod<std::uint32_t>(in);
    ParamStore store;
    for (std::uint32_t i = 0; i < count; ++i) {
        auto name_len = read_pod<std::uint32_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        auto ndims = read_pod<std::uint32_t>(in);
        Tensor t;
        std::size_t total = 1;
        for (std::uint32_t d = 0; d < ndims; ++d) {
            auto dim = static_cast<std::size_t>(read_pod<std::uint64_t>(in));
            t.shape.push_back(dim);
            total *= dim;
        }
        t.values.resize(total);
        in.read(reinterpret_cast<char*>(t.values.data()),
                static_cast<std::streamsize>(total * sizeof(double)));
        if (!in) throw DataError("checkpoint: truncated parameter data in " + path);
        store.create(name, std::move(t));
    }
    return store;
}

}  // namespace offrec::nn
