#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <zlib.h>

#include "tcjepa/tensor.hpp"

namespace tcjepa {

/// On-disk format: magic "TCJP", u32 version, u32 entry count; directory of
/// (u32 name length, name bytes, dtype u8, rank u8, dims u32[], payload
/// offset u64 from file start); raw little-endian payloads; trailing CRC32
/// over everything before it.
namespace ckpt {

constexpr uint32_t kVersion = 1;
constexpr uint8_t kF32 = 0;
constexpr uint8_t kF64 = 1;
constexpr uint8_t kU64 = 2;

template <class T>
constexpr uint8_t dtype_code();
template <>
constexpr uint8_t dtype_code<float>() { return kF32; }
template <>
constexpr uint8_t dtype_code<double>() { return kF64; }
template <>
constexpr uint8_t dtype_code<uint64_t>() { return kU64; }

inline size_t dtype_size(uint8_t code) {
    switch (code) {
        case kF32: return 4;
        case kF64: return 8;
        case kU64: return 8;
    }
    throw CheckpointError("unknown dtype code " + std::to_string(int(code)));
}

struct Entry {
    uint8_t dtype = kF32;
    std::vector<uint32_t> dims;
    std::vector<unsigned char> payload;  // little-endian scalars

    long count() const {
        long n = 1;
        for (uint32_t d : dims) n *= long(d);
        return n;
    }
};

namespace detail {

inline void put_bytes(std::vector<unsigned char>& buf, const void* p, size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    buf.insert(buf.end(), b, b + n);
}

template <class U>
void put_le(std::vector<unsigned char>& buf, U v) {
    for (size_t i = 0; i < sizeof(U); ++i)
        buf.push_back(static_cast<unsigned char>((uint64_t(v) >> (8 * i)) & 0xff));
}

template <class U>
U get_le(const std::vector<unsigned char>& buf, size_t& off) {
    if (off + sizeof(U) > buf.size()) throw CheckpointError("checkpoint truncated");
    uint64_t v = 0;
    for (size_t i = 0; i < sizeof(U); ++i) v |= uint64_t(buf[off + i]) << (8 * i);
    off += sizeof(U);
    return static_cast<U>(v);
}

template <class T>
void scalars_to_le(const std::vector<T>& src, std::vector<unsigned char>& dst) {
    dst.resize(src.size() * sizeof(T));
    for (size_t i = 0; i < src.size(); ++i) {
        uint64_t bits = 0;
        std::memcpy(&bits, &src[i], sizeof(T));
        for (size_t b = 0; b < sizeof(T); ++b)
            dst[i * sizeof(T) + b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xff);
    }
}

template <class T>
std::vector<T> le_to_scalars(const std::vector<unsigned char>& src) {
    if (src.size() % sizeof(T) != 0) throw CheckpointError("payload size misaligned");
    std::vector<T> out(src.size() / sizeof(T));
    for (size_t i = 0; i < out.size(); ++i) {
        uint64_t bits = 0;
        for (size_t b = 0; b < sizeof(T); ++b)
            bits |= uint64_t(src[i * sizeof(T) + b]) << (8 * b);
        std::memcpy(&out[i], &bits, sizeof(T));
    }
    return out;
}

}  // namespace detail

/// Ordered named entries (std::map gives a stable byte layout).
using Store = std::map<std::string, Entry>;

template <class T>
void put_tensor(Store& store, const std::string& name, const Tensor<T>& t) {
    Entry e;
    e.dtype = dtype_code<T>();
    for (int d : t.shape) e.dims.push_back(uint32_t(d));
    if (e.dims.empty()) e.dims.push_back(uint32_t(t.data.size()));
    detail::scalars_to_le(t.data, e.payload);
    store[name] = std::move(e);
}

template <class T>
void put_vector(Store& store, const std::string& name, const std::vector<T>& v) {
    Entry e;
    e.dtype = dtype_code<T>();
    e.dims.push_back(uint32_t(v.size()));
    detail::scalars_to_le(v, e.payload);
    store[name] = std::move(e);
}

inline void put_u64(Store& store, const std::string& name, uint64_t v) {
    put_vector<uint64_t>(store, name, {v});
}

inline const Entry& get_entry(const Store& store, const std::string& name) {
    auto it = store.find(name);
    if (it == store.end()) throw CheckpointError("checkpoint missing entry '" + name + "'");
    return it->second;
}

template <class T>
void load_tensor(const Store& store, const std::string& name, Tensor<T>& dst) {
    const Entry& e = get_entry(store, name);
    if (e.dtype != dtype_code<T>())
        throw CheckpointError("dtype mismatch for '" + name + "'");
    std::vector<T> vals = detail::le_to_scalars<T>(e.payload);
    if (long(vals.size()) != dst.size())
        throw CheckpointError("shape mismatch for '" + name + "': file has " +
                              std::to_string(vals.size()) + " values, expected " +
                              std::to_string(dst.size()));
    dst.data = std::move(vals);
}

template <class T>
std::vector<T> get_vector(const Store& store, const std::string& name) {
    const Entry& e = get_entry(store, name);
    if (e.dtype != dtype_code<T>())
        throw CheckpointError("dtype mismatch for '" + name + "'");
    return detail::le_to_scalars<T>(e.payload);
}

inline uint64_t get_u64(const Store& store, const std::string& name) {
    auto v = get_vector<uint64_t>(store, name);
    if (v.size() != 1) throw CheckpointError("'" + name + "' is not a scalar");
    return v[0];
}

inline void save(const std::string& path, const Store& store) {
    using namespace detail;
    // directory size must be known before offsets can be filled in
    size_t dir_size = 0;
    for (const auto& [name, e] : store)
        dir_size += 4 + name.size() + 1 + 1 + 4 * e.dims.size() + 8;
    size_t header = 4 + 4 + 4;
    std::vector<unsigned char> buf;
    put_bytes(buf, "TCJP", 4);
    put_le<uint32_t>(buf, kVersion);
    put_le<uint32_t>(buf, uint32_t(store.size()));
    uint64_t off = header + dir_size;
    for (const auto& [name, e] : store) {
        put_le<uint32_t>(buf, uint32_t(name.size()));
        put_bytes(buf, name.data(), name.size());
        buf.push_back(e.dtype);
        buf.push_back(uint8_t(e.dims.size()));
        for (uint32_t d : e.dims) put_le<uint32_t>(buf, d);
        put_le<uint64_t>(buf, off);
        off += e.payload.size();
    }
    for (const auto& [name, e] : store) put_bytes(buf, e.payload.data(), e.payload.size());
    uint32_t crc = uint32_t(crc32(0L, buf.data(), uInt(buf.size())));
    put_le<uint32_t>(buf, crc);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError("cannot open '" + path + "' for writing");
    f.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size()));
    if (!f) throw CheckpointError("write failed for '" + path + "'");
}

inline Store load(const std::string& path) {
    using namespace detail;
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("cannot open checkpoint '" + path + "'");
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
    if (buf.size() < 4 + 4 + 4 + 4) throw CheckpointError("checkpoint too small");
    uint32_t stored_crc;
    {
        size_t coff = buf.size() - 4;
        std::vector<unsigned char> tail(buf.end() - 4, buf.end());
        size_t z = 0;
        stored_crc = get_le<uint32_t>(tail, z);
        buf.resize(coff);
    }
    uint32_t crc = uint32_t(crc32(0L, buf.data(), uInt(buf.size())));
    if (crc != stored_crc) throw CheckpointError("checkpoint CRC mismatch (corrupted file)");

    size_t off = 0;
    if (std::memcmp(buf.data(), "TCJP", 4) != 0)
        throw CheckpointError("bad checkpoint magic");
    off = 4;
    uint32_t version = get_le<uint32_t>(buf, off);
    if (version != kVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    uint32_t count = get_le<uint32_t>(buf, off);

    struct DirEnt {
        std::string name;
        Entry e;
        uint64_t payload_off;
    };
    std::vector<DirEnt> dir;
    for (uint32_t i = 0; i < count; ++i) {
        DirEnt d;
        uint32_t nlen = get_le<uint32_t>(buf, off);
        if (off + nlen > buf.size()) throw CheckpointError("checkpoint truncated");
        d.name.assign(reinterpret_cast<const char*>(&buf[off]), nlen);
        off += nlen;
        if (off + 2 > buf.size()) throw CheckpointError("checkpoint truncated");
        d.e.dtype = buf[off++];
        uint8_t rank = buf[off++];
        for (uint8_t r = 0; r < rank; ++r) d.e.dims.push_back(get_le<uint32_t>(buf, off));
        d.payload_off = get_le<uint64_t>(buf, off);
        dir.push_back(std::move(d));
    }
    Store store;
    for (auto& d : dir) {
        size_t bytes = size_t(d.e.count()) * dtype_size(d.e.dtype);
        if (d.payload_off + bytes > buf.size())
            throw CheckpointError("payload out of bounds for '" + d.name + "'");
        d.e.payload.assign(buf.begin() + long(d.payload_off),
                           buf.begin() + long(d.payload_off + bytes));
        store[d.name] = std::move(d.e);
    }
    return store;
}

}  // namespace ckpt
}  // namespace tcjepa
