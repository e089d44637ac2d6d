#include "esvt/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace esvt {

namespace {

constexpr char kMagic[5] = {'E', 'S', 'V', 'T', '1'};

void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

bool get_u32(std::istream& is, uint32_t& v) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
    v = static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 | static_cast<uint32_t>(b[2]) << 16 |
        static_cast<uint32_t>(b[3]) << 24;
    return true;
}

void put_f32(std::ostream& os, float f) {
    uint32_t v;
    std::memcpy(&v, &f, 4);
    put_u32(os, v);
}

bool get_f32(std::istream& is, float& f) {
    uint32_t v;
    if (!get_u32(is, v)) return false;
    std::memcpy(&f, &v, 4);
    return true;
}

}  // namespace

void write_checkpoint(const std::string& path, const std::vector<CheckpointEntry>& entries) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw CheckpointError("cannot open '" + path + "' for writing");
    os.write(kMagic, sizeof(kMagic));
    for (const auto& e : entries) {
        put_u32(os, static_cast<uint32_t>(e.name.size()));
        os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        put_u32(os, static_cast<uint32_t>(e.shape.size()));
        int64_t n = 1;
        for (int64_t ext : e.shape) {
            put_u32(os, static_cast<uint32_t>(ext));
            n *= ext;
        }
        if (n != static_cast<int64_t>(e.data.size()))
            throw CheckpointError("entry '" + e.name + "' data length does not match its extents");
        for (float f : e.data) put_f32(os, f);
    }
    if (!os) throw CheckpointError("write failed for '" + path + "'");
}

std::vector<CheckpointEntry> read_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("cannot open '" + path + "'");
    char magic[5];
    if (!is.read(magic, 5) || std::memcmp(magic, kMagic, 5) != 0)
        throw CheckpointError("'" + path + "' is not an ESVT1 checkpoint");
    std::vector<CheckpointEntry> entries;
    while (true) {
        uint32_t name_len;
        if (!get_u32(is, name_len)) break;  // clean EOF
        CheckpointEntry e;
        e.name.resize(name_len);
        if (!is.read(e.name.data(), name_len))
            throw CheckpointError("'" + path + "' truncated inside an entry name");
        uint32_t rank;
        if (!get_u32(is, rank))
            throw CheckpointError("'" + path + "' truncated after entry '" + e.name + "'");
        int64_t n = 1;
        for (uint32_t i = 0; i < rank; ++i) {
            uint32_t ext;
            if (!get_u32(is, ext))
                throw CheckpointError("'" + path + "' truncated in extents of '" + e.name + "'");
            e.shape.push_back(static_cast<int64_t>(ext));
            n *= ext;
        }
        e.data.resize(static_cast<size_t>(n));
        for (int64_t i = 0; i < n; ++i) {
            if (!get_f32(is, e.data[static_cast<size_t>(i)]))
                throw CheckpointError("'" + path + "' truncated in data of '" + e.name + "'");
        }
        entries.push_back(std::move(e));
    }
    return entries;
}

}  // namespace esvt
