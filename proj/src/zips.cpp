#include "execforge/zips.hpp"

#include <zlib.h>

#include <cstdint>
#include <cstring>

namespace execforge {

namespace {

constexpr std::uint32_t kLocalSig = 0x04034b50;
constexpr std::uint32_t kCentralSig = 0x02014b50;
constexpr std::uint32_t kEocdSig = 0x06054b50;
constexpr std::uint16_t kVersion = 20;
constexpr std::uint16_t kDosDate = 0x0021;  // 1980-01-01
constexpr std::uint32_t kExternalAttrs = 0100644u << 16;

void put16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put32(std::string& out, std::uint32_t v) {
    put16(out, static_cast<std::uint16_t>(v & 0xffff));
    put16(out, static_cast<std::uint16_t>(v >> 16));
}

std::uint16_t get16(const std::string& b, std::size_t off) {
    return static_cast<std::uint16_t>(static_cast<unsigned char>(b[off]) |
                                      (static_cast<unsigned char>(b[off + 1]) << 8));
}

std::uint32_t get32(const std::string& b, std::size_t off) {
    return static_cast<std::uint32_t>(get16(b, off)) |
           (static_cast<std::uint32_t>(get16(b, off + 2)) << 16);
}

std::uint32_t crc_of(const std::string& data) {
    return static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(data.size())));
}

}  // namespace

std::string zip_pack(const FileTree& tree) {
    std::string out;
    std::string central;
    std::size_t entries = 0;

    for (const auto& [path, content] : tree) {  // std::map iterates sorted by path
        if (path.empty()) throw ZipError("empty entry path");
        if (content.size() > 0xfffffffful) throw ZipError("entry too large: " + path);
        const std::uint32_t crc = crc_of(content);
        const std::uint32_t size = static_cast<std::uint32_t>(content.size());
        const std::uint32_t offset = static_cast<std::uint32_t>(out.size());

        put32(out, kLocalSig);
        put16(out, kVersion);
        put16(out, 0);  // flags
        put16(out, 0);  // stored
        put16(out, 0);  // mod time
        put16(out, kDosDate);
        put32(out, crc);
        put32(out, size);
        put32(out, size);
        put16(out, static_cast<std::uint16_t>(path.size()));
        put16(out, 0);  // extra
        out += path;
        out += content;

        put32(central, kCentralSig);
        put16(central, kVersion);  // made by
        put16(central, kVersion);  // needed
        put16(central, 0);
        put16(central, 0);
        put16(central, 0);
        put16(central, kDosDate);
        put32(central, crc);
        put32(central, size);
        put32(central, size);
        put16(central, static_cast<std::uint16_t>(path.size()));
        put16(central, 0);  // extra
        put16(central, 0);  // comment
        put16(central, 0);  // disk
        put16(central, 0);  // internal attrs
        put32(central, kExternalAttrs);
        put32(central, offset);
        central += path;
        ++entries;
    }

    const std::uint32_t central_offset = static_cast<std::uint32_t>(out.size());
    out += central;
    put32(out, kEocdSig);
    put16(out, 0);
    put16(out, 0);
    put16(out, static_cast<std::uint16_t>(entries));
    put16(out, static_cast<std::uint16_t>(entries));
    put32(out, static_cast<std::uint32_t>(central.size()));
    put32(out, central_offset);
    put16(out, 0);
    return out;
}

FileTree zip_unpack(const std::string& bytes) {
    if (bytes.size() < 22) throw ZipError("archive too small");

    // No archive comments are written, but scan a short tail to be safe.
    std::size_t eocd = std::string::npos;
    const std::size_t scan_start = bytes.size() >= 1024 + 22 ? bytes.size() - 1024 - 22 : 0;
    for (std::size_t i = bytes.size() - 22 + 1; i-- > scan_start;) {
        if (get32(bytes, i) == kEocdSig) {
            eocd = i;
            break;
        }
    }
    if (eocd == std::string::npos) throw ZipError("end of central directory not found");

    const std::uint16_t entries = get16(bytes, eocd + 10);
    std::size_t pos = get32(bytes, eocd + 16);

    FileTree tree;
    for (std::uint16_t e = 0; e < entries; ++e) {
        if (pos + 46 > bytes.size() || get32(bytes, pos) != kCentralSig) {
            throw ZipError("corrupt central directory");
        }
        const std::uint16_t method = get16(bytes, pos + 10);
        const std::uint32_t crc = get32(bytes, pos + 16);
        const std::uint32_t size = get32(bytes, pos + 24);
        const std::uint16_t name_len = get16(bytes, pos + 28);
        const std::uint16_t extra_len = get16(bytes, pos + 30);
        const std::uint16_t comment_len = get16(bytes, pos + 32);
        const std::uint32_t local_off = get32(bytes, pos + 42);
        if (method != 0) throw ZipError("unsupported compression method");
        if (pos + 46 + name_len > bytes.size()) throw ZipError("corrupt entry name");
        const std::string name = bytes.substr(pos + 46, name_len);

        if (local_off + 30 > bytes.size() || get32(bytes, local_off) != kLocalSig) {
            throw ZipError("corrupt local header for " + name);
        }
        const std::uint16_t lname_len = get16(bytes, local_off + 26);
        const std::uint16_t lextra_len = get16(bytes, local_off + 28);
        const std::size_t data_off = local_off + 30 + lname_len + lextra_len;
        if (data_off + size > bytes.size()) throw ZipError("truncated entry data for " + name);

        std::string content = bytes.substr(data_off, size);
        if (crc_of(content) != crc) throw ZipError("crc mismatch for " + name);
        tree[name] = std::move(content);
        pos += 46 + name_len + extra_len + comment_len;
    }
    return tree;
}

}  // namespace execforge
