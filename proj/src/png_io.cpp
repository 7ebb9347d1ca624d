#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

#include <zlib.h>

#include "rnsde/tensor.hpp"

namespace rnsde {
namespace {

std::uint32_t crc_of(const unsigned char* type, const std::vector<unsigned char>& payload) {
    std::uint32_t c = crc32(0L, Z_NULL, 0);
    c = crc32(c, type, 4);
    if (!payload.empty()) c = crc32(c, payload.data(), static_cast<uInt>(payload.size()));
    return c;
}

void put_u32(std::vector<unsigned char>& v, std::uint32_t x) {
    v.push_back(static_cast<unsigned char>(x >> 24));
    v.push_back(static_cast<unsigned char>(x >> 16));
    v.push_back(static_cast<unsigned char>(x >> 8));
    v.push_back(static_cast<unsigned char>(x));
}

void write_chunk(std::ofstream& os, const char* type, const std::vector<unsigned char>& payload) {
    std::vector<unsigned char> out;
    put_u32(out, static_cast<std::uint32_t>(payload.size()));
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    put_u32(out, crc_of(reinterpret_cast<const unsigned char*>(type), payload));
    os.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

}  // namespace

void export_png(const std::string& path, const Tensor& img) {
    if (img.ndim() != 2) throw std::invalid_argument("export_png expects a 2-D tensor");
    const int h = img.dim(0), w = img.dim(1);

    std::vector<unsigned char> raw;
    raw.reserve(static_cast<std::size_t>(h) * (w + 1));
    for (int r = 0; r < h; ++r) {
        raw.push_back(0);  // filter: none
        for (int c = 0; c < w; ++c) {
            float v = std::clamp(img.at(r, c), 0.0f, 1.0f);
            raw.push_back(static_cast<unsigned char>(v * 255.0f + 0.5f));
        }
    }

    uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> z(zlen);
    if (compress2(z.data(), &zlen, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw std::runtime_error("png deflate failed");
    z.resize(zlen);

    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path);
    static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    os.write(reinterpret_cast<const char*>(sig), 8);

    std::vector<unsigned char> ihdr;
    put_u32(ihdr, static_cast<std::uint32_t>(w));
    put_u32(ihdr, static_cast<std::uint32_t>(h));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(0);  // grayscale
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    write_chunk(os, "IHDR", ihdr);
    write_chunk(os, "IDAT", z);
    write_chunk(os, "IEND", {});
    if (!os) throw std::runtime_error("write failed: " + path);
}

}  // namespace rnsde
