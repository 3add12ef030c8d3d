#pragma once

// Minimal truecolor PNG encoder: one IDAT chunk, filter type 0 on every row.

#include <zlib.h>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace png {

struct Image {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

    Image(std::uint32_t w, std::uint32_t h, std::uint8_t fill = 255) : width(w), height(h), rgb(std::size_t(w) * h * 3, fill) {}

    void set(std::uint32_t x, std::uint32_t y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        auto* p = &rgb[(std::size_t(y) * width + x) * 3];
        p[0] = r;
        p[1] = g;
        p[2] = b;
    }
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<char>((v >> shift) & 0xff));
}

inline void chunk(std::string& out, const char* type, const std::string& data) {
    put_u32(out, static_cast<std::uint32_t>(data.size()));
    const std::string body = std::string(type, 4) + data;
    out += body;
    put_u32(out, static_cast<std::uint32_t>(
                     crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()))));
}

}  // namespace detail

inline std::string encode(const Image& img) {
    if (img.width == 0 || img.height == 0) throw std::invalid_argument("png: empty image");
    std::string ihdr;
    detail::put_u32(ihdr, img.width);
    detail::put_u32(ihdr, img.height);
    ihdr += std::string{8, 2, 0, 0, 0};  // 8-bit depth, truecolor, deflate, adaptive filter, no interlace

    std::vector<std::uint8_t> raw;
    const std::size_t stride = std::size_t(img.width) * 3;
    raw.reserve((stride + 1) * img.height);
    for (std::uint32_t y = 0; y < img.height; ++y) {
        raw.push_back(0);
        raw.insert(raw.end(), img.rgb.begin() + static_cast<std::ptrdiff_t>(y * stride),
                   img.rgb.begin() + static_cast<std::ptrdiff_t>((y + 1) * stride));
    }
    uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
    std::string packed(packed_size, '\0');
    if (compress2(reinterpret_cast<Bytef*>(packed.data()), &packed_size, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK)
        throw std::runtime_error("png: deflate failed");
    packed.resize(packed_size);

    std::string out("\x89PNG\r\n\x1a\n", 8);
    detail::chunk(out, "IHDR", ihdr);
    detail::chunk(out, "IDAT", packed);
    detail::chunk(out, "IEND", "");
    return out;
}

}  // namespace png
