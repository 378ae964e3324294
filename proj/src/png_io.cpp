#include "wmc/png_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

namespace wmc {

namespace {

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

void write_chunk(std::ofstream& os, const char type[4],
                 const std::vector<uint8_t>& data) {
    std::vector<uint8_t> head;
    put_u32(head, static_cast<uint32_t>(data.size()));
    os.write(reinterpret_cast<const char*>(head.data()),
             static_cast<std::streamsize>(head.size()));
    os.write(type, 4);
    if (!data.empty()) {
        os.write(reinterpret_cast<const char*>(data.data()),
                 static_cast<std::streamsize>(data.size()));
    }
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(type), 4);
    if (!data.empty()) {
        crc = crc32(crc, data.data(), static_cast<uInt>(data.size()));
    }
    std::vector<uint8_t> tail;
    put_u32(tail, static_cast<uint32_t>(crc));
    os.write(reinterpret_cast<const char*>(tail.data()), 4);
}

void write_png_bytes(const std::string& path, int h, int w, int channels,
                     const std::vector<uint8_t>& pixels) {
    // filter byte 0 per scanline, then zlib
    std::vector<uint8_t> raw;
    raw.reserve(static_cast<size_t>(h) * (1 + static_cast<size_t>(w) * channels));
    for (int y = 0; y < h; ++y) {
        raw.push_back(0);
        const uint8_t* row = pixels.data() + static_cast<size_t>(y) * w * channels;
        raw.insert(raw.end(), row, row + static_cast<size_t>(w) * channels);
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<uint8_t> compressed(bound);
    check(compress2(compressed.data(), &bound, raw.data(),
                    static_cast<uLong>(raw.size()), 9) == Z_OK,
          "png: deflate failed");
    compressed.resize(bound);

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    check(static_cast<bool>(os), "png: cannot open for write: " + path);
    static const uint8_t signature[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    os.write(reinterpret_cast<const char*>(signature), 8);
    std::vector<uint8_t> ihdr;
    put_u32(ihdr, static_cast<uint32_t>(w));
    put_u32(ihdr, static_cast<uint32_t>(h));
    ihdr.push_back(8);                                    // bit depth
    ihdr.push_back(channels == 3 ? 2 : 0);                // color type
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    write_chunk(os, "IHDR", ihdr);
    write_chunk(os, "IDAT", compressed);
    write_chunk(os, "IEND", {});
    check(static_cast<bool>(os), "png: write failed: " + path);
}

uint8_t to_u8(float v) {
    return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

}  // namespace

void write_png(const std::string& path, const Tensor32& rgb) {
    check(rgb.shape.size() == 3 && rgb.shape[2] == 3, "png: expected [H,W,3]");
    const int h = rgb.shape[0], w = rgb.shape[1];
    std::vector<uint8_t> pixels(static_cast<size_t>(h) * w * 3);
    for (size_t i = 0; i < pixels.size(); ++i) {
        pixels[i] = to_u8(rgb[static_cast<int64_t>(i)]);
    }
    write_png_bytes(path, h, w, 3, pixels);
}

void write_png_gray(const std::string& path, const Tensor32& gray, float lo, float hi) {
    check(gray.shape.size() == 2, "png: expected [H,W]");
    const int h = gray.shape[0], w = gray.shape[1];
    const float range = std::max(1e-9f, hi - lo);
    std::vector<uint8_t> pixels(static_cast<size_t>(h) * w);
    for (size_t i = 0; i < pixels.size(); ++i) {
        pixels[i] = to_u8((gray[static_cast<int64_t>(i)] - lo) / range);
    }
    write_png_bytes(path, h, w, 1, pixels);
}

}  // namespace wmc
