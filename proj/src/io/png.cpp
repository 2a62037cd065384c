#include "jga/io/png.hpp"

#include <cmath>
#include <cstring>

#include <zlib.h>

#include "jga/io/fileutil.hpp"

namespace jga {
namespace {

const unsigned char kSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

void append_u32_be(std::string& out, std::uint32_t v) {
    for (int i = 3; i >= 0; --i) out.push_back(char((v >> (8 * i)) & 0xff));
}

std::uint32_t read_u32_be(const std::string& bytes, size_t& pos) {
    need_bytes(bytes, pos, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v = (v << 8) | static_cast<unsigned char>(bytes[pos + i]);
    pos += 4;
    return v;
}

void append_chunk(std::string& out, const char type[4], const std::string& payload) {
    append_u32_be(out, std::uint32_t(payload.size()));
    size_t crc_start = out.size();
    out.append(type, 4);
    out += payload;
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(out.data() + crc_start),
                uInt(4 + payload.size()));
    append_u32_be(out, std::uint32_t(crc));
}

std::string deflate_bytes(const std::string& raw) {
    uLongf bound = compressBound(uLong(raw.size()));
    std::string out(bound, '\0');
    int rc = compress2(reinterpret_cast<Bytef*>(out.data()), &bound,
                       reinterpret_cast<const Bytef*>(raw.data()), uLong(raw.size()), 6);
    check(rc == Z_OK, "deflate failed");
    out.resize(bound);
    return out;
}

std::string inflate_bytes(const std::string& compressed, size_t expected, size_t err_pos) {
    std::string out(expected, '\0');
    uLongf got = uLongf(expected);
    int rc = uncompress(reinterpret_cast<Bytef*>(out.data()), &got,
                        reinterpret_cast<const Bytef*>(compressed.data()),
                        uLong(compressed.size()));
    if (rc != Z_OK || got != expected)
        throw ParseError("bad or short zlib stream", err_pos);
    return out;
}

std::string encode_png(const std::string& raw_rows, int width, int height, int bit_depth,
                       int color_type) {
    std::string out(reinterpret_cast<const char*>(kSignature), 8);
    std::string ihdr;
    append_u32_be(ihdr, std::uint32_t(width));
    append_u32_be(ihdr, std::uint32_t(height));
    ihdr.push_back(char(bit_depth));
    ihdr.push_back(char(color_type));
    ihdr.push_back(0); // compression
    ihdr.push_back(0); // filter method
    ihdr.push_back(0); // no interlace
    append_chunk(out, "IHDR", ihdr);
    append_chunk(out, "IDAT", deflate_bytes(raw_rows));
    append_chunk(out, "IEND", "");
    return out;
}

int paeth(int a, int b, int c) {
    int p = a + b - c;
    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

// Returns defiltered scanlines (without filter bytes).
std::string decode_png(const std::string& bytes, int& width, int& height,
                       int expect_depth, int expect_color, int bpp) {
    need_bytes(bytes, 0, 8);
    if (std::memcmp(bytes.data(), kSignature, 8) != 0)
        throw ParseError("missing png signature", 0);

    size_t pos = 8;
    bool ihdr_seen = false, iend_seen = false;
    std::string idat;
    width = height = 0;

    while (!iend_seen) {
        size_t chunk_start = pos;
        std::uint32_t len = read_u32_be(bytes, pos);
        need_bytes(bytes, pos, size_t(len) + 8);
        std::string type = bytes.substr(pos, 4);
        const char* payload = bytes.data() + pos + 4;

        uLong crc = crc32(0L, Z_NULL, 0);
        crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + pos), 4 + len);
        size_t crc_pos = pos + 4 + len;
        std::uint32_t stored = 0;
        {
            size_t p = crc_pos;
            stored = read_u32_be(bytes, p);
        }
        if (std::uint32_t(crc) != stored)
            throw ParseError("chunk crc mismatch in " + type, chunk_start);
        pos = crc_pos + 4;

        if (type == "IHDR") {
            if (ihdr_seen) throw ParseError("duplicate IHDR", chunk_start);
            if (len != 13) throw ParseError("IHDR length must be 13", chunk_start);
            size_t p = chunk_start + 8;
            width = int(read_u32_be(bytes, p));
            height = int(read_u32_be(bytes, p));
            int depth = static_cast<unsigned char>(bytes[p]);
            int color = static_cast<unsigned char>(bytes[p + 1]);
            int comp = static_cast<unsigned char>(bytes[p + 2]);
            int filter = static_cast<unsigned char>(bytes[p + 3]);
            int interlace = static_cast<unsigned char>(bytes[p + 4]);
            if (width <= 0 || height <= 0)
                throw ParseError("bad image dimensions", chunk_start);
            if (size_t(width) * size_t(height) > (1u << 24))
                throw ParseError("image too large", chunk_start);
            if (color == 3) throw ParseError("palette images unsupported", chunk_start);
            if (interlace != 0) throw ParseError("interlaced images unsupported", chunk_start);
            if (comp != 0 || filter != 0)
                throw ParseError("nonstandard compression or filter method", chunk_start);
            if (depth != expect_depth || color != expect_color)
                throw ParseError("unsupported depth/color combination " +
                                     std::to_string(depth) + "/" + std::to_string(color),
                                 chunk_start);
            ihdr_seen = true;
        } else if (type == "IDAT") {
            if (!ihdr_seen) throw ParseError("IDAT before IHDR", chunk_start);
            idat.append(payload, len);
        } else if (type == "IEND") {
            iend_seen = true;
        } else if (!(type[0] & 0x20)) {
            // Unknown critical chunk.
            throw ParseError("unknown critical chunk " + type, chunk_start);
        }
    }
    check(ihdr_seen, "png lacks IHDR");

    size_t row_bytes = size_t(width) * bpp;
    std::string raw = inflate_bytes(idat, size_t(height) * (row_bytes + 1), 8);

    std::string rows(size_t(height) * row_bytes, '\0');
    auto cur = [&](size_t y, size_t i) -> unsigned char& {
        return reinterpret_cast<unsigned char&>(rows[y * row_bytes + i]);
    };
    for (int y = 0; y < height; ++y) {
        unsigned char filter = raw[size_t(y) * (row_bytes + 1)];
        const auto* src = reinterpret_cast<const unsigned char*>(
            raw.data() + size_t(y) * (row_bytes + 1) + 1);
        for (size_t i = 0; i < row_bytes; ++i) {
            int a = i >= size_t(bpp) ? cur(y, i - bpp) : 0;
            int b = y > 0 ? cur(y - 1, i) : 0;
            int c = (y > 0 && i >= size_t(bpp)) ? cur(y - 1, i - bpp) : 0;
            int x = src[i];
            int v;
            switch (filter) {
                case 0: v = x; break;
                case 1: v = x + a; break;
                case 2: v = x + b; break;
                case 3: v = x + (a + b) / 2; break;
                case 4: v = x + paeth(a, b, c); break;
                default:
                    throw ParseError("unknown row filter " + std::to_string(filter),
                                     8);
            }
            cur(y, i) = static_cast<unsigned char>(v & 0xff);
        }
    }
    return rows;
}

} // namespace

std::string png_bytes(const Image& img) {
    check(img.width > 0 && img.height > 0 && img.channels == 3,
          "png writer expects a nonempty rgb image");
    std::string raw;
    raw.reserve(size_t(img.height) * (size_t(img.width) * 3 + 1));
    for (int y = 0; y < img.height; ++y) {
        raw.push_back(0); // filter: none
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) {
                double v = std::clamp(img.at(x, y, c), 0.0, 1.0);
                raw.push_back(char(int(std::lround(v * 255.0))));
            }
    }
    return encode_png(raw, img.width, img.height, 8, 2);
}

Image parse_png_rgb(const std::string& bytes) {
    int w, h;
    std::string rows = decode_png(bytes, w, h, 8, 2, 3);
    Image img(w, h, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(x, y, c) =
                    static_cast<unsigned char>(rows[(size_t(y) * w + x) * 3 + c]) / 255.0;
    return img;
}

void write_png(const Image& img, const std::string& path) {
    write_file(path, png_bytes(img));
}

Image read_png_rgb(const std::string& path) { return parse_png_rgb(read_file(path)); }

std::string png_bytes_u16(const std::vector<std::uint16_t>& samples, int width, int height) {
    check(width > 0 && height > 0 && samples.size() == size_t(width) * height,
          "sample count must match dimensions");
    std::string raw;
    raw.reserve(size_t(height) * (size_t(width) * 2 + 1));
    for (int y = 0; y < height; ++y) {
        raw.push_back(0);
        for (int x = 0; x < width; ++x) {
            std::uint16_t v = samples[size_t(y) * width + x];
            raw.push_back(char(v >> 8)); // network byte order per the format
            raw.push_back(char(v & 0xff));
        }
    }
    return encode_png(raw, width, height, 16, 0);
}

std::vector<std::uint16_t> parse_png_u16(const std::string& bytes, int& width, int& height) {
    std::string rows = decode_png(bytes, width, height, 16, 0, 2);
    std::vector<std::uint16_t> out(size_t(width) * height);
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = std::uint16_t((static_cast<unsigned char>(rows[2 * i]) << 8) |
                               static_cast<unsigned char>(rows[2 * i + 1]));
    return out;
}

void write_depth_png(const DepthMap& depth, double scale, const std::string& path) {
    check(scale > 0, "depth scale must be positive");
    std::vector<std::uint16_t> samples(depth.depth.size());
    for (size_t i = 0; i < samples.size(); ++i) {
        double v = std::lround(depth.depth[i] * scale);
        samples[i] = std::uint16_t(std::clamp(v, 0.0, 65535.0));
    }
    write_file(path, png_bytes_u16(samples, depth.width, depth.height));
}

DepthMap read_depth_png(const std::string& path, double scale) {
    check(scale > 0, "depth scale must be positive");
    int w, h;
    std::vector<std::uint16_t> samples = parse_png_u16(read_file(path), w, h);
    DepthMap depth(w, h);
    for (size_t i = 0; i < samples.size(); ++i) depth.depth[i] = samples[i] / scale;
    return depth;
}

} // namespace jga
