#include "jga/io/fileutil.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace jga {

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    check(f.good(), "cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    check(f.good(), "cannot write " + path);
    f.write(bytes.data(), std::streamsize(bytes.size()));
    check(f.good(), "short write to " + path);
}

void append_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void append_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void append_f32_le(std::string& out, float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    append_u32(out, u);
}

void need_bytes(const std::string& bytes, std::size_t pos, std::size_t n) {
    if (pos + n > bytes.size())
        throw ParseError("truncated payload, expected " +
                             std::to_string(pos + n - bytes.size()) + " more bytes",
                         bytes.size());
}

std::uint32_t read_u32(const std::string& bytes, std::size_t& pos) {
    need_bytes(bytes, pos, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= std::uint32_t(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    pos += 4;
    return v;
}

std::uint64_t read_u64(const std::string& bytes, std::size_t& pos) {
    need_bytes(bytes, pos, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= std::uint64_t(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    pos += 8;
    return v;
}

float read_f32_le(const std::string& bytes, std::size_t& pos) {
    std::uint32_t u = read_u32(bytes, pos);
    float f;
    std::memcpy(&f, &u, 4);
    return f;
}

} // namespace jga
