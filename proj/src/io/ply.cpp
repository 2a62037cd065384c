#include "jga/io/ply.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "jga/io/fileutil.hpp"

namespace jga {
namespace {

constexpr std::array<const char*, 14> kProps = {
    "x",       "y",     "z",     "red",   "green", "blue",  "scale_0",
    "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3", "opacity"};

std::array<double, 14> pack(const GaussianAttributes& g) {
    return {g.position.x,  g.position.y,  g.position.z,  g.color.x,     g.color.y,
            g.color.z,     g.log_scale.x, g.log_scale.y, g.log_scale.z, g.rotation.w,
            g.rotation.x,  g.rotation.y,  g.rotation.z,  g.opacity_logit};
}

GaussianAttributes unpack(const std::array<double, 14>& v) {
    GaussianAttributes g;
    g.position = {v[0], v[1], v[2]};
    g.color = {v[3], v[4], v[5]};
    g.log_scale = {v[6], v[7], v[8]};
    g.rotation = {v[9], v[10], v[11], v[12]};
    g.opacity_logit = v[13];
    return g;
}

void append_f32(std::string& out, double v) {
    float f = float(v);
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    for (int i = 0; i < 4; ++i) out.push_back(char((u >> (8 * i)) & 0xff));
}

double read_f32(const std::string& bytes, size_t& pos) {
    if (pos + 4 > bytes.size())
        throw ParseError("truncated payload, expected " + std::to_string(4) +
                             " more bytes",
                         pos);
    std::uint32_t u = 0;
    for (int i = 0; i < 4; ++i)
        u |= std::uint32_t(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    pos += 4;
    float f;
    std::memcpy(&f, &u, 4);
    return double(f);
}

std::string format_f32(double v) {
    // Shortest decimal form that reparses to the same float32.
    float f = float(v);
    for (int prec = 6; prec <= 9; ++prec) {
        std::ostringstream os;
        os.precision(prec);
        os << f;
        if (std::stof(os.str()) == f) return os.str();
    }
    std::ostringstream os;
    os.precision(9);
    os << f;
    return os.str();
}

// Reads one header line ending in '\n'; pos advances past it.
std::string header_line(const std::string& bytes, size_t& pos) {
    size_t nl = bytes.find('\n', pos);
    if (nl == std::string::npos) throw ParseError("header line without newline", pos);
    std::string line = bytes.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = nl + 1;
    return line;
}

} // namespace

std::string ply_bytes(const GaussianSet& set, bool binary) {
    std::string out = "ply\n";
    out += binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n";
    out += "element vertex " + std::to_string(set.gaussians.size()) + "\n";
    for (size_t i = 0; i < 14; ++i)
        out += std::string("property float ") + kProps[i] + "\n";
    out += "end_header\n";

    for (const GaussianAttributes& g : set.gaussians) {
        std::array<double, 14> v = pack(g);
        if (binary) {
            for (size_t i = 0; i < 14; ++i) append_f32(out, v[i]);
        } else {
            for (size_t i = 0; i < 14; ++i) {
                out += format_f32(v[i]);
                out += i + 1 < 14 ? ' ' : '\n';
            }
        }
    }
    return out;
}

GaussianSet parse_ply(const std::string& bytes) {
    size_t pos = 0;
    if (header_line(bytes, pos) != "ply") throw ParseError("missing ply magic", 0);

    bool binary = false, format_seen = false;
    size_t count = 0;
    bool element_seen = false;
    std::vector<int> slot_of; // property order -> packed slot

    while (true) {
        size_t line_start = pos;
        std::string line = header_line(bytes, pos);
        std::istringstream is(line);
        std::string tok;
        is >> tok;
        if (tok == "comment") continue;
        if (tok == "format") {
            std::string fmt, ver;
            is >> fmt >> ver;
            if (fmt == "binary_little_endian")
                binary = true;
            else if (fmt == "ascii")
                binary = false;
            else
                throw ParseError("unsupported format '" + fmt + "'", line_start);
            format_seen = true;
        } else if (tok == "element") {
            std::string kind;
            is >> kind >> count;
            if (kind != "vertex" || element_seen)
                throw ParseError("expected a single vertex element", line_start);
            element_seen = true;
        } else if (tok == "property") {
            std::string type, name;
            is >> type >> name;
            if (type != "float")
                throw ParseError("unsupported property type '" + type + "'", line_start);
            int slot = -1;
            for (size_t i = 0; i < 14; ++i)
                if (name == kProps[i]) slot = int(i);
            if (slot < 0)
                throw ParseError("unknown property '" + name + "'", line_start);
            for (int s : slot_of)
                if (s == slot)
                    throw ParseError("duplicate property '" + name + "'", line_start);
            slot_of.push_back(slot);
        } else if (tok == "end_header") {
            break;
        } else {
            throw ParseError("unexpected header token '" + tok + "'", line_start);
        }
    }
    if (!format_seen) throw ParseError("header lacks a format line", pos);
    if (!element_seen) throw ParseError("header lacks a vertex element", pos);
    if (slot_of.size() != 14)
        throw ParseError("expected 14 vertex properties, found " +
                             std::to_string(slot_of.size()),
                         pos);

    GaussianSet set;
    set.gaussians.reserve(count);
    if (binary) {
        size_t need = count * 14 * 4;
        if (bytes.size() - pos < need)
            throw ParseError("truncated payload, expected " +
                                 std::to_string(need - (bytes.size() - pos)) +
                                 " more bytes",
                             bytes.size());
        for (size_t v = 0; v < count; ++v) {
            std::array<double, 14> vals{};
            for (int s : slot_of) vals[size_t(s)] = read_f32(bytes, pos);
            set.gaussians.push_back(unpack(vals));
        }
        if (pos != bytes.size())
            throw ParseError("trailing bytes after payload", pos);
    } else {
        std::istringstream is(bytes.substr(pos));
        for (size_t v = 0; v < count; ++v) {
            std::array<double, 14> vals{};
            for (int s : slot_of) {
                double d;
                if (!(is >> d))
                    throw ParseError("truncated payload, expected " +
                                         std::to_string((count - v) * 14) +
                                         " more values",
                                     pos);
                vals[size_t(s)] = d;
            }
            set.gaussians.push_back(unpack(vals));
        }
        double extra;
        if (is >> extra) throw ParseError("trailing values after payload", pos);
    }
    return set;
}

void write_ply(const GaussianSet& set, const std::string& path, bool binary) {
    write_file(path, ply_bytes(set, binary));
}

GaussianSet read_ply(const std::string& path) { return parse_ply(read_file(path)); }

} // namespace jga
