#include "jga/io/obj.hpp"

#include <sstream>

#include "jga/io/fileutil.hpp"

namespace jga {
namespace {

// Face corners may be v, v/t, v//n or v/t/n; only the vertex index matters.
int face_index(const std::string& corner, size_t nv, size_t offset) {
    size_t slash = corner.find('/');
    std::string head = slash == std::string::npos ? corner : corner.substr(0, slash);
    long idx;
    try {
        size_t used = 0;
        idx = std::stol(head, &used);
        if (used != head.size()) throw std::invalid_argument(head);
    } catch (const std::exception&) {
        throw ParseError("bad face index '" + corner + "'", offset);
    }
    if (idx < 0) idx = long(nv) + idx + 1; // negative indices count from the end
    if (idx < 1 || size_t(idx) > nv)
        throw ParseError("face index " + std::to_string(idx) + " out of range", offset);
    return int(idx - 1);
}

} // namespace

SmplMesh parse_obj(const std::string& text) {
    SmplMesh mesh;
    bool any_color = false;
    std::istringstream is(text);
    std::string line;
    size_t offset = 0;
    while (std::getline(is, line)) {
        size_t line_offset = offset;
        offset += line.size() + 1;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag) || tag[0] == '#') continue;
        if (tag == "v") {
            double x, y, z;
            if (!(ls >> x >> y >> z))
                throw ParseError("vertex line needs three coordinates", line_offset);
            mesh.vertices.push_back({x, y, z});
            double r, g, b;
            if (ls >> r >> g >> b) {
                mesh.vertex_colors.resize(mesh.vertices.size(), Vec3{0, 0, 0});
                mesh.vertex_colors.back() = {r, g, b};
                any_color = true;
            } else if (any_color) {
                throw ParseError("mixed colored and uncolored vertices", line_offset);
            }
        } else if (tag == "f") {
            std::vector<std::string> corners;
            std::string c;
            while (ls >> c) corners.push_back(c);
            if (corners.size() < 3)
                throw ParseError("face needs at least three corners", line_offset);
            // Fan-triangulate polygons.
            int i0 = face_index(corners[0], mesh.vertices.size(), line_offset);
            for (size_t k = 2; k < corners.size(); ++k) {
                int i1 = face_index(corners[k - 1], mesh.vertices.size(), line_offset);
                int i2 = face_index(corners[k], mesh.vertices.size(), line_offset);
                mesh.faces.push_back({i0, i1, i2});
            }
        }
    }
    if (any_color) mesh.vertex_colors.resize(mesh.vertices.size(), Vec3{0, 0, 0});
    mesh.visible.assign(mesh.vertices.size(), any_color ? 1 : 0);
    if (!any_color) mesh.vertex_colors.assign(mesh.vertices.size(), Vec3{0, 0, 0});
    mesh.validate();
    return mesh;
}

SmplMesh read_obj(const std::string& path) { return parse_obj(read_file(path)); }

std::string obj_text(const SmplMesh& mesh) {
    std::ostringstream os;
    os.precision(17);
    bool colors = mesh.has_colors();
    for (size_t i = 0; i < mesh.vertices.size(); ++i) {
        const Vec3& v = mesh.vertices[i];
        os << "v " << v.x << ' ' << v.y << ' ' << v.z;
        if (colors) {
            const Vec3& c = mesh.vertex_colors[i];
            os << ' ' << c.x << ' ' << c.y << ' ' << c.z;
        }
        os << '\n';
    }
    for (const auto& f : mesh.faces)
        os << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
    return os.str();
}

void write_obj(const SmplMesh& mesh, const std::string& path) {
    write_file(path, obj_text(mesh));
}

} // namespace jga
