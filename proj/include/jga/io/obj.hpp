#pragma once

#include <string>

#include "jga/core/types.hpp"

namespace jga {

// Wavefront OBJ subset: v lines (optionally with vertex colors) and
// triangular f lines; other directives are ignored.
SmplMesh parse_obj(const std::string& text);
SmplMesh read_obj(const std::string& path);

std::string obj_text(const SmplMesh& mesh);
void write_obj(const SmplMesh& mesh, const std::string& path);

} // namespace jga
