#pragma once

#include <string>

#include "jga/core/types.hpp"

namespace jga {

// Splat-style PLY: one vertex element with float properties x,y,z,
// red,green,blue, scale_0..2, rot_0..3, opacity. Binary payloads are
// little-endian float32 and round-trip bit-exactly.
void write_ply(const GaussianSet& set, const std::string& path, bool binary = true);
GaussianSet read_ply(const std::string& path);

std::string ply_bytes(const GaussianSet& set, bool binary = true);
GaussianSet parse_ply(const std::string& bytes);

} // namespace jga
