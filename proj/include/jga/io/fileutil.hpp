#pragma once

#include <string>

#include "jga/common.hpp"

namespace jga {

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

// Little-endian scalar append/read for binary containers.
void append_u32(std::string& out, std::uint32_t v);
void append_u64(std::string& out, std::uint64_t v);
void append_f32_le(std::string& out, float v);
std::uint32_t read_u32(const std::string& bytes, std::size_t& pos);
std::uint64_t read_u64(const std::string& bytes, std::size_t& pos);
float read_f32_le(const std::string& bytes, std::size_t& pos);

void need_bytes(const std::string& bytes, std::size_t pos, std::size_t n);

} // namespace jga
