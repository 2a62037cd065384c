#include "jga/io/tensor_io.hpp"

#include "jga/io/fileutil.hpp"

namespace jga {

std::string tensor_bytes(const TensorBlob& blob) {
    check(!blob.dims.empty() && blob.dims.size() <= 8, "tensor rank must be 1..8");
    check(blob.data.size() == blob.numel(), "tensor payload does not match dims");
    std::string out = "JGAT";
    append_u32(out, std::uint32_t(blob.dims.size()));
    for (auto d : blob.dims) append_u64(out, d);
    for (double v : blob.data) append_f32_le(out, float(v));
    return out;
}

TensorBlob parse_tensor_at(const std::string& bytes, std::size_t& pos) {
    need_bytes(bytes, pos, 4);
    if (bytes.compare(pos, 4, "JGAT") != 0)
        throw ParseError("missing JGAT magic", pos);
    pos += 4;
    std::uint32_t rank = read_u32(bytes, pos);
    if (rank == 0 || rank > 8)
        throw ParseError("tensor rank " + std::to_string(rank) + " out of range", pos - 4);
    TensorBlob blob;
    std::size_t numel = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        std::uint64_t d = read_u64(bytes, pos);
        if (d == 0 || d > (1ull << 32))
            throw ParseError("tensor dim " + std::to_string(d) + " out of range", pos - 8);
        numel *= d;
        if (numel > (1ull << 28)) throw ParseError("tensor payload too large", pos - 8);
        blob.dims.push_back(d);
    }
    need_bytes(bytes, pos, numel * 4);
    blob.data.resize(numel);
    for (std::size_t i = 0; i < numel; ++i) blob.data[i] = double(read_f32_le(bytes, pos));
    return blob;
}

TensorBlob parse_tensor(const std::string& bytes) {
    std::size_t pos = 0;
    TensorBlob blob = parse_tensor_at(bytes, pos);
    if (pos != bytes.size()) throw ParseError("trailing bytes after payload", pos);
    return blob;
}

void write_tensor_file(const TensorBlob& blob, const std::string& path) {
    write_file(path, tensor_bytes(blob));
}

TensorBlob read_tensor_file(const std::string& path) {
    return parse_tensor(read_file(path));
}

void write_latent(const LatentGrid& grid, const std::string& path) {
    check(grid.resolution() > 0, "cannot write an empty latent grid");
    TensorBlob blob;
    auto r = std::uint64_t(grid.resolution());
    blob.dims = {r, r, r, std::uint64_t(grid.channels())};
    blob.data = grid.data();
    write_tensor_file(blob, path);
}

LatentGrid read_latent(const std::string& path) {
    TensorBlob blob = read_tensor_file(path);
    if (blob.dims.size() != 4 || blob.dims[0] != blob.dims[1] || blob.dims[0] != blob.dims[2])
        throw ParseError("latent grid must be [r,r,r,C]", 0);
    LatentGrid grid(int(blob.dims[0]), int(blob.dims[3]));
    grid.data() = blob.data;
    return grid;
}

void write_voxels(const SparseVoxelTensor& voxels, const std::string& path) {
    check(voxels.finalized(), "write_voxels needs a finalized tensor");
    int c = voxels.channels();
    TensorBlob blob;
    blob.dims = {std::uint64_t(voxels.size() + 1), std::uint64_t(3 + c)};
    blob.data.reserve(blob.numel());
    blob.data.push_back(double(voxels.resolution()));
    blob.data.push_back(double(c));
    for (int k = 0; k < c + 1; ++k) blob.data.push_back(0.0);
    for (std::size_t i = 0; i < voxels.size(); ++i) {
        const Coord& co = voxels.coord(i);
        for (int a = 0; a < 3; ++a) blob.data.push_back(double(co[a]));
        const double* f = voxels.feature(i);
        blob.data.insert(blob.data.end(), f, f + c);
    }
    write_tensor_file(blob, path);
}

SparseVoxelTensor read_voxels(const std::string& path) {
    TensorBlob blob = read_tensor_file(path);
    if (blob.dims.size() != 2 || blob.dims[0] < 1 || blob.dims[1] < 4)
        throw ParseError("voxel file must be [N+1, 3+C]", 0);
    int cols = int(blob.dims[1]);
    int resolution = int(blob.data[0]);
    int c = int(blob.data[1]);
    if (c != cols - 3 || resolution < 1)
        throw ParseError("voxel descriptor row is inconsistent", 0);
    SparseVoxelTensor out(resolution, c);
    for (std::size_t row = 1; row < blob.dims[0]; ++row) {
        const double* d = blob.data.data() + row * cols;
        Coord co{std::int32_t(d[0]), std::int32_t(d[1]), std::int32_t(d[2])};
        out.push(co, d + 3);
    }
    out.finalize();
    return out;
}

} // namespace jga
