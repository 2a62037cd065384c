#include "jga/io/checkpoint.hpp"

#include <json.hpp>

#include "jga/io/fileutil.hpp"
#include "jga/io/tensor_io.hpp"

namespace jga {

std::string checkpoint_bytes(const ParamStore& store, const CheckpointMeta& meta) {
    nlohmann::json manifest;
    manifest["version"] = 1;
    std::vector<std::string> names;
    for (const auto& [name, p] : store.all()) names.push_back(name);
    manifest["params"] = names;
    manifest["meta"] = meta;
    std::string mtext = manifest.dump();

    std::string out = "JGAC";
    append_u32(out, 1);
    append_u64(out, mtext.size());
    out += mtext;
    for (const auto& [name, p] : store.all()) {
        TensorBlob blob;
        for (size_t i = 0; i < p.value.rank(); ++i)
            blob.dims.push_back(p.value.dim(i));
        blob.data.assign(p.value.data(), p.value.data() + p.value.size());
        out += tensor_bytes(blob);
    }
    return out;
}

CheckpointMeta parse_checkpoint(const std::string& bytes, ParamStore& store) {
    std::size_t pos = 0;
    need_bytes(bytes, pos, 4);
    if (bytes.compare(0, 4, "JGAC") != 0) throw ParseError("missing JGAC magic", 0);
    pos = 4;
    std::uint32_t version = read_u32(bytes, pos);
    if (version != 1)
        throw ParseError("unsupported checkpoint version " + std::to_string(version), 4);
    std::uint64_t mlen = read_u64(bytes, pos);
    need_bytes(bytes, pos, mlen);
    std::string mtext = bytes.substr(pos, mlen);
    pos += mlen;

    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(mtext);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("bad manifest: ") + e.what(), 16 + e.byte);
    }
    if (!manifest.contains("params") || !manifest["params"].is_array())
        throw ParseError("manifest lacks a params list", 16);
    if (manifest["params"].size() != store.all().size())
        throw Error("checkpoint holds " + std::to_string(manifest["params"].size()) +
                    " parameters, model expects " + std::to_string(store.all().size()));

    for (const auto& jn : manifest["params"]) {
        if (!jn.is_string()) throw ParseError("non-string parameter name", 16);
        std::string name = jn.get<std::string>();
        std::size_t blob_pos = pos;
        TensorBlob blob = parse_tensor_at(bytes, pos);
        if (!store.has(name))
            throw Error("checkpoint parameter '" + name + "' unknown to this model");
        Param& p = store.get(name);
        if (blob.dims.size() != p.value.rank())
            throw ParseError("parameter '" + name + "' rank mismatch", blob_pos);
        for (size_t i = 0; i < blob.dims.size(); ++i)
            if (blob.dims[i] != p.value.dim(i))
                throw ParseError("parameter '" + name + "' shape mismatch", blob_pos);
        std::copy(blob.data.begin(), blob.data.end(), p.value.data());
    }
    if (pos != bytes.size()) throw ParseError("trailing bytes after payload", pos);

    CheckpointMeta meta;
    if (manifest.contains("meta"))
        for (auto it = manifest["meta"].begin(); it != manifest["meta"].end(); ++it)
            meta[it.key()] = it.value().is_string() ? it.value().get<std::string>()
                                                    : it.value().dump();
    return meta;
}

void save_checkpoint(const ParamStore& store, const CheckpointMeta& meta,
                     const std::string& path) {
    write_file(path, checkpoint_bytes(store, meta));
}

CheckpointMeta load_checkpoint(ParamStore& store, const std::string& path) {
    return parse_checkpoint(read_file(path), store);
}

} // namespace jga
