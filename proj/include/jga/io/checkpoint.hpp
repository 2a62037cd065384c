#pragma once

#include <map>
#include <string>

#include "jga/nn/params.hpp"

namespace jga {

// "JGAC" container: version, JSON manifest (parameter names in payload order
// plus free-form metadata), then one JGAT blob per parameter. float32
// storage; values round-trip exactly once they have passed through a save.
using CheckpointMeta = std::map<std::string, std::string>;

std::string checkpoint_bytes(const ParamStore& store, const CheckpointMeta& meta);
CheckpointMeta parse_checkpoint(const std::string& bytes, ParamStore& store);

void save_checkpoint(const ParamStore& store, const CheckpointMeta& meta,
                     const std::string& path);
// The store must already contain identically shaped parameters.
CheckpointMeta load_checkpoint(ParamStore& store, const std::string& path);

} // namespace jga
