#pragma once

#include <string>

#include "ufp/model.hpp"

namespace ufp {

// Little-endian binary checkpoint: magic "UFPC", u32 format version,
// architecture descriptor, training metadata, master + deployed parameters,
// FNV-1a checksum trailer over the payload. load(save(m)) is bit-identical.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const DualHeadModel& m, const std::string& path);
DualHeadModel load_checkpoint(const std::string& path);

} // namespace ufp
