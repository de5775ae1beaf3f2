#ifndef LPDM_CHECKPOINT_H
#define LPDM_CHECKPOINT_H

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lpdm/model.h"

// Checkpoint container. On-disk layout:
//   "LPDM1"                                      5-byte magic
//   u64 LE header length
//   header text, one "key=value\n" line per entry, keys sorted
//   per tensor: u32 LE name length, name bytes, u32 LE ndim,
//               i32 LE dims, f32 LE data
//   u64 LE FNV-1a hash of every preceding byte
// Loading verifies the hash before touching any state, so a truncated or
// corrupt file never yields a partial restore.

namespace lpdm {

struct TensorRecord {
    std::string name;
    std::vector<int> shape;
    std::vector<float> data;
};

struct Checkpoint {
    std::map<std::string, std::string> meta;
    std::vector<TensorRecord> tensors;

    const TensorRecord* find(const std::string& name) const;
    /// Meta lookup that throws DataError when the key is missing.
    const std::string& require(const std::string& key) const;
};

uint64_t fnv1a64(const unsigned char* data, size_t n);

void save_checkpoint_file(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint_file(const std::string& path);

/// Model-config round trip through the checkpoint header.
void meta_set_unet_config(Checkpoint& ck, const UNetConfig& cfg);
UNetConfig unet_config_from_meta(const Checkpoint& ck);

}  // namespace lpdm

#endif
