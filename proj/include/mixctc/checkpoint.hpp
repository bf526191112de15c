#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mixctc/tensor.hpp"

namespace mixctc::harness {

inline const char kCheckpointMagic[9] = "MXCTC001";  // 8 bytes + NUL

/// Serialized model state: named tensors, the vocabulary block (the
/// vocabulary file text), and the resolved configuration echoed as
/// key = value lines.  Round-trips bit-exactly.
struct Checkpoint {
  std::string vocab_text;
  std::string aux_vocab_text;  // letter-side vocabulary for hybrid models; may be empty
  std::vector<std::pair<std::string, Tensor>> tensors;
  std::string config_text;
};

/// Layout, all little-endian: 8-byte magic "MXCTC001"; u64 length + UTF-8
/// vocabulary block; u64 tensor count; per tensor u64 name length + name,
/// u64 rank, u64 extents, f64 values; then u64 length + UTF-8 auxiliary
/// vocabulary block and u64 length + UTF-8 config echo.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);

/// Throws with the byte offset on magic mismatch or truncation.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace mixctc::harness
