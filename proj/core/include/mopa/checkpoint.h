#pragma once

#include <string>
#include <vector>

#include "mopa/params.h"

namespace mopa {

// Checkpoint archive: a text header describing every tensor (name, dtype,
// shape) and optional metadata lines, followed by the raw little-endian f32
// payloads in header order. Round-trips are bit-exact.
//
//   MOPA-CKPT 1
//   tensor <name> f32 <rank> <d0> <d1> ...
//   meta <key> <value>
//   data
//   <payload bytes>

struct Checkpoint {
  ParamSet params;
  std::vector<std::pair<std::string, std::string>> meta;

  std::string meta_value(const std::string& key, const std::string& fallback = "") const;
};

void save_checkpoint(const std::string& path, const ParamSet& params,
                     const std::vector<std::pair<std::string, std::string>>& meta = {});
Checkpoint load_checkpoint(const std::string& path);

}  // namespace mopa
