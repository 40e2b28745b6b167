#pragma once

#include <string>

#include "mopa/env.h"
#include "mopa/replay.h"

namespace mopa {

// On-disk transition dataset: a text manifest (flat key-value schema:
// version, task, count, state_dim, action_dim, image_size, channels,
// joint_feature_dim, seed, records) plus a binary blob of fixed-size
// little-endian f32 records in transition order:
//   [state | image | jf | action | reward | next_state | next_image |
//    next_jf | done]
// Round-trips are bit-exact.
struct DatasetInfo {
  std::string task = "push";
  std::size_t count = 0;
  int state_dim = 0;
  int action_dim = 0;
  int image_size = 0;
  int channels = 3;
  int joint_feature_dim = 0;
  std::uint64_t seed = 0;
  std::string records_file;
};

void save_dataset(const std::string& manifest_path, const ReplayBuffer& data,
                  const EnvConfig& cfg, std::uint64_t seed);
ReplayBuffer load_dataset(const std::string& manifest_path, DatasetInfo* info = nullptr);

}  // namespace mopa
