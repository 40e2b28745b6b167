#include "mopa/dataset.h"

#include <bit>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "mopa/config.h"

namespace mopa {

static_assert(std::endian::native == std::endian::little,
              "dataset payloads are little-endian");

namespace {

std::size_t record_floats(const DatasetInfo& info) {
  const std::size_t img = static_cast<std::size_t>(info.channels) * info.image_size * info.image_size;
  return 2 * (static_cast<std::size_t>(info.state_dim) + img + info.joint_feature_dim) +
         info.action_dim + 2;  // + reward + done
}

void append(std::vector<float>& rec, const std::vector<float>& v, std::size_t expected,
            const char* what) {
  if (v.size() != expected)
    throw std::runtime_error(std::string("dataset: ragged field ") + what);
  rec.insert(rec.end(), v.begin(), v.end());
}

}  // namespace

void save_dataset(const std::string& manifest_path, const ReplayBuffer& data,
                  const EnvConfig& cfg, std::uint64_t seed) {
  if (data.empty()) throw std::invalid_argument("save_dataset: empty buffer");
  DatasetInfo info;
  info.task = task_name(cfg.task);
  info.count = data.size();
  info.state_dim = static_cast<int>(data.at(0).state.size());
  info.action_dim = static_cast<int>(data.at(0).action.size());
  info.image_size = data.at(0).image.empty() ? 0 : cfg.image_size;
  info.channels = data.at(0).image.empty() ? 0 : 3;
  info.joint_feature_dim = static_cast<int>(data.at(0).joint_features.size());
  info.seed = seed;
  info.records_file = std::filesystem::path(manifest_path).filename().string() + ".bin";

  std::ofstream mf(manifest_path);
  if (!mf) throw std::runtime_error("save_dataset: cannot open " + manifest_path);
  mf << "version = 1\n";
  mf << "task = " << info.task << "\n";
  mf << "count = " << info.count << "\n";
  mf << "state_dim = " << info.state_dim << "\n";
  mf << "action_dim = " << info.action_dim << "\n";
  mf << "image_size = " << info.image_size << "\n";
  mf << "channels = " << info.channels << "\n";
  mf << "joint_feature_dim = " << info.joint_feature_dim << "\n";
  mf << "seed = " << info.seed << "\n";
  mf << "records = " << info.records_file << "\n";

  const std::string bin_path =
      (std::filesystem::path(manifest_path).parent_path() / info.records_file).string();
  std::ofstream bf(bin_path, std::ios::binary);
  if (!bf) throw std::runtime_error("save_dataset: cannot open " + bin_path);

  const std::size_t img = static_cast<std::size_t>(info.channels) * info.image_size * info.image_size;
  std::vector<float> rec;
  rec.reserve(record_floats(info));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Transition& t = data.at(i);
    rec.clear();
    append(rec, t.state, static_cast<std::size_t>(info.state_dim), "state");
    append(rec, t.image, img, "image");
    append(rec, t.joint_features, static_cast<std::size_t>(info.joint_feature_dim), "jf");
    append(rec, t.action, static_cast<std::size_t>(info.action_dim), "action");
    rec.push_back(t.reward);
    append(rec, t.next_state, static_cast<std::size_t>(info.state_dim), "next_state");
    append(rec, t.next_image, img, "next_image");
    append(rec, t.next_joint_features, static_cast<std::size_t>(info.joint_feature_dim), "next_jf");
    rec.push_back(t.done ? 1.0f : 0.0f);
    bf.write(reinterpret_cast<const char*>(rec.data()),
             static_cast<std::streamsize>(rec.size() * sizeof(float)));
  }
  if (!bf) throw std::runtime_error("save_dataset: write failed for " + bin_path);
}

ReplayBuffer load_dataset(const std::string& manifest_path, DatasetInfo* info_out) {
  KeyValueConfig kv = KeyValueConfig::from_file(manifest_path);
  DatasetInfo info;
  info.task = kv.get_string("task", "push");
  info.count = static_cast<std::size_t>(kv.get_int("count", 0));
  info.state_dim = kv.get_int("state_dim", 0);
  info.action_dim = kv.get_int("action_dim", 0);
  info.image_size = kv.get_int("image_size", 0);
  info.channels = kv.get_int("channels", 0);
  info.joint_feature_dim = kv.get_int("joint_feature_dim", 0);
  info.seed = static_cast<std::uint64_t>(kv.get_double("seed", 0));
  info.records_file = kv.require("records");
  if (info.count == 0) throw std::runtime_error("load_dataset: empty dataset " + manifest_path);

  const std::string bin_path =
      (std::filesystem::path(manifest_path).parent_path() / info.records_file).string();
  std::ifstream bf(bin_path, std::ios::binary);
  if (!bf) throw std::runtime_error("load_dataset: cannot open " + bin_path);

  const std::size_t img = static_cast<std::size_t>(info.channels) * info.image_size * info.image_size;
  const std::size_t rec_floats = record_floats(info);
  std::vector<float> rec(rec_floats);
  ReplayBuffer out(info.count);
  for (std::size_t i = 0; i < info.count; ++i) {
    bf.read(reinterpret_cast<char*>(rec.data()),
            static_cast<std::streamsize>(rec.size() * sizeof(float)));
    if (!bf) throw std::runtime_error("load_dataset: truncated records in " + bin_path);
    Transition t;
    auto cursor = rec.begin();
    const auto take = [&](std::size_t n) {
      std::vector<float> v(cursor, cursor + static_cast<std::ptrdiff_t>(n));
      cursor += static_cast<std::ptrdiff_t>(n);
      return v;
    };
    t.state = take(static_cast<std::size_t>(info.state_dim));
    t.image = take(img);
    t.joint_features = take(static_cast<std::size_t>(info.joint_feature_dim));
    t.action = take(static_cast<std::size_t>(info.action_dim));
    t.reward = *cursor++;
    t.next_state = take(static_cast<std::size_t>(info.state_dim));
    t.next_image = take(img);
    t.next_joint_features = take(static_cast<std::size_t>(info.joint_feature_dim));
    t.done = *cursor++ != 0.0f;
    out.push(std::move(t));
  }
  if (info_out) *info_out = info;
  return out;
}

}  // namespace mopa
