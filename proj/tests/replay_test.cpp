#include <doctest.h>

#include <filesystem>

#include "mopa/dataset.h"
#include "mopa/env.h"
#include "mopa/replay.h"
#include "mopa/rng.h"

using namespace mopa;

namespace {

Transition make_transition(int tag, int state_dim = 4, int action_dim = 2) {
  Transition t;
  t.state.assign(static_cast<std::size_t>(state_dim), static_cast<float>(tag));
  t.action.assign(static_cast<std::size_t>(action_dim), 0.01f * tag);
  t.reward = static_cast<float>(tag);
  t.next_state.assign(static_cast<std::size_t>(state_dim), static_cast<float>(tag + 1));
  t.joint_features.assign(3, 0.5f);
  t.next_joint_features.assign(3, 0.5f);
  t.done = tag % 7 == 0;
  return t;
}

}  // namespace

TEST_CASE("ring buffer evicts FIFO at capacity") {
  ReplayBuffer buf(4);
  for (int i = 0; i < 6; ++i) buf.push(make_transition(i));
  CHECK(buf.size() == 4);
  CHECK(buf.at(0).reward == doctest::Approx(2.0));  // oldest surviving
  CHECK(buf.at(3).reward == doctest::Approx(5.0));
  CHECK_THROWS(buf.at(4));
}

TEST_CASE("sampling covers the buffer uniformly enough") {
  ReplayBuffer buf(16);
  for (int i = 0; i < 16; ++i) buf.push(make_transition(i));
  Rng rng(3);
  std::vector<int> counts(16, 0);
  for (int i = 0; i < 16000; ++i) {
    const Transition& t = buf.sample(rng);
    counts[static_cast<std::size_t>(t.reward)] += 1;
  }
  for (int c : counts) {
    CHECK(c > 700);
    CHECK(c < 1300);
  }
}

TEST_CASE("transition finiteness check") {
  Transition t = make_transition(1);
  CHECK(t.finite());
  t.next_state[0] = std::numeric_limits<float>::infinity();
  CHECK_FALSE(t.finite());
}

TEST_CASE("dataset round trips bit exactly") {
  EnvConfig cfg = make_push_config();
  cfg.image_size = 8;
  Rng rng(5);
  ReplayBuffer buf(64);
  for (int i = 0; i < 64; ++i) {
    Transition t;
    const auto fill = [&](std::vector<float>& v, std::size_t n) {
      v.resize(n);
      for (float& x : v) x = static_cast<float>(rng.uniform(-1, 1));
    };
    fill(t.state, 17);
    fill(t.image, 8 * 8 * 3);
    fill(t.joint_features, 10);
    fill(t.action, 3);
    fill(t.next_state, 17);
    fill(t.next_image, 8 * 8 * 3);
    fill(t.next_joint_features, 10);
    t.reward = static_cast<float>(rng.uniform(-1, 200));
    t.done = i % 9 == 0;
    buf.push(std::move(t));
  }
  const auto dir = std::filesystem::temp_directory_path();
  const std::string manifest = (dir / "mopa_ds_test.manifest").string();
  save_dataset(manifest, buf, cfg, 777);

  DatasetInfo info;
  ReplayBuffer back = load_dataset(manifest, &info);
  CHECK(info.count == 64);
  CHECK(info.task == "push");
  CHECK(info.seed == 777);
  REQUIRE(back.size() == buf.size());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    CHECK(back.at(i).state == buf.at(i).state);
    CHECK(back.at(i).image == buf.at(i).image);
    CHECK(back.at(i).joint_features == buf.at(i).joint_features);
    CHECK(back.at(i).action == buf.at(i).action);
    CHECK(back.at(i).reward == buf.at(i).reward);
    CHECK(back.at(i).next_state == buf.at(i).next_state);
    CHECK(back.at(i).next_image == buf.at(i).next_image);
    CHECK(back.at(i).done == buf.at(i).done);
  }
  std::filesystem::remove(manifest);
  std::filesystem::remove(manifest + ".bin");
}
