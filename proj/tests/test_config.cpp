#include <gtest/gtest.h>

#include "relop/config.hpp"

using namespace relop;

TEST(Config, Defaults) {
  Config c;
  EXPECT_EQ(c.integer("seed"), 1);
  EXPECT_DOUBLE_EQ(c.num("hashtag.p_o"), 1e-6);
  EXPECT_FALSE(c.flag("hashtag.weighted"));
  EXPECT_EQ(c.int_list("sweep.label_counts"), (std::vector<int>{4, 8, 12, 16}));
  EXPECT_EQ(c.list("sweep.metrics"), (std::vector<std::string>{"euclidean", "geodesic"}));
  EXPECT_EQ(c.str("oowe.alpha"), "0.5");
}

TEST(Config, LoadLines) {
  Config c;
  const auto n = c.load("# comment\n\n  seed = 7  \noowe.epochs=3\nsweep.metrics = geodesic , \n");
  EXPECT_EQ(n, 3u);
  EXPECT_EQ(c.u64("seed"), 7u);
  EXPECT_EQ(c.integer("oowe.epochs"), 3);
  EXPECT_EQ(c.list("sweep.metrics"), (std::vector<std::string>{"geodesic"}));
}

TEST(Config, Errors) {
  Config c;
  EXPECT_THROW(c.load("nonsense\n"), UsageError);
  EXPECT_THROW(c.load("seed = 1\nseed = 2\n"), UsageError);
  EXPECT_THROW(c.load("bogus.key = 1\n"), UsageError);
  EXPECT_THROW(c.set("bogus", "1"), UsageError);
  EXPECT_THROW(c.str("bogus"), UsageError);
  c.set("seed", "abc");
  EXPECT_THROW(c.integer("seed"), UsageError);
  c.set("seed", "-3");
  EXPECT_THROW(c.u64("seed"), UsageError);
  c.set("hashtag.weighted", "yes");
  EXPECT_THROW(c.flag("hashtag.weighted"), UsageError);
  c.set("sweep.label_counts", "4,x");
  EXPECT_THROW(c.int_list("sweep.label_counts"), UsageError);
}

TEST(Config, DumpIsSortedAndComplete) {
  Config c;
  const auto d = c.dump();
  std::vector<std::string> keys;
  for (const auto& line : split(d, '\n'))
    if (!line.empty()) keys.push_back(line.substr(0, line.find(" = ")));
  EXPECT_TRUE(std::is_sorted(keys.begin(), keys.end()));
  EXPECT_EQ(keys.size(), Config::defaults().size());
}

TEST(Config, HashTracksValues) {
  Config a, b;
  EXPECT_EQ(a.hash(), b.hash());
  b.set("oowe.alpha", "0.25");
  EXPECT_NE(a.hash(), b.hash());
  b.set("oowe.alpha", "0.5");
  EXPECT_EQ(a.hash(), b.hash());
}

TEST(Config, StageSeeds) {
  Config a;
  EXPECT_NE(a.stage_seed("train"), a.stage_seed("sweep"));
  EXPECT_EQ(a.stage_seed("train"), Config().stage_seed("train"));
  Config b;
  b.set("seed", "2");
  EXPECT_NE(a.stage_seed("train"), b.stage_seed("train"));
}

TEST(Config, ShippedConfigLoads) {
  Config c;
  const auto text = read_file(std::string(RELOP_DATA_DIR) + "/../configs/default.conf");
  EXPECT_GT(c.load(text), 5u);
  EXPECT_EQ(c.integer("synth.classes"), 4);
}
