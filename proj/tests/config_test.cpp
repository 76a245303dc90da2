#include "feedrec/config.hpp"

#include <filesystem>
#include <sstream>
#include <stdexcept>

#include "feedrec/errors.hpp"
#include "feedrec/experiments.hpp"
#include "gtest/gtest.h"

namespace feedrec {
namespace {

Config parse(const std::string& text) {
  std::istringstream in(text);
  return Config::parse(in);
}

TEST(Config, ParsesCommentsBlanksAndSpaces) {
  const auto c = parse("# header\n\n  gamma = 0.8 \nstyle=quadratic\n");
  EXPECT_EQ(c.get_double("gamma", 0.0), 0.8);
  EXPECT_EQ(c.get_string("style", ""), "quadratic");
  EXPECT_EQ(c.entries().size(), 2u);
}

TEST(Config, LaterAssignmentWins) {
  EXPECT_EQ(parse("lr=0.1\nlr=0.2\n").get_double("lr", 0.0), 0.2);
}

TEST(Config, OverrideBeatsFile) {
  auto c = parse("iterations=200\n");
  c.apply_override("iterations=3");
  EXPECT_EQ(c.get_size("iterations", 0), 3u);
  EXPECT_THROW(c.apply_override("novalue"), std::invalid_argument);
  EXPECT_THROW(c.apply_override("=1"), std::invalid_argument);
}

TEST(Config, MalformedLineNamesSourceAndLine) {
  std::istringstream in("a=1\nbroken\n");
  try {
    Config::parse(in, "run.cfg");
    FAIL() << "expected a throw";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("run.cfg:2"), std::string::npos) << e.what();
  }
}

TEST(Config, BadValuesNameTheKey) {
  const auto c = parse("gamma=high\nepisodes=-3\nsimulate=maybe\n");
  for (auto f : {+[](const Config& c) { c.get_double("gamma", 0.0); },
                 +[](const Config& c) { c.get_size("episodes", 0); },
                 +[](const Config& c) { c.get_bool("simulate", true); }}) {
    try {
      f(c);
      FAIL() << "expected a throw";
    } catch (const std::invalid_argument& e) {
      EXPECT_NE(std::string(e.what()).find("config key"), std::string::npos);
    }
  }
}

TEST(Config, BoolSpellings) {
  const auto c = parse("a=yes\nb=off\nc=1\nd=false\n");
  EXPECT_TRUE(c.get_bool("a", false));
  EXPECT_FALSE(c.get_bool("b", true));
  EXPECT_TRUE(c.get_bool("c", false));
  EXPECT_FALSE(c.get_bool("d", true));
  EXPECT_TRUE(c.get_bool("missing", true));
}

TEST(Config, UnusedKeysReportTypos) {
  const auto c = parse("gamma=0.9\ngamme=0.8\n");
  c.get_double("gamma", 0.0);
  EXPECT_EQ(c.unused_keys(), std::vector<std::string>{"gamme"});
}

TEST(Config, WriteParsesBack) {
  const auto c = parse("b=2\na=x y\n");
  std::ostringstream out;
  c.write(out);
  EXPECT_EQ(out.str(), "a=x y\nb=2\n");
  EXPECT_EQ(parse(out.str()).entries(), c.entries());
}

TEST(Config, MissingFileIsMissingInput) {
  EXPECT_THROW(Config::load(std::filesystem::path("/nonexistent/feedrec.cfg")), MissingInput);
}

TEST(Setup, PaperDefaults) {
  const auto s = exp::setup_from_config(Config{});
  const auto& t = s.train;
  EXPECT_EQ(t.omega.w[0], 1.0);
  EXPECT_EQ(t.omega.w[1], 0.005);
  EXPECT_EQ(t.omega.w[2], 0.005);
  EXPECT_EQ(t.gamma, 0.9);
  EXPECT_EQ(t.lr, 0.005);
  EXPECT_EQ(t.batch_size, 256u);
  EXPECT_EQ(t.buffer_capacity, 10000u);
  EXPECT_EQ(t.loss.cap, 5.0);
  EXPECT_EQ(s.ncis_cap, 5.0);
  EXPECT_EQ(t.eps0, 0.5);
  EXPECT_EQ(t.eps_decay, 0.99);
  EXPECT_EQ(t.eps_min, 0.05);
  EXPECT_EQ(s.dims.item_dim, 20u);
  EXPECT_EQ(s.mlp_hidden, 50u);
  EXPECT_EQ(s.sim.max_depth, 50u);
  EXPECT_EQ(s.n_users, 100u);
  EXPECT_EQ(s.n_items, 500u);
  EXPECT_EQ(s.episodes, 10000u);
}

TEST(Setup, KeysReachTheirFields) {
  const auto s = exp::setup_from_config(
      parse("style=quadratic\ngamma=0.5\nlr=0.01\nsimulate=false\nseed=42\nomega.clicks=2\ncap=3\n"));
  EXPECT_EQ(s.sim.style, sim::Style::Quadratic);
  EXPECT_EQ(s.train.gamma, 0.5);
  EXPECT_EQ(s.train.loss.gamma, 0.5);
  EXPECT_EQ(s.train.lr, 0.01);
  EXPECT_FALSE(s.train.simulate);
  EXPECT_EQ(s.train.seed, 42u);
  EXPECT_EQ(s.train.omega.w[0], 2.0);
  EXPECT_EQ(s.ncis_cap, 3.0);
}

TEST(Setup, SimulationStudyRewardsDelayedMetrics) {
  const auto s = exp::setup_from_config(exp::simulation_study_config({}, "quadratic"));
  EXPECT_EQ(s.sim.style, sim::Style::Quadratic);
  EXPECT_EQ(s.train.omega.w[0], 0.0);
  EXPECT_EQ(s.train.omega.w[1], 1.0);
  EXPECT_EQ(s.train.omega.w[2], 1.0);

  // an explicit weight is kept
  const auto kept = exp::setup_from_config(exp::simulation_study_config(parse("omega.clicks=0.5\n"), "linear"));
  EXPECT_EQ(kept.train.omega.w[0], 0.5);
  EXPECT_EQ(kept.train.omega.w[1], 1.0);
}

TEST(Setup, RejectsBadStyleAndFraction) {
  EXPECT_ANY_THROW(exp::setup_from_config(parse("style=cubic\n")));
  EXPECT_THROW(exp::setup_from_config(parse("train_fraction=0\n")), std::invalid_argument);
}

}  // namespace
}  // namespace feedrec
