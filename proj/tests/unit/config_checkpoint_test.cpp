#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "betadet/checkpoint.hpp"
#include "betadet/config.hpp"
#include "betadet/errors.hpp"
#include "betadet/rng.hpp"

namespace {

using betadet::ParseError;
using betadet::RunConfig;

std::size_t parse_error_line(const std::string& text) {
  try {
    betadet::parse_config(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  ADD_FAILURE() << "no ParseError for:\n" << text;
  return 0;
}

TEST(Config, DefaultsWhenEmpty) {
  const RunConfig c = betadet::parse_config("# nothing\n\n");
  EXPECT_EQ(c.seed, 1u);
  EXPECT_EQ(c.steps, 3000u);
  EXPECT_EQ(c.batch_size, 8u);
  EXPECT_DOUBLE_EQ(c.lr, 1e-3);
  EXPECT_DOUBLE_EQ(c.score_threshold, 0.30);
  EXPECT_EQ(c.model, betadet::ModelConfig{});
}

TEST(Config, ParsesKeys) {
  const RunConfig c = betadet::parse_config("seed = 9\n  lr=0.5 \ntrain_data = a b.txt\nloss_reg = 0\nheads = 2\n");
  EXPECT_EQ(c.seed, 9u);
  EXPECT_DOUBLE_EQ(c.lr, 0.5);
  EXPECT_EQ(c.train_data, "a b.txt");
  EXPECT_DOUBLE_EQ(c.loss.lambda_reg, 0.0);
  EXPECT_EQ(c.model.heads, 2u);
}

TEST(Config, ErrorsCarryLineNumbers) {
  EXPECT_EQ(parse_error_line("seed = 1\n\nbogus = 3\n"), 3u);
  EXPECT_EQ(parse_error_line("seed = 1\nseed = 2\n"), 2u);
  EXPECT_EQ(parse_error_line("# c\nlr = fast\n"), 2u);
  EXPECT_EQ(parse_error_line("steps = -4\n"), 1u);
  EXPECT_EQ(parse_error_line("steps = 12x\n"), 1u);
  EXPECT_EQ(parse_error_line("no equals sign\n"), 1u);
}

TEST(Config, RangeViolationsAreParseErrors) {
  EXPECT_THROW(betadet::parse_config("lr = 0\n"), ParseError);
  EXPECT_THROW(betadet::parse_config("batch_size = 0\n"), ParseError);
  EXPECT_THROW(betadet::parse_config("score_threshold = 1.5\n"), ParseError);
  EXPECT_THROW(betadet::parse_config("loss_reg = -1\n"), ParseError);
  EXPECT_THROW(betadet::parse_config("patch = 7\n"), ParseError);
}

TEST(Config, FormatParseRoundTrip) {
  RunConfig c;
  c.seed = 123456789012345ull;
  c.train_data = "/tmp/x y.txt";
  c.lr = 0.1 + 0.2;
  c.loss.lambda_reg = 1.0 / 3.0;
  c.score_threshold = 0.25;
  c.steps = 7;
  const std::string text = betadet::format_config(c);
  const RunConfig back = betadet::parse_config(text);
  EXPECT_EQ(betadet::format_config(back), text);
  EXPECT_EQ(back.lr, c.lr);
  EXPECT_EQ(back.loss.lambda_reg, c.loss.lambda_reg);
  EXPECT_EQ(back.eval_data, "");
}

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("betadet_ckpt_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }

  static RunConfig small_config() {
    RunConfig c;
    c.model.embed_dim = 16;
    c.model.heads = 2;
    c.model.num_queries = 4;
    c.steps = 3;
    return c;
  }

  std::filesystem::path dir_;
};

TEST_F(CheckpointTest, SaveLoadSaveIsByteIdentical) {
  const RunConfig cfg = small_config();
  const betadet::Detector model(cfg.model, 3);
  const auto ckpt = betadet::Checkpoint::capture(cfg, 42, model);
  betadet::save_checkpoint(ckpt, dir_ / "a.bdc");
  const auto loaded = betadet::load_checkpoint(dir_ / "a.bdc");
  betadet::save_checkpoint(loaded, dir_ / "b.bdc");
  const auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  };
  EXPECT_EQ(slurp(dir_ / "a.bdc"), slurp(dir_ / "b.bdc"));
  EXPECT_EQ(loaded.step, 42u);
  EXPECT_EQ(betadet::format_config(loaded.config), betadet::format_config(cfg));
}

TEST_F(CheckpointTest, RestoresExactValues) {
  const RunConfig cfg = small_config();
  const betadet::Detector source(cfg.model, 3);
  const auto ckpt = betadet::deserialize(betadet::serialize(betadet::Checkpoint::capture(cfg, 1, source)));
  betadet::Detector target(cfg.model, 99);
  ckpt.apply_to(target);
  for (std::size_t i = 0; i < source.parameters().size(); ++i) {
    EXPECT_TRUE(std::ranges::equal(source.parameters()[i].tensor.values(), target.parameters()[i].tensor.values()))
        << source.parameters()[i].name;
  }
}

TEST_F(CheckpointTest, MismatchedModelIsRejected) {
  const RunConfig cfg = small_config();
  const auto ckpt = betadet::Checkpoint::capture(cfg, 1, betadet::Detector(cfg.model, 3));
  betadet::ModelConfig other = cfg.model;
  other.num_queries = 5;
  betadet::Detector wrong(other, 3);
  EXPECT_FALSE(betadet::manifest_diff(ckpt, wrong).empty());
  EXPECT_THROW(ckpt.apply_to(wrong), betadet::InputError);
  EXPECT_TRUE(betadet::manifest_diff(ckpt, betadet::Detector(cfg.model, 8)).empty());
}

TEST_F(CheckpointTest, CorruptInputsAreParseErrors) {
  const RunConfig cfg = small_config();
  const std::string good = betadet::serialize(betadet::Checkpoint::capture(cfg, 1, betadet::Detector(cfg.model, 3)));
  EXPECT_THROW(betadet::deserialize("not a checkpoint\n"), ParseError);
  EXPECT_THROW(betadet::deserialize(good.substr(0, good.size() - 8)), ParseError);
  EXPECT_THROW(betadet::deserialize(good + "extra"), ParseError);
  std::string bad_tag = good;
  bad_tag.replace(bad_tag.find("step"), 4, "stop");
  EXPECT_THROW(betadet::deserialize(bad_tag), ParseError);
  EXPECT_THROW(betadet::load_checkpoint(dir_ / "missing.bdc"), std::exception);
}

TEST(Rng, SubstreamsAreReproducibleAndDistinct) {
  auto a = betadet::Rng::substream(5, 1), b = betadet::Rng::substream(5, 1), c = betadet::Rng::substream(5, 2);
  bool differ = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.uniform(), y = b.uniform(), z = c.uniform();
    EXPECT_EQ(x, y);
    EXPECT_GT(x, 0.0);
    EXPECT_LT(x, 1.0);
    differ = differ || x != z;
  }
  EXPECT_TRUE(differ);
}

}  // namespace
