#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "betadet/errors.hpp"
#include "betadet/rng.hpp"
#include "betadet/synthdata.hpp"

namespace {

namespace fs = std::filesystem;
using betadet::Scene;

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("betadet_synth_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void check_scene_invariants(const Scene& s) {
  ASSERT_GE(s.objects.size(), 1u);
  ASSERT_LE(s.objects.size(), 6u);
  ASSERT_EQ(s.image.size, 64u);
  ASSERT_EQ(s.image.pixels.size(), 64u * 64u * 3u);
  for (double v : s.image.pixels) {
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 1.0);
    ASSERT_DOUBLE_EQ(std::round(v * 255.0), v * 255.0);
  }
  for (const auto& o : s.objects) {
    const auto b = betadet::to_xyxy(o.box);
    const double w = std::min(b.x1, 1.0) - std::max(b.x0, 0.0);
    const double h = std::min(b.y1, 1.0) - std::max(b.y0, 0.0);
    EXPECT_GT(w, 0.0);
    EXPECT_GT(h, 0.0);
    EXPECT_EQ(o.stage, betadet::stage_of(o.y_true));
    EXPECT_EQ(o.y_target, betadet::stage_to_target(o.stage));
    EXPECT_GT(o.y_true, 0.0);
    EXPECT_LT(o.y_true, 1.0);
  }
}

TEST(StageToTarget, Examples) {
  EXPECT_EQ(betadet::stage_to_target(1), 0.5);
  EXPECT_NEAR(betadet::stage_to_target(0), 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(betadet::stage_to_target(2), 5.0 / 6.0, 1e-15);
  EXPECT_THROW(betadet::stage_to_target(3), betadet::DomainError);
  EXPECT_THROW(betadet::stage_to_target(-1), betadet::DomainError);
}

TEST(StageOf, Thresholds) {
  EXPECT_EQ(betadet::stage_of(0.0), 0);
  EXPECT_EQ(betadet::stage_of(0.333), 0);
  EXPECT_EQ(betadet::stage_of(0.334), 1);
  EXPECT_EQ(betadet::stage_of(0.666), 1);
  EXPECT_EQ(betadet::stage_of(0.667), 2);
  EXPECT_EQ(betadet::stage_of(1.0), 2);
}

TEST(Generate, SameSeedIdenticalScenes) {
  const auto a = betadet::generate(5, 20), b = betadet::generate(5, 20);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].image, b[i].image);
    ASSERT_EQ(a[i].objects.size(), b[i].objects.size());
    for (std::size_t j = 0; j < a[i].objects.size(); ++j) {
      EXPECT_EQ(a[i].objects[j].box, b[i].objects[j].box);
      EXPECT_EQ(a[i].objects[j].y_true, b[i].objects[j].y_true);
    }
  }
  EXPECT_NE(betadet::generate(6, 1)[0].image, a[0].image);
}

TEST(Generate, SceneDependsOnlyOnSeedAndIndex) {
  const auto all = betadet::generate(3, 10);
  EXPECT_EQ(betadet::generate_scene(3, 7).image, all[7].image);
}

TEST(Generate, SceneInvariants) {
  for (const Scene& s : betadet::generate(11, 300)) check_scene_invariants(s);
}

TEST(Generate, CentersAreSeparated) {
  // Unclipped boxes are the disk's bounding square, so they expose center and
  // radius exactly.
  const auto inside = [](const betadet::BoxCXCYWH& b) {
    const auto x = betadet::to_xyxy(b);
    return x.x0 > 0 && x.y0 > 0 && x.x1 < 1 && x.y1 < 1;
  };
  std::size_t checked = 0;
  for (const Scene& s : betadet::generate(12, 300)) {
    for (std::size_t i = 0; i < s.objects.size(); ++i) {
      for (std::size_t j = i + 1; j < s.objects.size(); ++j) {
        const auto& a = s.objects[i].box;
        const auto& b = s.objects[j].box;
        if (!inside(a) || !inside(b)) continue;
        const double d = std::hypot(a.cx - b.cx, a.cy - b.cy);
        EXPECT_GE(d, 0.6 * 0.5 * (a.w + b.w) - 1e-12);
        ++checked;
      }
    }
  }
  EXPECT_GT(checked, 100u);
}

TEST(Generate, StageFrequenciesNearThirds) {
  std::array<double, 3> counts{};
  double total = 0;
  for (const Scene& s : betadet::generate(1, 1000)) {
    for (const auto& o : s.objects) {
      ++counts[static_cast<std::size_t>(o.stage)];
      ++total;
    }
  }
  for (double c : counts) EXPECT_NEAR(c / total, 1.0 / 3.0, 0.05);
}

TEST(SynthInvariants, TargetGapBoundedAndMeanTwelfth) {
  betadet::Rng rng(101);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double y = rng.uniform();
    const double gap = std::fabs(betadet::stage_to_target(betadet::stage_of(y)) - y);
    EXPECT_LE(gap, 1.0 / 3.0);
    sum += gap;
  }
  EXPECT_NEAR(sum / 1e5, 1.0 / 12.0, 0.01);
}

TEST(Dataset, RoundTrip) {
  const auto scenes = betadet::generate(21, 25);
  const fs::path dir = temp_dir("roundtrip");
  betadet::write_dataset(scenes, dir);
  const auto back = betadet::read_dataset(dir);
  ASSERT_EQ(back.size(), scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    EXPECT_EQ(back[i].image, scenes[i].image);
    ASSERT_EQ(back[i].objects.size(), scenes[i].objects.size());
    for (std::size_t j = 0; j < scenes[i].objects.size(); ++j) {
      const auto& a = scenes[i].objects[j];
      const auto& b = back[i].objects[j];
      EXPECT_NEAR(a.box.cx, b.box.cx, 1e-8);
      EXPECT_NEAR(a.box.cy, b.box.cy, 1e-8);
      EXPECT_NEAR(a.box.w, b.box.w, 1e-8);
      EXPECT_NEAR(a.box.h, b.box.h, 1e-8);
      EXPECT_EQ(a.stage, b.stage);
      EXPECT_EQ(a.y_target, b.y_target);
      EXPECT_NEAR(a.y_true, b.y_true, 1e-8);
    }
  }
  fs::remove_all(dir);
}

TEST(Dataset, WriteIsByteDeterministic) {
  const auto scenes = betadet::generate(22, 5);
  const fs::path a = temp_dir("det_a"), b = temp_dir("det_b");
  betadet::write_dataset(scenes, a);
  betadet::write_dataset(scenes, b);
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    EXPECT_EQ(slurp(entry.path()), slurp(b / fs::relative(entry.path(), a))) << entry.path();
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Dataset, HandWrittenAnnotationParses) {
  const fs::path dir = temp_dir("fixture");
  fs::create_directories(dir / "images");
  betadet::Image img{64, std::vector<double>(64 * 64 * 3, 0.4)};
  betadet::write_ppm(img, dir / "images" / "000000.ppm");
  std::ofstream(dir / "annotations.txt") << "0 0.25 0.5 0.125 0.1875 2\n";
  const auto scenes = betadet::read_dataset(dir);
  ASSERT_EQ(scenes.size(), 1u);
  ASSERT_EQ(scenes[0].objects.size(), 1u);
  const auto& o = scenes[0].objects[0];
  EXPECT_EQ(o.box.cx, 0.25);
  EXPECT_EQ(o.box.cy, 0.5);
  EXPECT_EQ(o.box.w, 0.125);
  EXPECT_EQ(o.box.h, 0.1875);
  EXPECT_EQ(o.stage, 2);
  EXPECT_NEAR(o.y_target, 5.0 / 6.0, 1e-15);
  EXPECT_TRUE(std::isnan(o.y_true));
  fs::remove_all(dir);
}

TEST(Dataset, EmptyAnnotationsRejected) {
  const fs::path dir = temp_dir("empty");
  fs::create_directories(dir / "images");
  betadet::write_ppm({64, std::vector<double>(64 * 64 * 3, 0.4)}, dir / "images" / "000000.ppm");
  std::ofstream(dir / "annotations.txt") << "";
  EXPECT_THROW(betadet::read_dataset(dir), std::exception);
  fs::remove_all(dir);
}

TEST(Dataset, MalformedLineReportsLineNumber) {
  const fs::path dir = temp_dir("malformed");
  fs::create_directories(dir / "images");
  betadet::write_ppm({64, std::vector<double>(64 * 64 * 3, 0.4)}, dir / "images" / "000000.ppm");
  std::ofstream(dir / "annotations.txt") << "0 0.5 0.5 0.1 0.1 1\n0 0.5 oops 0.1 0.1 1\n";
  try {
    betadet::read_dataset(dir);
    FAIL() << "expected ParseError";
  } catch (const betadet::ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  fs::remove_all(dir);
}

TEST(SynthInvariants, SerializedNumbersRoundTrip) {
  // Property over random scenes from many seeds.
  const fs::path dir = temp_dir("property");
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    const auto scenes = betadet::generate(seed, 3);
    betadet::write_dataset(scenes, dir);
    const auto back = betadet::read_dataset(dir);
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      for (std::size_t j = 0; j < scenes[i].objects.size(); ++j) {
        EXPECT_NEAR(scenes[i].objects[j].box.cx, back[i].objects[j].box.cx, 1e-8);
        EXPECT_NEAR(scenes[i].objects[j].box.w, back[i].objects[j].box.w, 1e-8);
        EXPECT_NEAR(scenes[i].objects[j].y_true, back[i].objects[j].y_true, 1e-8);
      }
    }
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  fs::remove_all(dir);
}

}  // namespace
