#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "betadet/detection.hpp"

namespace betadet {

/// Square RGB raster, row-major HWC, values in [0, 1] on the 1/255 grid.
struct Image {
  std::size_t size = 0;
  std::vector<double> pixels;

  double at(std::size_t row, std::size_t col, std::size_t channel) const {
    return pixels[(row * size + col) * 3 + channel];
  }

  friend bool operator==(const Image&, const Image&) = default;
};

struct Scene {
  Image image;
  std::vector<GroundTruthObject> objects;
};

/// Rendering knobs; radii in pixels.
struct SceneConfig {
  std::size_t image_size = 64;
  double min_radius = 4.0;
  double max_radius = 10.0;
  int min_objects = 1;
  int max_objects = 6;
  /// Minimum center distance as a fraction of the radius sum.
  double min_separation = 0.6;
};

/// 0 below 1/3, 1 below 2/3, else 2.
int stage_of(double y_true);

/// Stage midpoints {1/6, 1/2, 5/6}. Throws DomainError for other stages.
double stage_to_target(int stage);

/// Deterministic scenes; scene i depends only on (seed, i).
std::vector<Scene> generate(std::uint64_t seed, std::size_t n_scenes, const SceneConfig& config = {});
Scene generate_scene(std::uint64_t seed, std::size_t index, const SceneConfig& config = {});

/// Writes images/NNNNNN.ppm, annotations.txt and truths.txt under dir.
void write_dataset(std::span<const Scene> scenes, const std::filesystem::path& dir);

/// Reads a dataset directory. If truths.txt is absent, y_true is NaN.
/// Throws ParseError on malformed lines and InputError on structural problems.
std::vector<Scene> read_dataset(const std::filesystem::path& dir);

void write_ppm(const Image& image, const std::filesystem::path& path);
Image read_ppm(const std::filesystem::path& path);

}  // namespace betadet
