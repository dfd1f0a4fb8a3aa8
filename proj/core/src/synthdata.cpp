#include "betadet/synthdata.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>

#include "betadet/errors.hpp"
#include "betadet/rng.hpp"

namespace betadet {

int stage_of(double y_true) {
  if (y_true < 1.0 / 3.0) return 0;
  if (y_true < 2.0 / 3.0) return 1;
  return 2;
}

double stage_to_target(int stage) {
  switch (stage) {
    case 0:
      return 1.0 / 6.0;
    case 1:
      return 0.5;
    case 2:
      return 5.0 / 6.0;
    default:
      throw DomainError("stage must be 0, 1 or 2, got " + std::to_string(stage));
  }
}

namespace {

constexpr double kUnripe[3] = {0.2, 0.7, 0.2};
constexpr double kRipe[3] = {0.85, 0.15, 0.1};
constexpr double kBackground = 0.45;
constexpr double kBackgroundNoise = 0.05;
constexpr double kFruitNoise = 0.03;
constexpr int kPlacementAttempts = 1000;

double quantize(double v) { return std::round(255.0 * std::clamp(v, 0.0, 1.0)) / 255.0; }

struct Disk {
  double cx;
  double cy;
  double r;
  double y_true;
};

bool try_scene(Rng& rng, const SceneConfig& cfg, Scene& scene) {
  const double s = static_cast<double>(cfg.image_size);
  const auto span = static_cast<std::uint64_t>(cfg.max_objects - cfg.min_objects + 1);
  const int count = cfg.min_objects + static_cast<int>(rng.below(span));
  std::vector<Disk> disks;
  for (int k = 0; k < count; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
      const double r = rng.uniform(cfg.min_radius, cfg.max_radius);
      const double cx = rng.uniform(0.5 * r, s - 0.5 * r);
      const double cy = rng.uniform(0.5 * r, s - 0.5 * r);
      placed = std::all_of(disks.begin(), disks.end(), [&](const Disk& d) {
        return std::hypot(cx - d.cx, cy - d.cy) >= cfg.min_separation * (r + d.r);
      });
      if (placed) disks.push_back({cx, cy, r, 0.0});
    }
    if (!placed) return false;
  }
  for (Disk& d : disks) d.y_true = rng.uniform();

  Image& img = scene.image;
  img.size = cfg.image_size;
  img.pixels.resize(cfg.image_size * cfg.image_size * 3);
  for (double& v : img.pixels) v = kBackground + rng.uniform(-kBackgroundNoise, kBackgroundNoise);
  for (const Disk& d : disks) {
    double color[3];
    for (int c = 0; c < 3; ++c) color[c] = kUnripe[c] + d.y_true * (kRipe[c] - kUnripe[c]);
    const auto lo_x = static_cast<std::size_t>(std::max(0.0, std::floor(d.cx - d.r)));
    const auto hi_x = static_cast<std::size_t>(std::min(s, std::ceil(d.cx + d.r)));
    const auto lo_y = static_cast<std::size_t>(std::max(0.0, std::floor(d.cy - d.r)));
    const auto hi_y = static_cast<std::size_t>(std::min(s, std::ceil(d.cy + d.r)));
    for (std::size_t row = lo_y; row < hi_y; ++row) {
      for (std::size_t col = lo_x; col < hi_x; ++col) {
        const double dx = static_cast<double>(col) + 0.5 - d.cx;
        const double dy = static_cast<double>(row) + 0.5 - d.cy;
        if (dx * dx + dy * dy > d.r * d.r) continue;
        double* px = &img.pixels[(row * img.size + col) * 3];
        for (int c = 0; c < 3; ++c) px[c] = color[c] + rng.uniform(-kFruitNoise, kFruitNoise);
      }
    }
  }
  for (double& v : img.pixels) v = quantize(v);

  scene.objects.clear();
  for (const Disk& d : disks) {
    const BoxXYXY px{std::max(0.0, d.cx - d.r), std::max(0.0, d.cy - d.r), std::min(s, d.cx + d.r),
                     std::min(s, d.cy + d.r)};
    const BoxCXCYWH box = to_cxcywh({px.x0 / s, px.y0 / s, px.x1 / s, px.y1 / s});
    const int stage = stage_of(d.y_true);
    scene.objects.push_back({box, stage, stage_to_target(stage), d.y_true});
  }
  return true;
}

}  // namespace

Scene generate_scene(std::uint64_t seed, std::size_t index, const SceneConfig& config) {
  if (config.image_size == 0 || config.min_objects < 1 || config.max_objects < config.min_objects ||
      !(config.min_radius > 0.0) || config.max_radius < config.min_radius) {
    throw InputError("generate: invalid scene configuration");
  }
  Scene scene;
  for (std::uint64_t attempt = 0;; ++attempt) {
    Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(index) + (attempt << 32));
    if (try_scene(rng, config, scene)) return scene;
  }
}

std::vector<Scene> generate(std::uint64_t seed, std::size_t n_scenes, const SceneConfig& config) {
  if (n_scenes == 0) throw InputError("generate: n_scenes must be >= 1");
  std::vector<Scene> scenes;
  scenes.reserve(n_scenes);
  for (std::size_t i = 0; i < n_scenes; ++i) scenes.push_back(generate_scene(seed, i, config));
  return scenes;
}

void write_ppm(const Image& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open " + path.string() + " for writing");
  out << "P6\n" << image.size << ' ' << image.size << "\n255\n";
  std::string bytes(image.pixels.size(), '\0');
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    bytes[i] = static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * image.pixels[i])));
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("failed writing " + path.string());
}

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string ppm_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

}  // namespace

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  if (ppm_token(in) != "P6") throw ParseError(path.string(), 1, "not a binary PPM (P6)");
  std::size_t width = 0, height = 0, maxval = 0;
  try {
    width = std::stoul(ppm_token(in));
    height = std::stoul(ppm_token(in));
    maxval = std::stoul(ppm_token(in));
  } catch (const std::exception&) {
    throw ParseError(path.string(), 1, "malformed PPM header");
  }
  if (width != height || width == 0 || maxval != 255) {
    throw ParseError(path.string(), 1, "expected a square 8-bit PPM");
  }
  std::string bytes(width * height * 3, '\0');
  in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw ParseError(path.string(), 1, "truncated pixel data");
  }
  Image img;
  img.size = width;
  img.pixels.resize(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    img.pixels[i] = static_cast<double>(static_cast<unsigned char>(bytes[i])) / 255.0;
  }
  return img;
}

namespace {

std::string image_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu.ppm", index);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw InputError("failed writing " + path.string());
}

}  // namespace

void write_dataset(std::span<const Scene> scenes, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir / "images", ec);
  if (ec) throw InputError("cannot create " + (dir / "images").string() + ": " + ec.message());
  std::string annotations;
  std::string truths;
  char line[256];
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    write_ppm(scenes[i].image, dir / "images" / image_name(i));
    for (const GroundTruthObject& o : scenes[i].objects) {
      std::snprintf(line, sizeof line, "%zu %.9g %.9g %.9g %.9g %d\n", i, o.box.cx, o.box.cy, o.box.w,
                    o.box.h, o.stage);
      annotations += line;
      std::snprintf(line, sizeof line, "%zu %.9g\n", i, o.y_true);
      truths += line;
    }
  }
  write_text(dir / "annotations.txt", annotations);
  write_text(dir / "truths.txt", truths);
}

std::vector<Scene> read_dataset(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir / "images")) throw InputError("no images/ directory under " + dir.string());

  std::map<std::size_t, fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir / "images")) {
    const fs::path& p = entry.path();
    if (p.extension() != ".ppm") continue;
    const std::string stem = p.stem().string();
    if (stem.empty() || !std::all_of(stem.begin(), stem.end(), ::isdigit)) {
      throw InputError("unexpected image file name " + p.string());
    }
    files.emplace(std::stoul(stem), p);
  }
  if (files.empty()) throw InputError("no images found under " + (dir / "images").string());
  if (files.rbegin()->first != files.size() - 1) {
    throw InputError("image indices under " + (dir / "images").string() + " are not contiguous from 0");
  }
  std::vector<Scene> scenes(files.size());
  for (const auto& [index, path] : files) scenes[index].image = read_ppm(path);

  const fs::path ann_path = dir / "annotations.txt";
  std::ifstream ann(ann_path);
  if (!ann) throw InputError("missing " + ann_path.string());
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::size_t> order;  // image index of each annotation line
  while (std::getline(ann, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    long long index = -1;
    GroundTruthObject o;
    std::string extra;
    if (!(ls >> index >> o.box.cx >> o.box.cy >> o.box.w >> o.box.h >> o.stage) || (ls >> extra)) {
      throw ParseError(ann_path.string(), line_no, "expected 'image_index cx cy w h stage'");
    }
    if (index < 0 || static_cast<std::size_t>(index) >= scenes.size()) {
      throw ParseError(ann_path.string(), line_no, "image index out of range");
    }
    if (!(o.box.w > 0.0) || !(o.box.h > 0.0) || !std::isfinite(o.box.cx) || !std::isfinite(o.box.cy)) {
      throw ParseError(ann_path.string(), line_no, "box must be finite with positive extent");
    }
    if (o.stage < 0 || o.stage > 2) throw ParseError(ann_path.string(), line_no, "stage must be 0, 1 or 2");
    o.y_target = stage_to_target(o.stage);
    o.y_true = std::numeric_limits<double>::quiet_NaN();
    scenes[static_cast<std::size_t>(index)].objects.push_back(o);
    order.push_back(static_cast<std::size_t>(index));
  }
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    if (scenes[i].objects.empty()) {
      throw InputError(ann_path.string() + ": image " + std::to_string(i) + " has no objects");
    }
  }

  const fs::path truth_path = dir / "truths.txt";
  std::ifstream tr(truth_path);
  if (!tr) return scenes;
  std::vector<std::size_t> next(scenes.size(), 0);
  line_no = 0;
  std::size_t consumed = 0;
  while (std::getline(tr, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    long long index = -1;
    double y = 0.0;
    std::string extra;
    if (!(ls >> index >> y) || (ls >> extra)) {
      throw ParseError(truth_path.string(), line_no, "expected 'image_index y_true'");
    }
    if (consumed >= order.size() || index < 0 || static_cast<std::size_t>(index) != order[consumed]) {
      throw ParseError(truth_path.string(), line_no, "does not line up with annotations.txt");
    }
    if (!(y >= 0.0 && y <= 1.0)) throw ParseError(truth_path.string(), line_no, "y_true outside [0, 1]");
    const auto img = static_cast<std::size_t>(index);
    scenes[img].objects[next[img]++].y_true = y;
    ++consumed;
  }
  if (consumed != order.size()) {
    throw ParseError(truth_path.string(), line_no, "fewer truth lines than annotations");
  }
  return scenes;
}

}  // namespace betadet
