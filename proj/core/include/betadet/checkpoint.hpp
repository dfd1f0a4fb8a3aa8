#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "betadet/autograd.hpp"
#include "betadet/config.hpp"
#include "betadet/model.hpp"

namespace betadet {

struct StoredParameter {
  std::string name;
  ag::Shape shape;
  std::vector<double> values;
};

/// Text manifest followed by a raw little-endian float64 payload:
///
///     betadet-checkpoint 1
///     step <n>
///     config <key> = <value>        (one line per config key)
///     param <name> <d0>x<d1>... <byte offset>
///     payload <bytes>
///     end
///     <payload bytes>
struct Checkpoint {
  RunConfig config;
  std::size_t step = 0;
  std::vector<StoredParameter> parameters;

  static Checkpoint capture(const RunConfig& config, std::size_t step, const Detector& model);

  /// Copies stored values into the model. Throws InputError listing every
  /// name/shape difference when the manifests disagree.
  void apply_to(Detector& model) const;
};

std::string serialize(const Checkpoint& ckpt);
Checkpoint deserialize(const std::string& bytes, const std::string& source = "<checkpoint>");

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Lines describing how the checkpoint manifest differs from the model's;
/// empty when compatible.
std::vector<std::string> manifest_diff(const Checkpoint& ckpt, const Detector& model);

}  // namespace betadet
