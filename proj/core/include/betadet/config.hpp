#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "betadet/assignment.hpp"
#include "betadet/losses.hpp"
#include "betadet/model.hpp"

namespace betadet {

/// Everything a training or evaluation run needs. Serialized as plain
/// `key = value` lines; see docs/formats.md for the key list.
struct RunConfig {
  std::uint64_t seed = 1;
  std::string train_data;
  std::string eval_data;
  ModelConfig model;
  CostWeights cost;
  LossWeights loss;
  double lr = 1e-3;
  std::size_t batch_size = 8;
  std::size_t steps = 3000;
  double score_threshold = 0.30;

  /// Throws DomainError if a field is out of range.
  void validate() const;
};

/// Parses config text. Blank lines and lines starting with '#' are ignored;
/// unknown keys, duplicate keys and malformed values raise ParseError.
/// Keys not present keep their defaults.
RunConfig parse_config(std::string_view text, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& path);

/// Canonical text form: every key in fixed order, doubles with 17 digits.
std::string format_config(const RunConfig& config);

}  // namespace betadet
