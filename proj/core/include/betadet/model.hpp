#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "betadet/autograd.hpp"
#include "betadet/detection.hpp"
#include "betadet/losses.hpp"
#include "betadet/rng.hpp"
#include "betadet/synthdata.hpp"

namespace betadet {

struct ModelConfig {
  std::size_t image_size = 64;
  std::size_t patch = 8;
  std::size_t embed_dim = 64;
  std::size_t heads = 4;
  std::size_t num_queries = 12;
  std::size_t decoder_layers = 2;
  std::size_t mlp_ratio = 2;

  /// Throws DomainError on inconsistent sizes.
  void validate() const;

  std::size_t tokens() const { return (image_size / patch) * (image_size / patch); }
  std::size_t patch_dim() const { return patch * patch * 3; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Pre-activation maturity outputs of the head.
struct HeadRawOutput {
  double y_hat_alpha = 0.0;
  double y_hat_beta = 0.0;
};

/// α = softplus(ŷ_α) + 0.5, β = softplus(ŷ_β) + 0.5.
BetaParams head_transform(const HeadRawOutput& raw);

struct NamedParameter {
  std::string name;
  ag::Tensor tensor;
};

/// Closed-form parameter count for a configuration.
std::size_t expected_parameter_count(const ModelConfig& config);

/// Query-based toy detector: patch embedding with fixed 2-D sinusoidal
/// positions, one pre-norm encoder block, learnable queries, and decoder
/// blocks (self-attention, cross-attention, MLP) each followed by its own
/// objectness, box and maturity heads.
class Detector {
 public:
  /// init_params: linear weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)) drawn in
  /// declaration order from Rng(seed); biases zero except the objectness
  /// output bias (-2); layer-norm scale 1 and shift 0; queries U(-1, 1).
  Detector(const ModelConfig& config, std::uint64_t seed);

  // Parameters are shared handles; copies would alias them.
  Detector(const Detector&) = delete;
  Detector& operator=(const Detector&) = delete;
  Detector(Detector&&) = default;
  Detector& operator=(Detector&&) = default;

  const ModelConfig& config() const noexcept { return config_; }

  /// One LayerTensors per decoder layer; the last one is the final prediction.
  /// Throws InputError if an image does not match config().image_size.
  std::vector<LayerTensors> forward(std::span<const Image* const> batch) const;

  /// Final-layer detections for each image, without recording gradients.
  std::vector<std::vector<Detection>> predict(std::span<const Image* const> batch) const;

  std::vector<NamedParameter>& parameters() noexcept { return params_; }
  const std::vector<NamedParameter>& parameters() const noexcept { return params_; }
  std::vector<ag::Tensor> parameter_tensors() const;
  std::size_t parameter_count() const;
  void zero_grad();

 private:
  struct Linear {
    ag::Tensor weight;  // [in, out]
    ag::Tensor bias;    // [out]
  };
  struct Norm {
    ag::Tensor scale;
    ag::Tensor shift;
  };
  struct Attention {
    Linear q, k, v, out;
  };
  struct Mlp {
    Linear fc1, fc2;
  };
  struct DecoderLayer {
    Norm self_norm;
    Attention self_attn;
    Norm cross_norm;
    Attention cross_attn;
    Norm mlp_norm;
    Mlp mlp;
    Norm out_norm;
    Linear objectness;
    Mlp box;
    Mlp maturity;
  };

  ag::Tensor param(const std::string& name, ag::Shape shape, std::vector<double> value);
  Linear linear(const std::string& name, std::size_t in, std::size_t out, double bias = 0.0);
  Norm norm(const std::string& name, std::size_t dim);
  Attention attention(const std::string& name);
  Mlp mlp(const std::string& name, std::size_t in, std::size_t hidden, std::size_t out);

  ag::Tensor apply(const Linear& l, const ag::Tensor& x) const;
  ag::Tensor apply(const Norm& n, const ag::Tensor& x) const;
  ag::Tensor apply(const Mlp& m, const ag::Tensor& x) const;
  ag::Tensor apply(const Attention& a, const ag::Tensor& query, const ag::Tensor& key,
                   const ag::Tensor& value) const;

  ModelConfig config_;
  Rng init_rng_;
  std::vector<NamedParameter> params_;
  std::vector<double> positions_;  // [tokens, embed_dim]

  Linear embed_;
  Norm enc_attn_norm_;
  Attention enc_attn_;
  Norm enc_mlp_norm_;
  Mlp enc_mlp_;
  Norm enc_out_norm_;
  ag::Tensor queries_;
  std::vector<DecoderLayer> decoder_;
};

/// Patch matrix [tokens, patch * patch * 3]; each row is a patch in
/// row-major pixel order with interleaved channels.
std::vector<double> patchify(const Image& image, std::size_t patch);

/// Fixed 2-D sinusoidal table [tokens, dim]: the first half encodes the patch
/// row, the second half the patch column, as (sin, cos) pairs.
std::vector<double> sinusoidal_positions(std::size_t grid, std::size_t dim);

}  // namespace betadet
