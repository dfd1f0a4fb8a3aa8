#include "betadet/model.hpp"

#include <cmath>

#include "betadet/errors.hpp"

namespace betadet {

using ag::Shape;
using ag::Tensor;

namespace {

// Pixels are standardized before the patch embedding.
constexpr double kPixelCenter = 0.5;
constexpr double kPixelScale = 0.25;
// An 8x8 token grid needs far lower wavelengths than text-length sequences,
// and the positional signal must not drown under the patch embedding.
constexpr double kPositionTemperature = 100.0;
constexpr double kPositionGain = 4.0;

}  // namespace

void ModelConfig::validate() const {
  if (image_size == 0 || patch == 0 || image_size % patch != 0) {
    throw DomainError("ModelConfig: image_size must be a positive multiple of patch");
  }
  if (embed_dim == 0 || heads == 0 || embed_dim % heads != 0) {
    throw DomainError("ModelConfig: embed_dim must be a positive multiple of heads");
  }
  if (embed_dim % 4 != 0) throw DomainError("ModelConfig: embed_dim must be a multiple of 4");
  if (num_queries == 0 || decoder_layers == 0 || mlp_ratio == 0) {
    throw DomainError("ModelConfig: num_queries, decoder_layers and mlp_ratio must be positive");
  }
}

BetaParams head_transform(const HeadRawOutput& raw) {
  const auto softplus = [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x))); };
  return BetaParams(softplus(raw.y_hat_alpha) + 0.5, softplus(raw.y_hat_beta) + 0.5);
}

std::size_t expected_parameter_count(const ModelConfig& c) {
  const std::size_t d = c.embed_dim;
  const std::size_t hidden = c.mlp_ratio * d;
  const auto lin = [](std::size_t in, std::size_t out) { return in * out + out; };
  const auto mlp = [&](std::size_t in, std::size_t h, std::size_t out) { return lin(in, h) + lin(h, out); };
  const std::size_t norm = 2 * d;
  const std::size_t attn = 4 * lin(d, d);
  const std::size_t encoder = lin(c.patch_dim(), d) + norm + attn + norm + mlp(d, hidden, d) + norm;
  const std::size_t decoder_layer =
      3 * norm + 2 * attn + mlp(d, hidden, d) + norm + lin(d, 1) + mlp(d, d, 4) + mlp(d, d, 2);
  return encoder + c.num_queries * d + c.decoder_layers * decoder_layer;
}

std::vector<double> patchify(const Image& image, std::size_t patch) {
  const std::size_t grid = image.size / patch;
  const std::size_t pdim = patch * patch * 3;
  std::vector<double> out(grid * grid * pdim);
  for (std::size_t gr = 0; gr < grid; ++gr) {
    for (std::size_t gc = 0; gc < grid; ++gc) {
      double* dst = out.data() + (gr * grid + gc) * pdim;
      for (std::size_t r = 0; r < patch; ++r) {
        const double* src = image.pixels.data() + ((gr * patch + r) * image.size + gc * patch) * 3;
        std::copy_n(src, patch * 3, dst + r * patch * 3);
      }
    }
  }
  return out;
}

std::vector<double> sinusoidal_positions(std::size_t grid, std::size_t dim) {
  const std::size_t half = dim / 2;
  const std::size_t pairs = half / 2;
  std::vector<double> table(grid * grid * dim);
  for (std::size_t r = 0; r < grid; ++r) {
    for (std::size_t c = 0; c < grid; ++c) {
      double* row = table.data() + (r * grid + c) * dim;
      for (std::size_t k = 0; k < pairs; ++k) {
        const double freq = std::pow(kPositionTemperature, -2.0 * static_cast<double>(k) / static_cast<double>(half));
        row[2 * k] = std::sin(static_cast<double>(r) * freq);
        row[2 * k + 1] = std::cos(static_cast<double>(r) * freq);
        row[half + 2 * k] = std::sin(static_cast<double>(c) * freq);
        row[half + 2 * k + 1] = std::cos(static_cast<double>(c) * freq);
      }
    }
  }
  return table;
}

Tensor Detector::param(const std::string& name, Shape shape, std::vector<double> value) {
  Tensor t = Tensor::parameter(std::move(shape), std::move(value));
  params_.push_back({name, t});
  return t;
}

Detector::Linear Detector::linear(const std::string& name, std::size_t in, std::size_t out, double bias) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::vector<double> w(in * out);
  for (double& v : w) v = init_rng_.uniform(-bound, bound);
  Linear l;
  l.weight = param(name + ".weight", {in, out}, std::move(w));
  l.bias = param(name + ".bias", {out}, std::vector<double>(out, bias));
  return l;
}

Detector::Norm Detector::norm(const std::string& name, std::size_t dim) {
  Norm n;
  n.scale = param(name + ".scale", {dim}, std::vector<double>(dim, 1.0));
  n.shift = param(name + ".shift", {dim}, std::vector<double>(dim, 0.0));
  return n;
}

Detector::Attention Detector::attention(const std::string& name) {
  const std::size_t d = config_.embed_dim;
  Attention a;
  a.q = linear(name + ".q", d, d);
  a.k = linear(name + ".k", d, d);
  a.v = linear(name + ".v", d, d);
  a.out = linear(name + ".out", d, d);
  return a;
}

Detector::Mlp Detector::mlp(const std::string& name, std::size_t in, std::size_t hidden, std::size_t out) {
  Mlp m;
  m.fc1 = linear(name + ".fc1", in, hidden);
  m.fc2 = linear(name + ".fc2", hidden, out);
  return m;
}

Detector::Detector(const ModelConfig& config, std::uint64_t seed) : config_(config), init_rng_(seed) {
  config_.validate();
  const std::size_t d = config_.embed_dim;
  const std::size_t hidden = config_.mlp_ratio * d;
  positions_ = sinusoidal_positions(config_.image_size / config_.patch, d);
  for (double& v : positions_) v *= kPositionGain;

  embed_ = linear("embed", config_.patch_dim(), d);
  enc_attn_norm_ = norm("encoder.attn_norm", d);
  enc_attn_ = attention("encoder.attn");
  enc_mlp_norm_ = norm("encoder.mlp_norm", d);
  enc_mlp_ = mlp("encoder.mlp", d, hidden, d);
  enc_out_norm_ = norm("encoder.out_norm", d);

  std::vector<double> q(config_.num_queries * d);
  for (double& v : q) v = init_rng_.uniform(-1.0, 1.0);
  queries_ = param("queries", {config_.num_queries, d}, std::move(q));

  for (std::size_t l = 0; l < config_.decoder_layers; ++l) {
    const std::string p = "decoder." + std::to_string(l) + ".";
    DecoderLayer layer;
    layer.self_norm = norm(p + "self_norm", d);
    layer.self_attn = attention(p + "self_attn");
    layer.cross_norm = norm(p + "cross_norm", d);
    layer.cross_attn = attention(p + "cross_attn");
    layer.mlp_norm = norm(p + "mlp_norm", d);
    layer.mlp = mlp(p + "mlp", d, hidden, d);
    layer.out_norm = norm(p + "out_norm", d);
    layer.objectness = linear(p + "objectness", d, 1, -2.0);
    layer.box = mlp(p + "box", d, d, 4);
    layer.maturity = mlp(p + "maturity", d, d, 2);
    decoder_.push_back(std::move(layer));
  }
}

Tensor Detector::apply(const Linear& l, const Tensor& x) const { return ag::matmul(x, l.weight) + l.bias; }

Tensor Detector::apply(const Norm& n, const Tensor& x) const { return ag::layernorm(x, n.scale, n.shift); }

Tensor Detector::apply(const Mlp& m, const Tensor& x) const {
  const Tensor h = apply(m.fc1, x);
  return apply(m.fc2, h * ag::sigmoid(h));
}

Tensor Detector::apply(const Attention& a, const Tensor& query, const Tensor& key, const Tensor& value) const {
  const Tensor q = apply(a.q, query);
  const Tensor k = apply(a.k, key);
  const Tensor v = apply(a.v, value);
  const std::size_t heads = config_.heads;
  const std::size_t dh = config_.embed_dim / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> outputs;
  outputs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor qh = ag::slice(q, -1, h * dh, (h + 1) * dh);
    const Tensor kh = ag::slice(k, -1, h * dh, (h + 1) * dh);
    const Tensor vh = ag::slice(v, -1, h * dh, (h + 1) * dh);
    const Tensor weights = ag::softmax(ag::matmul(qh, ag::transpose(kh)) * scale);
    outputs.push_back(ag::matmul(weights, vh));
  }
  return apply(a.out, ag::concat(outputs, -1));
}

std::vector<LayerTensors> Detector::forward(std::span<const Image* const> batch) const {
  if (batch.empty()) throw InputError("forward: empty batch");
  const std::size_t b = batch.size();
  const std::size_t tokens = config_.tokens();
  const std::size_t pdim = config_.patch_dim();
  const std::size_t d = config_.embed_dim;
  const std::size_t nq = config_.num_queries;

  std::vector<double> patches;
  patches.reserve(b * tokens * pdim);
  for (const Image* img : batch) {
    if (img == nullptr || img->size != config_.image_size ||
        img->pixels.size() != config_.image_size * config_.image_size * 3) {
      throw InputError("forward: expected a " + std::to_string(config_.image_size) + "x" +
                       std::to_string(config_.image_size) + "x3 image");
    }
    std::vector<double> p = patchify(*img, config_.patch);
    for (double& v : p) v = (v - kPixelCenter) / kPixelScale;
    patches.insert(patches.end(), p.begin(), p.end());
  }
  const Tensor pos({tokens, d}, positions_);
  Tensor x = apply(embed_, Tensor({b, tokens, pdim}, std::move(patches))) + pos;
  {
    const Tensor h = apply(enc_attn_norm_, x);
    x = x + apply(enc_attn_, h, h, h);
  }
  x = x + apply(enc_mlp_, apply(enc_mlp_norm_, x));
  const Tensor memory = apply(enc_out_norm_, x);
  const Tensor memory_keys = memory + pos;

  Tensor q = Tensor::zeros({b, nq, d}) + queries_;
  std::vector<LayerTensors> out;
  out.reserve(decoder_.size());
  for (const DecoderLayer& layer : decoder_) {
    Tensor h = apply(layer.self_norm, q);
    q = q + apply(layer.self_attn, h, h, h);
    h = apply(layer.cross_norm, q);
    q = q + apply(layer.cross_attn, h, memory_keys, memory);
    q = q + apply(layer.mlp, apply(layer.mlp_norm, q));
    const Tensor o = apply(layer.out_norm, q);
    LayerTensors heads;
    heads.logits = ag::reshape(apply(layer.objectness, o), {b, nq});
    heads.boxes = ag::sigmoid(apply(layer.box, o));
    heads.shapes = ag::softplus(apply(layer.maturity, o)) + 0.5;
    out.push_back(std::move(heads));
  }
  return out;
}

std::vector<std::vector<Detection>> Detector::predict(std::span<const Image* const> batch) const {
  const ag::NoGradGuard no_grad;
  const std::vector<LayerTensors> layers = forward(batch);
  std::vector<std::vector<Detection>> out;
  out.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) out.push_back(to_detections(layers.back(), i));
  return out;
}

std::vector<Tensor> Detector::parameter_tensors() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.tensor);
  return out;
}

std::size_t Detector::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.size();
  return n;
}

void Detector::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

}  // namespace betadet
