#include "betadet/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "betadet/errors.hpp"

namespace betadet {
namespace {

constexpr const char* kMagic = "betadet-checkpoint 1";

std::string shape_token(const ag::Shape& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "x" : "") + std::to_string(shape[i]);
  return s.empty() ? "scalar" : s;
}

ag::Shape parse_shape(const std::string& token) {
  ag::Shape shape;
  if (token == "scalar") return shape;
  std::istringstream in(token);
  std::string part;
  while (std::getline(in, part, 'x')) shape.push_back(std::stoul(part));
  return shape;
}

void put_le(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>(bits & 0xFF));
    bits >>= 8;
  }
}

double get_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | p[i];
  return std::bit_cast<double>(bits);
}

}  // namespace

Checkpoint Checkpoint::capture(const RunConfig& config, std::size_t step, const Detector& model) {
  Checkpoint c;
  c.config = config;
  c.step = step;
  for (const auto& p : model.parameters()) {
    c.parameters.push_back({p.name, p.tensor.shape(), {p.tensor.values().begin(), p.tensor.values().end()}});
  }
  return c;
}

std::vector<std::string> manifest_diff(const Checkpoint& ckpt, const Detector& model) {
  std::vector<std::string> diff;
  const auto& params = model.parameters();
  const std::size_t n = std::max(params.size(), ckpt.parameters.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (i >= ckpt.parameters.size()) {
      diff.push_back("- missing in checkpoint: " + params[i].name + " " + shape_token(params[i].tensor.shape()));
      continue;
    }
    const StoredParameter& s = ckpt.parameters[i];
    if (i >= params.size()) {
      diff.push_back("+ extra in checkpoint: " + s.name + " " + shape_token(s.shape));
      continue;
    }
    if (s.name != params[i].name || s.shape != params[i].tensor.shape()) {
      diff.push_back("~ checkpoint " + s.name + " " + shape_token(s.shape) + " vs model " + params[i].name +
                     " " + shape_token(params[i].tensor.shape()));
    }
  }
  return diff;
}

void Checkpoint::apply_to(Detector& model) const {
  const auto diff = manifest_diff(*this, model);
  if (!diff.empty()) {
    std::string msg = "checkpoint does not match the model:";
    for (const auto& d : diff) msg += "\n  " + d;
    throw InputError(msg);
  }
  auto& params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = params[i].tensor.mutable_values();
    std::copy(parameters[i].values.begin(), parameters[i].values.end(), dst.begin());
  }
}

std::string serialize(const Checkpoint& ckpt) {
  std::string manifest = std::string(kMagic) + "\nstep " + std::to_string(ckpt.step) + "\n";
  std::istringstream cfg(format_config(ckpt.config));
  std::string line;
  while (std::getline(cfg, line)) manifest += "config " + line + "\n";
  std::size_t offset = 0;
  for (const auto& p : ckpt.parameters) {
    manifest += "param " + p.name + " " + shape_token(p.shape) + " " + std::to_string(offset) + "\n";
    offset += 8 * p.values.size();
  }
  manifest += "payload " + std::to_string(offset) + "\nend\n";
  std::string out = manifest;
  out.reserve(manifest.size() + offset);
  for (const auto& p : ckpt.parameters) {
    for (double v : p.values) put_le(out, v);
  }
  return out;
}

Checkpoint deserialize(const std::string& bytes, const std::string& source) {
  Checkpoint ckpt;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  const auto next_line = [&]() -> std::string {
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string::npos) throw ParseError(source, line_no + 1, "truncated manifest");
    std::string line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    return line;
  };
  if (next_line() != kMagic) throw ParseError(source, 1, "not a betadet checkpoint");
  std::string config_text;
  std::vector<std::size_t> offsets;
  std::size_t payload = 0;
  bool have_payload = false;
  for (;;) {
    const std::string line = next_line();
    if (line == "end") break;
    std::istringstream in(line);
    std::string tag;
    in >> tag;
    try {
      if (tag == "step") {
        in >> ckpt.step;
      } else if (tag == "config") {
        config_text += line.substr(7) + "\n";
      } else if (tag == "param") {
        std::string name, shape;
        std::size_t offset = 0;
        if (!(in >> name >> shape >> offset)) throw std::invalid_argument("param line");
        StoredParameter p;
        p.name = name;
        p.shape = parse_shape(shape);
        ckpt.parameters.push_back(std::move(p));
        offsets.push_back(offset);
      } else if (tag == "payload") {
        if (!(in >> payload)) throw std::invalid_argument("payload line");
        have_payload = true;
      } else {
        throw ParseError(source, line_no, "unknown manifest entry '" + tag + "'");
      }
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception&) {
      throw ParseError(source, line_no, "malformed manifest line");
    }
  }
  if (!have_payload) throw ParseError(source, line_no, "manifest lacks a payload line");
  ckpt.config = parse_config(config_text, source + " (config)");
  if (bytes.size() - pos != payload) {
    throw ParseError(source, line_no,
                     "payload is " + std::to_string(bytes.size() - pos) + " bytes, manifest says " +
                         std::to_string(payload));
  }
  std::size_t expected = 0;
  const auto* base = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  for (std::size_t i = 0; i < ckpt.parameters.size(); ++i) {
    auto& p = ckpt.parameters[i];
    if (offsets[i] != expected) throw ParseError(source, line_no, "non-contiguous offset for " + p.name);
    const std::size_t count = ag::numel(p.shape);
    if (expected + 8 * count > payload) throw ParseError(source, line_no, "payload too short for " + p.name);
    p.values.resize(count);
    for (std::size_t j = 0; j < count; ++j) p.values[j] = get_le(base + expected + 8 * j);
    expected += 8 * count;
  }
  if (expected != payload) throw ParseError(source, line_no, "payload length does not match parameter shapes");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open " + path.string() + " for writing");
  const std::string bytes = serialize(ckpt);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str(), path.string());
}

}  // namespace betadet
