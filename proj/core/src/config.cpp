#include "betadet/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "betadet/errors.hpp"

namespace betadet {

void RunConfig::validate() const {
  model.validate();
  cost.validate();
  loss.validate();
  if (!(lr > 0.0) || !std::isfinite(lr)) throw DomainError("config: lr must be positive");
  if (batch_size == 0) throw DomainError("config: batch_size must be >= 1");
  if (steps == 0) throw DomainError("config: steps must be >= 1");
  if (!(score_threshold >= 0.0 && score_threshold <= 1.0)) {
    throw DomainError("config: score_threshold must lie in [0, 1]");
  }
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Field {
  std::function<void(RunConfig&, const std::string&)> parse;
  std::function<std::string(const RunConfig&)> format;
};

double to_double(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("trailing characters");
  return v;
}

std::uint64_t to_uint(const std::string& s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw std::invalid_argument("not an unsigned integer");
  return v;
}

Field double_field(double RunConfig::*member) {
  return {[member](RunConfig& c, const std::string& v) { c.*member = to_double(v); },
          [member](const RunConfig& c) { return fmt_double(c.*member); }};
}

template <class Sub>
Field nested_double(Sub RunConfig::*outer, double Sub::*inner) {
  return {[outer, inner](RunConfig& c, const std::string& v) { (c.*outer).*inner = to_double(v); },
          [outer, inner](const RunConfig& c) { return fmt_double((c.*outer).*inner); }};
}

Field model_size(std::size_t ModelConfig::*inner) {
  return {[inner](RunConfig& c, const std::string& v) { c.model.*inner = static_cast<std::size_t>(to_uint(v)); },
          [inner](const RunConfig& c) { return std::to_string(c.model.*inner); }};
}

Field size_field(std::size_t RunConfig::*member) {
  return {[member](RunConfig& c, const std::string& v) { c.*member = static_cast<std::size_t>(to_uint(v)); },
          [member](const RunConfig& c) { return std::to_string(c.*member); }};
}

Field string_field(std::string RunConfig::*member) {
  return {[member](RunConfig& c, const std::string& v) { c.*member = v; },
          [member](const RunConfig& c) { return c.*member; }};
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"seed",
       {[](RunConfig& c, const std::string& v) { c.seed = to_uint(v); },
        [](const RunConfig& c) { return std::to_string(c.seed); }}},
      {"train_data", string_field(&RunConfig::train_data)},
      {"eval_data", string_field(&RunConfig::eval_data)},
      {"image_size", model_size(&ModelConfig::image_size)},
      {"patch", model_size(&ModelConfig::patch)},
      {"embed_dim", model_size(&ModelConfig::embed_dim)},
      {"heads", model_size(&ModelConfig::heads)},
      {"num_queries", model_size(&ModelConfig::num_queries)},
      {"decoder_layers", model_size(&ModelConfig::decoder_layers)},
      {"mlp_ratio", model_size(&ModelConfig::mlp_ratio)},
      {"cost_cls", nested_double(&RunConfig::cost, &CostWeights::lambda_cls)},
      {"cost_l1", nested_double(&RunConfig::cost, &CostWeights::lambda_l1)},
      {"cost_giou", nested_double(&RunConfig::cost, &CostWeights::lambda_giou)},
      {"cost_mat", nested_double(&RunConfig::cost, &CostWeights::lambda_mat)},
      {"loss_vfl", nested_double(&RunConfig::loss, &LossWeights::lambda_vfl)},
      {"loss_bbox", nested_double(&RunConfig::loss, &LossWeights::lambda_bbox)},
      {"loss_giou", nested_double(&RunConfig::loss, &LossWeights::lambda_giou)},
      {"loss_maturity", nested_double(&RunConfig::loss, &LossWeights::lambda_maturity)},
      {"loss_reg", nested_double(&RunConfig::loss, &LossWeights::lambda_reg)},
      {"lr", double_field(&RunConfig::lr)},
      {"batch_size", size_field(&RunConfig::batch_size)},
      {"steps", size_field(&RunConfig::steps)},
      {"score_threshold", double_field(&RunConfig::score_threshold)},
  };
  return table;
}

}  // namespace

RunConfig parse_config(std::string_view text, const std::string& source) {
  RunConfig config;
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(source, line_no, "expected 'key = value'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const auto& table = fields();
    const auto it = std::find_if(table.begin(), table.end(), [&](const auto& f) { return f.first == key; });
    if (it == table.end()) throw ParseError(source, line_no, "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ParseError(source, line_no, "duplicate key '" + key + "'");
    try {
      it->second.parse(config, value);
    } catch (const std::exception&) {
      throw ParseError(source, line_no, "invalid value '" + value + "' for key '" + key + "'");
    }
  }
  try {
    config.validate();
  } catch (const DomainError& e) {
    throw ParseError(source, line_no, e.what());
  }
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string format_config(const RunConfig& config) {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.format(config) + "\n";
  return out;
}

}  // namespace betadet
