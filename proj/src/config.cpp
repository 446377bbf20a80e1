#include "mcbn/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mcbn {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "off" || v == "0" || v == "no") return false;
  throw std::invalid_argument("bad boolean value: " + v);
}

std::vector<int> parse_int_list(const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stoi(trim(tok)));
  return out;
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "seed") cfg.seed = std::stoull(value);
  else if (key == "network.depth") cfg.depth = std::stoi(value);
  else if (key == "network.channels") cfg.channels = std::stoi(value);
  else if (key == "network.kernel") cfg.kernel = std::stoi(value);
  else if (key == "training.patch_size") cfg.patch_size = std::stoi(value);
  else if (key == "training.batch_size") cfg.batch_size = std::stoi(value);
  else if (key == "training.total_updates") cfg.total_updates = std::stoi(value);
  else if (key == "training.lr") cfg.lr = std::stod(value);
  else if (key == "training.lr_halve_period") cfg.lr_halve_period = std::stoi(value);
  else if (key == "training.augment") cfg.augment = parse_bool(value);
  else if (key == "training.validate_every") cfg.validate_every = std::stoi(value);
  else if (key == "training.val_patches_per_image") cfg.val_patches_per_image = std::stoi(value);
  else if (key == "inference.scale") cfg.scale = std::stoi(value);
  else if (key == "inference.mc_samples") cfg.mc_samples = std::stoi(value);
  else if (key == "inference.var_floor") cfg.var_floor = std::stod(value);
  else if (key == "inference.clip_samples") cfg.clip_samples = parse_bool(value);
  else if (key == "benchmark.image_size") cfg.bench_image_size = std::stoi(value);
  else if (key == "benchmark.repeats") cfg.bench_repeats = std::stoi(value);
  else if (key == "benchmark.t_values") cfg.bench_t_values = parse_int_list(value);
  else if (key == "paths.train_dir") cfg.train_dir = value;
  else if (key == "paths.val_dir") cfg.val_dir = value;
  else if (key == "paths.test_dir") cfg.test_dir = value;
  else if (key == "paths.checkpoint") cfg.checkpoint = value;
  else if (key == "paths.stats_file") cfg.stats_file = value;
  else if (key == "paths.output_dir") cfg.output_dir = value;
  else throw std::invalid_argument("unknown config key: " + key);
}

RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config: " + path);
  RunConfig cfg;
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string dotted = section.empty() ? key : section + "." + key;
    try {
      apply_override(cfg, dotted, value);
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

std::map<std::string, std::string> config_to_map(const RunConfig& cfg) {
  std::map<std::string, std::string> m;
  auto put = [&m](const std::string& k, const auto& v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    m[k] = os.str();
  };
  put("seed", cfg.seed);
  put("network.depth", cfg.depth);
  put("network.channels", cfg.channels);
  put("network.kernel", cfg.kernel);
  put("training.patch_size", cfg.patch_size);
  put("training.batch_size", cfg.batch_size);
  put("training.total_updates", cfg.total_updates);
  put("training.lr", cfg.lr);
  put("training.lr_halve_period", cfg.lr_halve_period);
  m["training.augment"] = cfg.augment ? "true" : "false";
  put("training.validate_every", cfg.validate_every);
  put("training.val_patches_per_image", cfg.val_patches_per_image);
  put("inference.scale", cfg.scale);
  put("inference.mc_samples", cfg.mc_samples);
  put("inference.var_floor", cfg.var_floor);
  m["inference.clip_samples"] = cfg.clip_samples ? "true" : "false";
  put("benchmark.image_size", cfg.bench_image_size);
  put("benchmark.repeats", cfg.bench_repeats);
  m["benchmark.t_values"] = join_ints(cfg.bench_t_values);
  m["paths.train_dir"] = cfg.train_dir;
  m["paths.val_dir"] = cfg.val_dir;
  m["paths.test_dir"] = cfg.test_dir;
  m["paths.checkpoint"] = cfg.checkpoint;
  m["paths.stats_file"] = cfg.stats_file;
  m["paths.output_dir"] = cfg.output_dir;
  return m;
}

std::string config_to_text(const RunConfig& cfg) {
  const auto m = config_to_map(cfg);
  // Sectionless keys (seed) must precede the first section header.
  std::string out = "seed = " + m.at("seed") + "\n";
  std::string section;
  for (const auto& [k, v] : m) {
    const auto dot = k.find('.');
    if (dot == std::string::npos) continue;
    const std::string sec = k.substr(0, dot);
    if (sec != section) {
      section = sec;
      out += "\n[" + section + "]\n";
    }
    out += k.substr(dot + 1) + " = " + v + "\n";
  }
  return out;
}

void validate_config(const RunConfig& cfg) {
  if (cfg.scale < 2) throw std::invalid_argument("inference.scale must be >= 2");
  if (cfg.mc_samples < 1) throw std::invalid_argument("inference.mc_samples must be >= 1");
  if (cfg.depth < 3) throw std::invalid_argument("network.depth must be >= 3");
  if (cfg.kernel % 2 != 1) throw std::invalid_argument("network.kernel must be odd");
  if (cfg.var_floor <= 0.0) throw std::invalid_argument("inference.var_floor must be > 0");
  if (cfg.batch_size < 1 || cfg.patch_size < 1) {
    throw std::invalid_argument("training.batch_size and patch_size must be >= 1");
  }
}

}  // namespace mcbn
