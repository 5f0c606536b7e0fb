#include "sail_cli/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace sail::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_uint(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
  if (v == "off" || v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected on|off, got '" + v + "'");
}

// "2,4,8" or "1..32" or a mix: "1..4,8".
template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& v) {
  std::vector<T> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto dots = item.find("..");
    if (dots == std::string::npos) {
      out.push_back(parse_uint<T>(key, item));
    } else {
      const T lo = parse_uint<T>(key, trim(item.substr(0, dots)));
      const T hi = parse_uint<T>(key, trim(item.substr(dots + 2)));
      if (hi < lo) throw ConfigError(key + ": empty range '" + item + "'");
      for (T x = lo; x <= hi; ++x) out.push_back(x);
    }
  }
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"model", [](RunConfig& c, const std::string&, const std::string& v) { c.model = v; }},
      {"layers", [](RunConfig& c, const std::string& k, const std::string& v) { c.layers = parse_uint<std::size_t>(k, v); }},
      {"hidden", [](RunConfig& c, const std::string& k, const std::string& v) { c.hidden = parse_uint<std::size_t>(k, v); }},
      {"ffn", [](RunConfig& c, const std::string& k, const std::string& v) { c.ffn = parse_uint<std::size_t>(k, v); }},
      {"context", [](RunConfig& c, const std::string& k, const std::string& v) { c.context = parse_uint<std::size_t>(k, v); }},
      {"nbw", [](RunConfig& c, const std::string& k, const std::string& v) { c.nbw = parse_list<unsigned>(k, v); }},
      {"bits", [](RunConfig& c, const std::string& k, const std::string& v) { c.bits = parse_list<unsigned>(k, v); }},
      {"batch", [](RunConfig& c, const std::string& k, const std::string& v) { c.batch = parse_list<std::size_t>(k, v); }},
      {"act_bits", [](RunConfig& c, const std::string& k, const std::string& v) { c.act_bits = parse_uint<unsigned>(k, v); }},
      {"seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = parse_uint<std::uint64_t>(k, v); }},
      {"out", [](RunConfig& c, const std::string&, const std::string& v) { c.out = v; }},
      {"prt", [](RunConfig& c, const std::string& k, const std::string& v) { c.prt = parse_bool(k, v); }},
      {"trace", [](RunConfig& c, const std::string& k, const std::string& v) { c.trace = parse_bool(k, v); }},
      {"cases", [](RunConfig& c, const std::string& k, const std::string& v) { c.cases = parse_uint<std::size_t>(k, v); }},
      {"typeconv_samples",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.typeconv_samples = parse_uint<std::size_t>(k, v); }},
      {"inject_fault",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v != "none" && v != "gemv" && v != "typeconv")
           throw ConfigError(k + ": expected none|gemv|typeconv, got '" + v + "'");
         c.inject_fault = v;
       }},
      {"core_clock_hz", [](RunConfig& c, const std::string& k, const std::string& v) { c.pipeline.core_clock_hz = parse_double(k, v); }},
      {"noc_bytes_per_cycle",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.pipeline.noc_bytes_per_cycle = parse_double(k, v); }},
      {"noc_clock_hz", [](RunConfig& c, const std::string& k, const std::string& v) { c.pipeline.noc_clock_hz = parse_double(k, v); }},
      {"dram_bandwidth", [](RunConfig& c, const std::string& k, const std::string& v) { c.pipeline.dram_bandwidth = parse_double(k, v); }},
      {"llc_capacity",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.pipeline.llc_capacity = parse_uint<std::uint64_t>(k, v); }},
      {"llc_slices", [](RunConfig& c, const std::string& k, const std::string& v) { c.pipeline.llc_slices = parse_uint<std::size_t>(k, v); }},
      {"lookup_cycles",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.pipeline.cost.lookup_cycles = parse_uint<std::uint64_t>(k, v); }},
      {"slice_access_cycles",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.pipeline.cost.slice_access_cycles = parse_uint<std::uint64_t>(k, v); }},
      {"aggregation_cycles_per_level",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.pipeline.cost.aggregation_cycles_per_level = parse_uint<std::uint64_t>(k, v);
       }},
      {"prt_merge_cycles",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.pipeline.cost.prt_merge_cycles = parse_uint<std::uint64_t>(k, v); }},
      {"dequant_cycles_per_element",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.pipeline.dequant_cycles_per_element = parse_double(k, v); }},
      {"monthly_price", [](RunConfig& c, const std::string& k, const std::string& v) { c.pipeline.monthly_price = parse_double(k, v); }},
      {"kv_bits", [](RunConfig& c, const std::string& k, const std::string& v) { c.pipeline.kv_bits = parse_uint<unsigned>(k, v); }},
      {"kv_lanes", [](RunConfig& c, const std::string& k, const std::string& v) { c.pipeline.kv_lanes = parse_uint<std::size_t>(k, v); }},
      {"kv_block_len",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.pipeline.kv_block_len = parse_uint<std::size_t>(k, v); }},
  };
  return table;
}

}  // namespace

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> out;
  std::stringstream ss(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown setting '" + key + "'");
  it->second(cfg, key, value);
  cfg.explicit_keys.insert(key);
}

std::vector<std::string> known_keys() {
  std::vector<std::string> out;
  for (const auto& [k, _] : setters()) out.push_back(k);
  return out;
}

ModelSpec resolve_model(const RunConfig& cfg) {
  auto m = model_preset(cfg.model);
  if (!m) throw ConfigError("unknown model '" + cfg.model + "'");
  if (cfg.layers) m->layers = cfg.layers;
  if (cfg.hidden) m->hidden_size = cfg.hidden;
  if (cfg.ffn) m->ffn_dim = cfg.ffn;
  if (cfg.is_set("context")) m->context_length = cfg.context;
  m->weight_bits = cfg.bits.front();
  return *m;
}

PipelineConfig resolve_pipeline(const RunConfig& cfg) {
  PipelineConfig p = cfg.pipeline;
  p.nbw = cfg.nbw.front();
  p.weight_bits = cfg.bits.front();
  p.batch = cfg.batch.front();
  p.act_bits = cfg.act_bits;
  try {
    validate(p);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return p;
}

nlohmann::json to_json(const ModelSpec& m) {
  return {{"name", m.name},
          {"layers", m.layers},
          {"hidden_size", m.hidden_size},
          {"ffn_dim", m.ffn_dim},
          {"context_length", m.context_length},
          {"weight_bits", m.weight_bits}};
}

nlohmann::json to_json(const CycleLedger& ledger) {
  nlohmann::json j = nlohmann::json::object();
  for (auto c : kAllCycleCategories) j[std::string(category_name(c))] = ledger[c];
  j["total"] = ledger.total();
  return j;
}

nlohmann::json to_json(const RunConfig& c) {
  const PipelineConfig& p = c.pipeline;
  return {{"model", c.model},
          {"layers", c.layers},
          {"hidden", c.hidden},
          {"ffn", c.ffn},
          {"context", c.context},
          {"nbw", c.nbw},
          {"bits", c.bits},
          {"batch", c.batch},
          {"act_bits", c.act_bits},
          {"seed", c.seed},
          {"out", c.out},
          {"prt", c.prt},
          {"trace", c.trace},
          {"cases", c.cases},
          {"typeconv_samples", c.typeconv_samples},
          {"inject_fault", c.inject_fault},
          {"core_clock_hz", p.core_clock_hz},
          {"noc_bytes_per_cycle", p.noc_bytes_per_cycle},
          {"noc_clock_hz", p.noc_clock_hz},
          {"dram_bandwidth", p.dram_bandwidth},
          {"llc_capacity", p.llc_capacity},
          {"llc_slices", p.llc_slices},
          {"lookup_cycles", p.cost.lookup_cycles},
          {"slice_access_cycles", p.cost.slice_access_cycles},
          {"aggregation_cycles_per_level", p.cost.aggregation_cycles_per_level},
          {"prt_merge_cycles", p.cost.prt_merge_cycles},
          {"dequant_cycles_per_element", p.dequant_cycles_per_element},
          {"monthly_price", p.monthly_price},
          {"kv_bits", p.kv_bits},
          {"kv_lanes", p.kv_lanes},
          {"kv_block_len", p.kv_block_len}};
}

}  // namespace sail::cli
