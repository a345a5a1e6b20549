#include "kra/config.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>

#include "kra/bench.hpp"
#include "kra/error.hpp"

namespace kra {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::uint64_t parse_u64(const std::string& text, const std::string& what) {
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    fail(ErrorCode::kInvalidConfig, what + ": expected a nonnegative integer, got '" + text + "'");
  }
  return value;
}

}  // namespace

KeyValues parse_key_values(std::istream& in) {
  KeyValues out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::kFormatError, "config line " + std::to_string(number) + ": expected key = value");
    }
    std::string key = trim(body.substr(0, eq));
    if (key.empty()) fail(ErrorCode::kFormatError, "config line " + std::to_string(number) + ": empty key");
    out.emplace_back(std::move(key), trim(body.substr(eq + 1)));
  }
  return out;
}

KeyValues read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIoError, "cannot open config file " + path);
  return parse_key_values(in);
}

std::string format_key_values(const KeyValues& entries) {
  std::string out;
  for (const auto& [key, value] : entries) out += key + " = " + value + "\n";
  return out;
}

std::string join(const std::vector<std::string>& items, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::pair<std::size_t, std::size_t> parse_size(const std::string& text, const std::string& what) {
  const auto x = text.find('x');
  if (x == std::string::npos) {
    fail(ErrorCode::kInvalidConfig, what + ": expected ROWSxCOLS, got '" + text + "'");
  }
  const auto rows = parse_u64(text.substr(0, x), what);
  const auto cols = parse_u64(text.substr(x + 1), what);
  if (rows == 0 || cols == 0) fail(ErrorCode::kInvalidConfig, what + ": dimensions must be positive");
  return {rows, cols};
}

std::vector<std::uint64_t> parse_seeds(const std::string& text, const std::string& what) {
  std::vector<std::uint64_t> out;
  for (const std::string& item : split_list(text)) {
    const auto dots = item.find("..");
    if (dots == std::string::npos) {
      out.push_back(parse_u64(item, what));
      continue;
    }
    const auto lo = parse_u64(item.substr(0, dots), what);
    const auto hi = parse_u64(item.substr(dots + 2), what);
    if (hi < lo) fail(ErrorCode::kInvalidConfig, what + ": empty range '" + item + "'");
    if (hi - lo > 100000) fail(ErrorCode::kInvalidConfig, what + ": range too large");
    for (auto s = lo; s <= hi; ++s) out.push_back(s);
  }
  if (out.empty()) fail(ErrorCode::kInvalidConfig, what + ": no seeds given");
  return out;
}

std::vector<AdapterKind> parse_adapter_list(const std::string& text, const std::string& what) {
  std::vector<AdapterKind> out;
  for (const std::string& item : split_list(text)) {
    try {
      out.push_back(parse_adapter_kind(item));
    } catch (const Error& e) {
      fail(ErrorCode::kInvalidConfig, what + ": " + e.what());
    }
  }
  if (out.empty()) fail(ErrorCode::kInvalidConfig, what + ": no adapters given");
  return out;
}

Crop parse_crop(const std::string& text, const std::string& what) {
  const auto parts = split_list(text);
  if (parts.size() != 4) {
    fail(ErrorCode::kInvalidConfig, what + ": expected ROW0,COL0,ROWS,COLS, got '" + text + "'");
  }
  return Crop{parse_u64(parts[0], what), parse_u64(parts[1], what), parse_u64(parts[2], what),
              parse_u64(parts[3], what)};
}

KeyValues bench_config_entries(const BenchConfig& c) {
  std::vector<std::string> adapters;
  for (AdapterKind k : c.adapters) adapters.emplace_back(to_string(k));
  std::vector<std::string> targets;
  for (const TargetSpec& t : c.targets) targets.push_back(t.name);
  std::vector<std::string> seeds;
  for (auto s : c.seeds) seeds.push_back(std::to_string(s));
  KeyValues kv;
  kv.emplace_back("size", std::to_string(c.rows) + "x" + std::to_string(c.cols));
  kv.emplace_back("adapters", join(adapters));
  kv.emplace_back("targets", join(targets));
  kv.emplace_back("seeds", join(seeds));
  kv.emplace_back("hyper.lr", format_double(c.hyper.lr));
  kv.emplace_back("hyper.beta1", format_double(c.hyper.beta1));
  kv.emplace_back("hyper.beta2", format_double(c.hyper.beta2));
  kv.emplace_back("hyper.weight_decay", format_double(c.hyper.weight_decay));
  kv.emplace_back("hyper.epsilon", format_double(c.hyper.epsilon));
  kv.emplace_back("hyper.iterations", std::to_string(c.hyper.iterations));
  kv.emplace_back("budget_reference", std::string(to_string(c.budget_reference)));
  kv.emplace_back("out", c.output_dir);
  kv.emplace_back("parallelism", std::to_string(c.parallelism));
  kv.emplace_back("relative", c.relative ? "true" : "false");
  kv.emplace_back("timing", c.timing ? "true" : "false");
  kv.emplace_back("sinlora.omega", format_double(c.sin_omega));
  kv.emplace_back("randlora.rank", std::to_string(c.rand_rank));
  if (!c.targets.empty()) {
    const TargetSpec& t = c.targets.front();
    kv.emplace_back("target.zero_fraction", format_double(t.zero_fraction));
    kv.emplace_back("target.keep_fraction", format_double(t.keep_fraction));
    kv.emplace_back("target.superpose", std::to_string(t.superpose));
    if (t.crop) {
      kv.emplace_back("target.crop", std::to_string(t.crop->row0) + "," + std::to_string(t.crop->col0) +
                                         "," + std::to_string(t.crop->rows) + "," +
                                         std::to_string(t.crop->cols));
    }
  }
  return kv;
}

}  // namespace kra
