#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "kra/adapters.hpp"
#include "kra/matx_io.hpp"

namespace kra {

struct BenchConfig;

// Ordered `key = value` entries. Lines starting with '#' and blank lines are
// skipped; keys may carry dotted section prefixes (`hyper.lr`).
using KeyValues = std::vector<std::pair<std::string, std::string>>;

// Throws FormatError with the offending line number.
KeyValues parse_key_values(std::istream& in);
KeyValues read_config_file(const std::string& path);
std::string format_key_values(const KeyValues& entries);

// Entries that rebuild `config` when fed back through the CLI.
KeyValues bench_config_entries(const BenchConfig& config);

// Value parsers shared by the CLI and the config loader; all throw
// InvalidConfig naming `what`.
std::pair<std::size_t, std::size_t> parse_size(const std::string& text, const std::string& what);
// "0,1,2", "0..4" or a mix such as "0..2,7".
std::vector<std::uint64_t> parse_seeds(const std::string& text, const std::string& what);
std::vector<AdapterKind> parse_adapter_list(const std::string& text, const std::string& what);
std::vector<std::string> split_list(const std::string& text);
Crop parse_crop(const std::string& text, const std::string& what);
std::string join(const std::vector<std::string>& items, const std::string& sep = ",");

}  // namespace kra
