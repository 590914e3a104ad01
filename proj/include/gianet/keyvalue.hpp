#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

// `key = value` text used by the config files and checkpoint headers.
// Blank lines and lines starting with '#' are skipped.

namespace gianet::kv {

std::string trim(std::string_view s);
std::vector<std::pair<std::string, std::string>> parse(std::string_view text);
int64_t parse_int(const std::string& key, const std::string& value);
double parse_real(const std::string& key, const std::string& value);
bool parse_bool(const std::string& key, const std::string& value);
/// %.17g, so parse_real reproduces the value exactly.
std::string exact_real(double v);

}  // namespace gianet::kv
