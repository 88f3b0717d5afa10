#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace tdg {

// Shortest round-trip decimal for a double (printf %.17g); parsing the
// result with parse_double recovers the exact bits.
std::string fmt_g17(double v);

// Fixed six fractional digits, the metrics-table accuracy format.
std::string fmt_f6(double v);

double parse_double(std::string_view text, const char* what);
long long parse_int(std::string_view text, const char* what);
std::uint64_t parse_u64(std::string_view text, const char* what);

std::vector<std::string> split(std::string_view text, char sep);
std::string strip(std::string_view text);

// 16 hex digits of the FNV-1a hash, used for table metadata.
std::string hash_hex(std::string_view text);

}  // namespace tdg
