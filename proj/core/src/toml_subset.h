#pragma once

#include <string_view>

#include "json.hpp"

namespace fairtext::detail {

// Parses the flat TOML subset used by pipeline configs: `[table]` and
// `[table.sub]` headers, `key = value` pairs with basic or literal strings,
// integers, floats, booleans and (possibly multi-line) arrays of those.
// Comments start with '#'. Throws ValidationError naming the line.
nlohmann::json parse_toml_subset(std::string_view text);

}  // namespace fairtext::detail
