#pragma once

#include <filesystem>
#include <string_view>

#include <json.hpp>

namespace gpode {

/// Parses the TOML subset used by experiment configs: `[table]` headers,
/// `key = value` pairs, strings, booleans, numbers and single-line arrays of
/// scalars. Anything else is rejected with a line number.
[[nodiscard]] nlohmann::json parse_toml_subset(std::string_view text);

/// Reads a `.toml` file with parse_toml_subset and anything else as JSON.
[[nodiscard]] nlohmann::json load_structured_file(const std::filesystem::path& path);

}  // namespace gpode
