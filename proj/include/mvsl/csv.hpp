#pragma once

// Small CSV and key-value persistence helpers. Numeric output uses 17
// significant digits so doubles survive a save/load round trip exactly.
// Parse failures throw IoError naming the file and 1-based line number.

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mvsl/common.hpp"

namespace mvsl {

std::string format_double(double v);  // %.17g

void save_matrix_csv(const Matrix& m, const std::filesystem::path& file,
                     const std::string& column_prefix = "c");

// Expects a header row followed by uniform-width numeric rows.
Matrix load_matrix_csv(const std::filesystem::path& file);

void save_labels_csv(const std::vector<int>& labels,
                     const std::filesystem::path& file);
std::vector<int> load_labels_csv(const std::filesystem::path& file);

// Ordered key/value text: one "key value..." pair per line, '#' comments.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

void save_key_values(const KeyValues& kv, const std::filesystem::path& file);
KeyValues load_key_values(const std::filesystem::path& file);

// Lookup helpers; get() throws IoError when the key is missing.
const std::string& kv_get(const KeyValues& kv, const std::string& key,
                          const std::filesystem::path& origin);
bool kv_has(const KeyValues& kv, const std::string& key);

}  // namespace mvsl
