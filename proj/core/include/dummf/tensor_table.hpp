#pragma once

// Binary tensor table:
//
//   "DMF1" | u64 count | count x record
//   record = u64 name_len | name bytes (UTF-8) | u64 rank | rank x u64 dim | numel x f64
//
// All integers and reals little-endian. Records are written in name order.

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "dummf/tensor.hpp"

namespace dummf {

struct StoredArray {
  Shape shape;
  std::vector<double> data;
  bool operator==(const StoredArray&) const = default;
};

using TensorTable = std::map<std::string, StoredArray>;

std::string encode_tensor_table(const TensorTable& table);
// Throws LoadError on bad magic, truncation or inconsistent records.
TensorTable decode_tensor_table(std::string_view bytes);

void save_tensor_table(const std::filesystem::path& path, const TensorTable& table);
TensorTable load_tensor_table(const std::filesystem::path& path);

// Text stored one byte per element, for metadata such as configs.
StoredArray text_array(std::string_view text);
std::string array_text(const StoredArray& a);

}  // namespace dummf
