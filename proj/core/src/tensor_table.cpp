#include "dummf/tensor_table.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "dummf/error.hpp"
#include "dummf/scene_io.hpp"

namespace dummf {

namespace {

constexpr char kMagic[4] = {'D', 'M', 'F', '1'};

void put_u64(std::string& out, std::uint64_t x) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::string_view b) : b_(b) {}
  std::uint64_t u64() {
    need(8);
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return x;
  }
  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }
  std::size_t remaining() const { return b_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw LoadError("tensor table truncated at byte " + std::to_string(pos_));
  }
  std::string_view b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_tensor_table(const TensorTable& table) {
  std::string out(kMagic, 4);
  put_u64(out, table.size());
  for (const auto& [name, a] : table) {
    if (numel(a.shape) != a.data.size()) throw ShapeError("tensor table entry '" + name + "' has inconsistent shape");
    put_u64(out, name.size());
    out += name;
    put_u64(out, a.shape.size());
    for (auto d : a.shape) put_u64(out, d);
    for (double x : a.data) put_u64(out, std::bit_cast<std::uint64_t>(x));
  }
  return out;
}

TensorTable decode_tensor_table(std::string_view bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw LoadError("not a tensor table (bad magic)");
  Reader r(bytes.substr(4));
  const auto count = r.u64();
  TensorTable table;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = r.u64();
    if (len > r.remaining()) throw LoadError("tensor table truncated in record name");
    std::string name(r.bytes(len));
    StoredArray a;
    const auto rank = r.u64();
    if (rank > 16) throw LoadError("tensor '" + name + "' has implausible rank " + std::to_string(rank));
    std::size_t n = 1;
    for (std::uint64_t k = 0; k < rank; ++k) {
      a.shape.push_back(r.u64());
      n *= a.shape.back();
    }
    if (n > r.remaining() / 8) throw LoadError("tensor '" + name + "' data truncated");
    a.data.resize(n);
    for (auto& x : a.data) x = std::bit_cast<double>(r.u64());
    if (!table.emplace(std::move(name), std::move(a)).second) throw LoadError("duplicate tensor name in table");
  }
  if (!r.done()) throw LoadError("trailing bytes after tensor table");
  return table;
}

void save_tensor_table(const std::filesystem::path& path, const TensorTable& table) {
  write_file_atomic(path, encode_tensor_table(table));
}

TensorTable load_tensor_table(const std::filesystem::path& path) {
  std::string bytes;
  try {
    bytes = read_text_file(path);
  } catch (const Error& e) {
    throw LoadError(e.what());
  }
  return decode_tensor_table(bytes);
}

StoredArray text_array(std::string_view text) {
  StoredArray a{{text.size()}, {}};
  for (unsigned char c : text) a.data.push_back(c);
  return a;
}

std::string array_text(const StoredArray& a) {
  std::string s;
  for (double x : a.data) {
    if (!(x >= 0 && x < 256) || x != std::floor(x)) throw LoadError("metadata tensor holds non-byte values");
    s.push_back(static_cast<char>(static_cast<unsigned char>(x)));
  }
  return s;
}

}  // namespace dummf
