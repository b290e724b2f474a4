#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include "seriescore/core.hpp"

namespace seriescore {

static_assert(std::endian::native == std::endian::little, "on-disk formats assume a little-endian host");

class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  void put(T value) {
    out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
    check();
  }

  template <typename T>
  void put_vector(const std::vector<T>& values) {
    put<std::uint64_t>(values.size());
    out_.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(T)));
    check();
  }

  void put_bytes(const void* data, std::size_t size) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    check();
  }

 private:
  void check() {
    if (!out_) throw Error(ErrorCode::kIo, "write failed");
  }

  std::ostream& out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::istream& in) : in_(in) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  T get() {
    T value{};
    in_.read(reinterpret_cast<char*>(&value), sizeof(T));
    check();
    return value;
  }

  template <typename T>
  std::vector<T> get_vector() {
    constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 36;
    const auto n = get<std::uint64_t>();
    if (n > kMaxElements / sizeof(T)) throw Error(ErrorCode::kCorruptIndex, "vector length out of range");
    std::vector<T> values(n);
    in_.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(n * sizeof(T)));
    check();
    return values;
  }

  void get_bytes(void* data, std::size_t size) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
    check();
  }

 private:
  void check() {
    if (!in_) throw Error(ErrorCode::kCorruptIndex, "unexpected end of file");
  }

  std::istream& in_;
};

/// Text sidecar describing a header-less float32 dataset file.
struct DatasetMeta {
  std::uint64_t count = 0;
  std::uint64_t length = 0;
  std::optional<std::uint64_t> seed;
  bool normalized = true;

  friend bool operator==(const DatasetMeta&, const DatasetMeta&) = default;
};

std::string default_meta_path(const std::string& dataset_path);

void write_meta(const std::string& path, const DatasetMeta& meta);
DatasetMeta read_meta(const std::string& path);

/// Writes count*length little-endian float32 values, series-major.
void write_dataset(const std::string& path, const Dataset& data);

/// Streams the body through a buffer of `buffer_bytes`; one sequential access
/// is recorded per buffer-sized block read.
Dataset load_dataset(const std::string& path, const DatasetMeta& meta, std::size_t buffer_bytes,
                     AccessStats* stats = nullptr);

/// Common index container header.
enum class MethodTag : std::uint32_t {
  kScan = 0,
  kIsax = 1,
  kDsTree = 2,
  kSfa = 3,
  kVaFile = 4,
};

inline constexpr char kIndexMagic[8] = {'S', 'C', 'I', 'D', 'X', '\0', '\r', '\n'};
inline constexpr std::uint32_t kIndexVersion = 1;

void write_index_header(BinaryWriter& out, MethodTag tag, const Dataset& data);
/// Validates magic, version, tag and dataset shape.
void read_index_header(BinaryReader& in, MethodTag expected, const Dataset& data);

}  // namespace seriescore
