#include "seriescore/storage.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace seriescore {

std::string default_meta_path(const std::string& dataset_path) { return dataset_path + ".meta"; }

void write_meta(const std::string& path, const DatasetMeta& meta) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path);
  out << "count=" << meta.count << "\n";
  out << "length=" << meta.length << "\n";
  if (meta.seed) out << "seed=" << *meta.seed << "\n";
  out << "normalized=" << (meta.normalized ? 1 : 0) << "\n";
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
}

DatasetMeta read_meta(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open metadata " + path);
  DatasetMeta meta;
  bool has_count = false, has_length = false;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::kSizeMismatch, "malformed metadata line: " + line);
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    try {
      if (key == "count") {
        meta.count = std::stoull(value);
        has_count = true;
      } else if (key == "length") {
        meta.length = std::stoull(value);
        has_length = true;
      } else if (key == "seed") {
        meta.seed = std::stoull(value);
      } else if (key == "normalized") {
        meta.normalized = value == "1" || value == "true";
      }
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::kSizeMismatch, "bad metadata value: " + line);
    }
  }
  if (!has_count || !has_length || meta.length == 0) {
    throw Error(ErrorCode::kSizeMismatch, "metadata must define count and a positive length");
  }
  return meta;
}

void write_dataset(const std::string& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path);
  const auto raw = data.raw();
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * sizeof(float)));
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
}

Dataset load_dataset(const std::string& path, const DatasetMeta& meta, std::size_t buffer_bytes, AccessStats* stats) {
  if (meta.length == 0) throw Error(ErrorCode::kBadLength, "metadata length must be positive");
  const std::size_t series_bytes = meta.length * sizeof(float);
  if (buffer_bytes < series_bytes) {
    throw Error(ErrorCode::kBadBuffer, "buffer smaller than one series");
  }
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot stat " + path);
  if (size != meta.count * series_bytes) {
    throw Error(ErrorCode::kSizeMismatch, "file size " + std::to_string(size) + " does not match metadata");
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);

  // Whole series per block so a series never straddles two reads.
  const std::size_t per_block = buffer_bytes / series_bytes;
  std::vector<float> values(meta.count * meta.length);
  std::size_t done = 0;
  while (done < meta.count) {
    const std::size_t n = std::min(per_block, static_cast<std::size_t>(meta.count) - done);
    in.read(reinterpret_cast<char*>(values.data() + done * meta.length),
            static_cast<std::streamsize>(n * series_bytes));
    if (!in) throw Error(ErrorCode::kSizeMismatch, "short read from " + path);
    for (std::size_t i = done * meta.length; i < (done + n) * meta.length; ++i) {
      if (!std::isfinite(values[i])) throw Error(ErrorCode::kBadFloat, "non-finite value at index " + std::to_string(i));
    }
    done += n;
    if (stats) ++stats->sequential_accesses;
  }
  if (meta.count == 0) throw Error(ErrorCode::kEmptyDataset, "dataset has no series");
  return Dataset(meta.length, std::move(values));
}

void write_index_header(BinaryWriter& out, MethodTag tag, const Dataset& data) {
  out.put_bytes(kIndexMagic, sizeof(kIndexMagic));
  out.put<std::uint32_t>(kIndexVersion);
  out.put<std::uint32_t>(static_cast<std::uint32_t>(tag));
  out.put<std::uint64_t>(data.count());
  out.put<std::uint64_t>(data.length());
}

void read_index_header(BinaryReader& in, MethodTag expected, const Dataset& data) {
  char magic[sizeof(kIndexMagic)];
  in.get_bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kIndexMagic, sizeof(magic)) != 0) throw Error(ErrorCode::kCorruptIndex, "bad index magic");
  if (in.get<std::uint32_t>() != kIndexVersion) throw Error(ErrorCode::kCorruptIndex, "unsupported index version");
  if (in.get<std::uint32_t>() != static_cast<std::uint32_t>(expected)) {
    throw Error(ErrorCode::kCorruptIndex, "index was built by a different method");
  }
  const auto count = in.get<std::uint64_t>();
  const auto length = in.get<std::uint64_t>();
  if (count != data.count() || length != data.length()) {
    throw Error(ErrorCode::kCorruptIndex, "index was built for a different dataset shape");
  }
}

}  // namespace seriescore
