#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace odm::inventory {

struct ZipEntry {
  std::string name;
  std::uint32_t crc32 = 0;
  std::uint64_t compressed_size = 0;
  std::uint64_t uncompressed_size = 0;
  std::uint16_t method = 0;  // 0 = stored, 8 = deflate
  std::uint64_t local_header_offset = 0;
  bool is_dir() const { return !name.empty() && name.back() == '/'; }
};

// Central-directory based reader over an in-memory archive. Constructor
// throws NotAnApk when the bytes are not a ZIP container and CorruptArchive
// when the directory is unreadable.
class ZipReader {
 public:
  explicit ZipReader(std::vector<std::uint8_t> bytes);

  const std::vector<ZipEntry>& entries() const { return entries_; }
  std::optional<ZipEntry> find(const std::string& name) const;
  std::vector<std::uint8_t> extract(const ZipEntry& entry) const;

 private:
  std::vector<std::uint8_t> bytes_;
  std::vector<ZipEntry> entries_;
};

// Minimal writer, enough to assemble fixture packages. Entries are stored or
// deflated; the archive is finalized with a standard central directory.
class ZipWriter {
 public:
  void add(const std::string& name, const std::vector<std::uint8_t>& content,
           bool compress = false);
  void add_text(const std::string& name, const std::string& content, bool compress = false);
  std::vector<std::uint8_t> finish();

 private:
  struct Record {
    ZipEntry entry;
  };
  std::vector<std::uint8_t> out_;
  std::vector<Record> records_;
};

}  // namespace odm::inventory
