#include "odm/inventory/zip.hpp"

#include <zlib.h>

#include <cstring>
#include <limits>

#include "odm/errors.hpp"

namespace odm::inventory {

namespace {

constexpr std::uint32_t kLocalSig = 0x04034b50;
constexpr std::uint32_t kCentralSig = 0x02014b50;
constexpr std::uint32_t kEocdSig = 0x06054b50;

std::uint16_t rd16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
std::uint32_t rd32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
void wr16(std::vector<std::uint8_t>& v, std::uint16_t x) {
  v.push_back(static_cast<std::uint8_t>(x & 0xff));
  v.push_back(static_cast<std::uint8_t>(x >> 8));
}
void wr32(std::vector<std::uint8_t>& v, std::uint32_t x) {
  for (int i = 0; i < 4; ++i) v.push_back(static_cast<std::uint8_t>((x >> (8 * i)) & 0xff));
}

std::vector<std::uint8_t> inflate_raw(const std::uint8_t* data, std::size_t size,
                                      std::uint64_t expected) {
  std::vector<std::uint8_t> out(expected);
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw CorruptArchive("inflate init failed");
  zs.next_in = const_cast<Bytef*>(data);
  zs.avail_in = static_cast<uInt>(size);
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || zs.total_out != expected) {
    throw CorruptArchive("deflate stream does not match directory sizes");
  }
  return out;
}

std::vector<std::uint8_t> deflate_raw(const std::vector<std::uint8_t>& data) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_BEST_COMPRESSION, Z_DEFLATED, -MAX_WBITS, 8, Z_DEFAULT_STRATEGY) !=
      Z_OK) {
    throw std::runtime_error("deflate init failed");
  }
  std::vector<std::uint8_t> out(deflateBound(&zs, static_cast<uLong>(data.size())));
  zs.next_in = const_cast<Bytef*>(data.data());
  zs.avail_in = static_cast<uInt>(data.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw std::runtime_error("deflate failed");
  out.resize(zs.total_out);
  return out;
}

}  // namespace

ZipReader::ZipReader(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {
  if (bytes_.size() < 22 || rd32(bytes_.data()) != kLocalSig) {
    // Empty archives start directly with the EOCD record.
    if (bytes_.size() < 22 || rd32(bytes_.data()) != kEocdSig) {
      throw NotAnApk("missing ZIP signature");
    }
  }
  // End-of-central-directory: scan backwards over a possible trailing comment.
  const std::size_t max_back = std::min<std::size_t>(bytes_.size(), 22 + 65535);
  std::size_t eocd = std::numeric_limits<std::size_t>::max();
  for (std::size_t off = bytes_.size() - 22;; --off) {
    if (rd32(bytes_.data() + off) == kEocdSig) {
      eocd = off;
      break;
    }
    if (off == 0 || bytes_.size() - off >= max_back) break;
  }
  if (eocd == std::numeric_limits<std::size_t>::max()) {
    throw CorruptArchive("end-of-central-directory record not found");
  }
  const std::uint8_t* e = bytes_.data() + eocd;
  const std::uint16_t n_entries = rd16(e + 10);
  const std::uint32_t cd_size = rd32(e + 12);
  const std::uint32_t cd_offset = rd32(e + 16);
  if (cd_offset == 0xffffffffu) throw CorruptArchive("zip64 archives are not supported");
  if (static_cast<std::uint64_t>(cd_offset) + cd_size > bytes_.size()) {
    throw CorruptArchive("central directory outside archive bounds");
  }

  std::size_t pos = cd_offset;
  for (std::uint16_t i = 0; i < n_entries; ++i) {
    if (pos + 46 > bytes_.size() || rd32(bytes_.data() + pos) != kCentralSig) {
      throw CorruptArchive("bad central directory entry");
    }
    const std::uint8_t* h = bytes_.data() + pos;
    ZipEntry entry;
    entry.method = rd16(h + 10);
    entry.crc32 = rd32(h + 16);
    entry.compressed_size = rd32(h + 20);
    entry.uncompressed_size = rd32(h + 24);
    const std::uint16_t name_len = rd16(h + 28);
    const std::uint16_t extra_len = rd16(h + 30);
    const std::uint16_t comment_len = rd16(h + 32);
    entry.local_header_offset = rd32(h + 42);
    if (pos + 46 + name_len > bytes_.size()) throw CorruptArchive("truncated entry name");
    entry.name.assign(reinterpret_cast<const char*>(h + 46), name_len);
    entries_.push_back(std::move(entry));
    pos += 46u + name_len + extra_len + comment_len;
  }
}

std::optional<ZipEntry> ZipReader::find(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e;
  }
  return std::nullopt;
}

std::vector<std::uint8_t> ZipReader::extract(const ZipEntry& entry) const {
  const std::uint64_t off = entry.local_header_offset;
  if (off + 30 > bytes_.size() || rd32(bytes_.data() + off) != kLocalSig) {
    throw CorruptArchive("bad local header for " + entry.name);
  }
  const std::uint8_t* h = bytes_.data() + off;
  // Name/extra lengths in the local header may differ from the central ones.
  const std::uint16_t name_len = rd16(h + 26);
  const std::uint16_t extra_len = rd16(h + 28);
  const std::uint64_t data_off = off + 30 + name_len + extra_len;
  if (data_off + entry.compressed_size > bytes_.size()) {
    throw CorruptArchive("entry data outside archive bounds: " + entry.name);
  }
  const std::uint8_t* data = bytes_.data() + data_off;

  std::vector<std::uint8_t> out;
  if (entry.method == 0) {
    if (entry.compressed_size != entry.uncompressed_size) {
      throw CorruptArchive("stored entry with mismatched sizes: " + entry.name);
    }
    out.assign(data, data + entry.uncompressed_size);
  } else if (entry.method == 8) {
    out = inflate_raw(data, entry.compressed_size, entry.uncompressed_size);
  } else {
    throw CorruptArchive("unsupported compression method for " + entry.name);
  }
  const auto crc =
      ::crc32(0L, out.empty() ? Z_NULL : out.data(), static_cast<uInt>(out.size()));
  if (static_cast<std::uint32_t>(crc) != entry.crc32) {
    throw CorruptArchive("crc mismatch for " + entry.name);
  }
  return out;
}

void ZipWriter::add(const std::string& name, const std::vector<std::uint8_t>& content,
                    bool compress) {
  Record rec;
  rec.entry.name = name;
  rec.entry.crc32 = static_cast<std::uint32_t>(
      ::crc32(0L, content.empty() ? Z_NULL : content.data(), static_cast<uInt>(content.size())));
  rec.entry.uncompressed_size = content.size();
  rec.entry.local_header_offset = out_.size();

  std::vector<std::uint8_t> payload;
  if (compress) {
    payload = deflate_raw(content);
    rec.entry.method = 8;
  } else {
    payload = content;
    rec.entry.method = 0;
  }
  rec.entry.compressed_size = payload.size();

  wr32(out_, kLocalSig);
  wr16(out_, 20);  // version needed
  wr16(out_, 0);   // flags
  wr16(out_, rec.entry.method);
  wr16(out_, 0);  // mod time
  wr16(out_, 0);  // mod date
  wr32(out_, rec.entry.crc32);
  wr32(out_, static_cast<std::uint32_t>(rec.entry.compressed_size));
  wr32(out_, static_cast<std::uint32_t>(rec.entry.uncompressed_size));
  wr16(out_, static_cast<std::uint16_t>(name.size()));
  wr16(out_, 0);  // extra len
  out_.insert(out_.end(), name.begin(), name.end());
  out_.insert(out_.end(), payload.begin(), payload.end());
  records_.push_back(std::move(rec));
}

void ZipWriter::add_text(const std::string& name, const std::string& content, bool compress) {
  add(name, std::vector<std::uint8_t>(content.begin(), content.end()), compress);
}

std::vector<std::uint8_t> ZipWriter::finish() {
  const std::size_t cd_start = out_.size();
  for (const auto& rec : records_) {
    wr32(out_, kCentralSig);
    wr16(out_, 20);  // version made by
    wr16(out_, 20);  // version needed
    wr16(out_, 0);   // flags
    wr16(out_, rec.entry.method);
    wr16(out_, 0);  // time
    wr16(out_, 0);  // date
    wr32(out_, rec.entry.crc32);
    wr32(out_, static_cast<std::uint32_t>(rec.entry.compressed_size));
    wr32(out_, static_cast<std::uint32_t>(rec.entry.uncompressed_size));
    wr16(out_, static_cast<std::uint16_t>(rec.entry.name.size()));
    wr16(out_, 0);  // extra
    wr16(out_, 0);  // comment
    wr16(out_, 0);  // disk number
    wr16(out_, 0);  // internal attrs
    wr32(out_, 0);  // external attrs
    wr32(out_, static_cast<std::uint32_t>(rec.entry.local_header_offset));
    out_.insert(out_.end(), rec.entry.name.begin(), rec.entry.name.end());
  }
  const std::size_t cd_size = out_.size() - cd_start;
  wr32(out_, kEocdSig);
  wr16(out_, 0);  // disk
  wr16(out_, 0);  // cd disk
  wr16(out_, static_cast<std::uint16_t>(records_.size()));
  wr16(out_, static_cast<std::uint16_t>(records_.size()));
  wr32(out_, static_cast<std::uint32_t>(cd_size));
  wr32(out_, static_cast<std::uint32_t>(cd_start));
  wr16(out_, 0);  // comment length
  return std::move(out_);
}

}  // namespace odm::inventory
