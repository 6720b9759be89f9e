#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "odm/inventory/zip.hpp"

namespace odm::inventory {

// ---------------------------------------------------------------------------
// Domain types

struct FrameworkSignature {
  std::string framework_id;
  std::vector<std::string> identifier_strings;  // plain ASCII, no wildcards
};

enum class FormatHint { GraphProto, FlatSchema, Unknown };
enum class Validation { Valid, Invalid, Unvalidated };

const char* to_string(FormatHint h);
const char* to_string(Validation v);

struct ModelCandidate {
  std::string archive_path;
  FormatHint format_hint = FormatHint::Unknown;
  std::uint64_t size_bytes = 0;
  Validation validation = Validation::Unvalidated;
  std::string validation_reason;  // set when invalid
};

struct LabelFileRecord {
  std::string archive_path;
  std::size_t label_count = 0;
  std::vector<std::string> labels;
  bool has_duplicates = false;
  std::string error;  // set when the file matched but could not be decoded
};

struct InventoryRecord {
  std::string package_id;
  std::vector<std::string> frameworks_detected;  // sorted, unique
  std::vector<ModelCandidate> model_candidates;
  std::vector<LabelFileRecord> label_files;
  std::string scan_timestamp;  // UTC, excluded from idempotence comparisons
  bool is_dl_app = false;      // false iff frameworks_detected is empty
  std::vector<std::string> notes;
};

// ---------------------------------------------------------------------------
// Scan configuration. Suffix and keyword sets default to the published lists
// but stay configurable; identifier matching requires ALL strings of a
// framework by default (reduces false positives from generic substrings).

struct ScanConfig {
  std::vector<FrameworkSignature> signatures;
  std::vector<std::string> model_dirs = {"assets/", "res/raw/"};
  std::vector<std::string> model_suffixes = {".pb", ".tflite", ".lite", ".bin", ".tensorflow"};
  std::vector<std::string> label_suffixes = {".txt", ".json"};
  std::vector<std::string> label_keywords = {"label", "labels", "class", "classes"};
  std::string native_lib_dir = "lib/";
  bool match_all_identifiers = true;

  ScanConfig();
};

// Built-in signature table. Only the TensorFlow entry is backed by published
// identifier strings; the remaining entries are this toolkit's placeholders
// and are expected to be overridden from configuration for real corpora.
std::vector<FrameworkSignature> default_signatures();

// ---------------------------------------------------------------------------
// Archive listing abstraction: entry enumeration plus content access.

struct FileTreeEntry {
  std::string path;
  std::uint64_t size = 0;
};

class FileTree {
 public:
  virtual ~FileTree() = default;
  virtual const std::vector<FileTreeEntry>& entries() const = 0;
  virtual std::vector<std::uint8_t> read(const std::string& path) const = 0;
};

class ZipFileTree : public FileTree {
 public:
  explicit ZipFileTree(const ZipReader& reader);
  const std::vector<FileTreeEntry>& entries() const override { return entries_; }
  std::vector<std::uint8_t> read(const std::string& path) const override;

 private:
  const ZipReader& reader_;
  std::vector<FileTreeEntry> entries_;
};

class MemoryFileTree : public FileTree {
 public:
  void add(const std::string& path, std::vector<std::uint8_t> content);
  void add_text(const std::string& path, const std::string& content);
  const std::vector<FileTreeEntry>& entries() const override { return entries_; }
  std::vector<std::uint8_t> read(const std::string& path) const override;

 private:
  std::vector<FileTreeEntry> entries_;
  std::vector<std::vector<std::uint8_t>> contents_;
};

// ---------------------------------------------------------------------------
// Operations

// Frameworks whose identifier strings occur in the library's read-only data
// section. Throws NotAnElf / MissingRodata per the binary-parsing contract.
std::set<std::string> detect_frameworks(std::span<const std::uint8_t> native_library_bytes,
                                        const std::vector<FrameworkSignature>& signatures,
                                        bool match_all = true);

// Model-shaped files under the scanned model directories, lexicographic by
// path, validation left as Unvalidated.
std::vector<ModelCandidate> find_model_candidates(const FileTree& tree,
                                                  const ScanConfig& config = ScanConfig());

// Valid iff a loader for the hinted format accepts the bytes and reports at
// least one input and one output tensor. Never throws on arbitrary bytes.
Validation validate_model(std::span<const std::uint8_t> candidate_bytes, FormatHint hint,
                          std::string* reason = nullptr);

// Label-shaped files (suffix + name keyword), parsed into ordered label
// lists. Undecodable matches are recorded with label_count 0.
std::vector<LabelFileRecord> find_label_files(const FileTree& tree,
                                              const ScanConfig& config = ScanConfig());

// Full package scan: framework detection over all native libraries, model
// candidate discovery + validation, label discovery. Throws NotAnApk /
// CorruptArchive. Idempotent modulo scan_timestamp.
InventoryRecord scan_apk(const std::filesystem::path& package_path,
                         const ScanConfig& config = ScanConfig());
InventoryRecord scan_package_bytes(const std::string& package_id,
                                   std::vector<std::uint8_t> bytes,
                                   const ScanConfig& config = ScanConfig());

// Scans every *.apk/*.zip file under corpus_dir (parallel per package),
// results sorted by package_id. Unreadable packages yield a record with an
// explanatory note rather than aborting the sweep.
std::vector<InventoryRecord> scan_corpus(const std::filesystem::path& corpus_dir,
                                         const ScanConfig& config = ScanConfig());

std::string to_jsonl(const InventoryRecord& record);  // stable field order
InventoryRecord inventory_from_json(const std::string& line);

}  // namespace odm::inventory
