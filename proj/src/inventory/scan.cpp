#include "odm/inventory/scan.hpp"

#include <algorithm>
#include <future>
#include <map>

#include "nlohmann/json.hpp"
#include "odm/errors.hpp"
#include "odm/inventory/elf.hpp"
#include "odm/model/ondevice.hpp"
#include "odm/util/io.hpp"
#include "odm/util/parallel.hpp"
#include "odm/util/strings.hpp"

namespace odm::inventory {

using nlohmann::ordered_json;

const char* to_string(FormatHint h) {
  switch (h) {
    case FormatHint::GraphProto: return "graph-proto";
    case FormatHint::FlatSchema: return "flat-schema";
    case FormatHint::Unknown: return "unknown";
  }
  return "unknown";
}

const char* to_string(Validation v) {
  switch (v) {
    case Validation::Valid: return "valid";
    case Validation::Invalid: return "invalid";
    case Validation::Unvalidated: return "unvalidated";
  }
  return "unvalidated";
}

ScanConfig::ScanConfig() : signatures(default_signatures()) {}

std::vector<FrameworkSignature> default_signatures() {
  // The TensorFlow identifiers are the published pair; the other entries are
  // placeholders chosen for fixture corpora (see README).
  return {
      {"TensorFlow", {"TF_AllocateTensor", "tensorflow"}},
      {"TFLite", {"TfLiteIntArrayCreate", "tflite"}},
      {"Caffe2", {"caffe2::Tensor"}},
      {"NCNN", {"ncnn::Extractor"}},
  };
}

ZipFileTree::ZipFileTree(const ZipReader& reader) : reader_(reader) {
  for (const auto& e : reader.entries()) {
    if (!e.is_dir()) entries_.push_back({e.name, e.uncompressed_size});
  }
}

std::vector<std::uint8_t> ZipFileTree::read(const std::string& path) const {
  const auto entry = reader_.find(path);
  if (!entry) throw CorruptArchive("entry not found: " + path);
  return reader_.extract(*entry);
}

void MemoryFileTree::add(const std::string& path, std::vector<std::uint8_t> content) {
  entries_.push_back({path, content.size()});
  contents_.push_back(std::move(content));
}

void MemoryFileTree::add_text(const std::string& path, const std::string& content) {
  add(path, std::vector<std::uint8_t>(content.begin(), content.end()));
}

std::vector<std::uint8_t> MemoryFileTree::read(const std::string& path) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].path == path) return contents_[i];
  }
  throw CorruptArchive("entry not found: " + path);
}

std::set<std::string> detect_frameworks(std::span<const std::uint8_t> native_library_bytes,
                                        const std::vector<FrameworkSignature>& signatures,
                                        bool match_all) {
  const auto rodata = rodata_section(native_library_bytes);
  std::set<std::string> found;
  for (const auto& sig : signatures) {
    if (sig.identifier_strings.empty()) continue;
    std::size_t hits = 0;
    for (const auto& ident : sig.identifier_strings) {
      const bool present = std::search(rodata.begin(), rodata.end(), ident.begin(),
                                       ident.end()) != rodata.end();
      if (present) ++hits;
    }
    const bool matched =
        match_all ? hits == sig.identifier_strings.size() : hits > 0;
    if (matched) found.insert(sig.framework_id);
  }
  return found;
}

namespace {

bool under_any_dir(const std::string& path, const std::vector<std::string>& dirs) {
  for (const auto& dir : dirs) {
    if (util::starts_with(path, dir)) return true;
  }
  return false;
}

std::string base_name(const std::string& path) {
  const auto slash = path.find_last_of('/');
  return slash == std::string::npos ? path : path.substr(slash + 1);
}

FormatHint hint_from_suffix(const std::string& lower_name) {
  if (util::ends_with(lower_name, ".pb")) return FormatHint::GraphProto;
  if (util::ends_with(lower_name, ".tflite") || util::ends_with(lower_name, ".lite")) {
    return FormatHint::FlatSchema;
  }
  return FormatHint::Unknown;
}

// Framework a validated candidate is implied to need, for cross-checking
// against the detected set.
std::string implied_framework(FormatHint hint) {
  switch (hint) {
    case FormatHint::GraphProto: return "TensorFlow";
    case FormatHint::FlatSchema: return "TFLite";
    case FormatHint::Unknown: return "unknown";
  }
  return "unknown";
}

}  // namespace

std::vector<ModelCandidate> find_model_candidates(const FileTree& tree,
                                                  const ScanConfig& config) {
  std::vector<ModelCandidate> out;
  for (const auto& entry : tree.entries()) {
    if (!under_any_dir(entry.path, config.model_dirs)) continue;
    const std::string lower = util::to_lower(entry.path);
    bool match = false;
    for (const auto& suffix : config.model_suffixes) {
      if (util::ends_with(lower, suffix)) {
        match = true;
        break;
      }
    }
    if (!match) continue;
    ModelCandidate c;
    c.archive_path = entry.path;
    c.format_hint = hint_from_suffix(lower);
    c.size_bytes = entry.size;
    c.validation = Validation::Unvalidated;
    out.push_back(std::move(c));
  }
  std::sort(out.begin(), out.end(),
            [](const ModelCandidate& a, const ModelCandidate& b) {
              return a.archive_path < b.archive_path;
            });
  return out;
}

Validation validate_model(std::span<const std::uint8_t> candidate_bytes, FormatHint hint,
                          std::string* reason) {
  const model::ModelFormat format = hint == FormatHint::GraphProto ? model::ModelFormat::GraphProto
                                    : hint == FormatHint::FlatSchema
                                        ? model::ModelFormat::FlatSchema
                                        : model::ModelFormat::Auto;
  try {
    (void)model::load_model(candidate_bytes, format);  // load implies I/O tensors exist
    return Validation::Valid;
  } catch (const Error& e) {
    if (reason) *reason = e.what();
    return Validation::Invalid;
  }
}

namespace {

bool looks_binary(const std::vector<std::uint8_t>& bytes) {
  for (const auto b : bytes) {
    if (b == 0) return true;
  }
  return false;
}

void parse_label_text(const std::vector<std::uint8_t>& bytes, LabelFileRecord& rec) {
  if (looks_binary(bytes)) throw UnreadableLabelFile(rec.archive_path);
  std::string text(bytes.begin(), bytes.end());
  std::vector<std::string> labels;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string::npos) {
      if (start < text.size()) labels.push_back(util::trim(text.substr(start)));
      break;
    }
    labels.push_back(util::trim(text.substr(start, nl - start)));
    start = nl + 1;
  }
  rec.labels = std::move(labels);
}

void parse_label_json(const std::vector<std::uint8_t>& bytes, LabelFileRecord& rec) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception&) {
    throw UnreadableLabelFile(rec.archive_path);
  }
  std::vector<std::string> labels;
  if (doc.is_array()) {
    for (const auto& item : doc) {
      if (!item.is_string()) throw UnreadableLabelFile(rec.archive_path);
      labels.push_back(util::trim(item.get<std::string>()));
    }
  } else if (doc.is_object()) {
    // index-keyed maps: order by numeric key when possible, else by key text
    std::map<std::string, std::string> by_key;
    bool all_numeric = true;
    for (const auto& [k, v] : doc.items()) {
      if (!v.is_string()) throw UnreadableLabelFile(rec.archive_path);
      by_key[k] = v.get<std::string>();
      if (k.find_first_not_of("0123456789") != std::string::npos) all_numeric = false;
    }
    std::vector<std::pair<std::string, std::string>> items(by_key.begin(), by_key.end());
    if (all_numeric) {
      std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        return std::stol(a.first) < std::stol(b.first);
      });
    }
    for (const auto& [k, v] : items) labels.push_back(util::trim(v));
  } else {
    throw UnreadableLabelFile(rec.archive_path);
  }
  rec.labels = std::move(labels);
}

}  // namespace

std::vector<LabelFileRecord> find_label_files(const FileTree& tree, const ScanConfig& config) {
  std::vector<LabelFileRecord> out;
  for (const auto& entry : tree.entries()) {
    const std::string lower = util::to_lower(entry.path);
    bool suffix_ok = false;
    for (const auto& suffix : config.label_suffixes) {
      if (util::ends_with(lower, suffix)) {
        suffix_ok = true;
        break;
      }
    }
    if (!suffix_ok) continue;
    const std::string base = util::to_lower(base_name(entry.path));
    bool keyword_ok = false;
    for (const auto& kw : config.label_keywords) {
      if (util::contains(base, kw)) {
        keyword_ok = true;
        break;
      }
    }
    if (!keyword_ok) continue;

    LabelFileRecord rec;
    rec.archive_path = entry.path;
    try {
      const auto bytes = tree.read(entry.path);
      if (util::ends_with(lower, ".json")) {
        parse_label_json(bytes, rec);
      } else {
        parse_label_text(bytes, rec);
      }
      rec.label_count = rec.labels.size();
      std::set<std::string> uniq(rec.labels.begin(), rec.labels.end());
      rec.has_duplicates = uniq.size() != rec.labels.size();
    } catch (const Error& e) {
      rec.labels.clear();
      rec.label_count = 0;
      rec.error = e.what();
    }
    out.push_back(std::move(rec));
  }
  std::sort(out.begin(), out.end(), [](const LabelFileRecord& a, const LabelFileRecord& b) {
    return a.archive_path < b.archive_path;
  });
  return out;
}

InventoryRecord scan_package_bytes(const std::string& package_id,
                                   std::vector<std::uint8_t> bytes, const ScanConfig& config) {
  ZipReader reader(std::move(bytes));  // NotAnApk / CorruptArchive propagate
  ZipFileTree tree(reader);

  InventoryRecord rec;
  rec.package_id = package_id;
  rec.scan_timestamp = util::utc_timestamp();

  std::set<std::string> frameworks;
  for (const auto& entry : tree.entries()) {
    if (!util::starts_with(entry.path, config.native_lib_dir)) continue;
    if (!util::ends_with(util::to_lower(entry.path), ".so")) continue;
    try {
      const auto lib = tree.read(entry.path);
      const auto found =
          detect_frameworks(lib, config.signatures, config.match_all_identifiers);
      frameworks.insert(found.begin(), found.end());
    } catch (const NotAnElf&) {
      rec.notes.push_back("not-an-elf: " + entry.path);
    } catch (const MissingRodata&) {
      // stripped/unusual library: treated as contributing no frameworks
      rec.notes.push_back("no-rodata: " + entry.path);
    }
  }
  rec.frameworks_detected.assign(frameworks.begin(), frameworks.end());
  rec.is_dl_app = !rec.frameworks_detected.empty();

  rec.model_candidates = find_model_candidates(tree, config);
  for (auto& candidate : rec.model_candidates) {
    const auto bytes_in = tree.read(candidate.archive_path);
    std::string reason;
    candidate.validation = validate_model(bytes_in, candidate.format_hint, &reason);
    candidate.validation_reason = candidate.validation == Validation::Invalid ? reason : "";
    if (candidate.validation == Validation::Valid) {
      const std::string implied = implied_framework(candidate.format_hint);
      if (implied != "unknown" && !frameworks.count(implied)) {
        rec.notes.push_back("model-without-framework: " + candidate.archive_path);
      }
    }
  }

  rec.label_files = find_label_files(tree, config);
  std::sort(rec.notes.begin(), rec.notes.end());
  return rec;
}

InventoryRecord scan_apk(const std::filesystem::path& package_path, const ScanConfig& config) {
  return scan_package_bytes(package_path.filename().string(),
                            util::read_file(package_path), config);
}

std::vector<InventoryRecord> scan_corpus(const std::filesystem::path& corpus_dir,
                                         const ScanConfig& config) {
  std::vector<std::filesystem::path> packages;
  for (const auto& entry : std::filesystem::directory_iterator(corpus_dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = util::to_lower(entry.path().extension().string());
    if (ext == ".apk" || ext == ".zip") packages.push_back(entry.path());
  }
  std::sort(packages.begin(), packages.end());

  std::vector<InventoryRecord> records(packages.size());
  util::parallel_blocks(packages.size(), [&](int, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      try {
        records[i] = scan_apk(packages[i], config);
      } catch (const Error& err) {
        records[i].package_id = packages[i].filename().string();
        records[i].scan_timestamp = util::utc_timestamp();
        records[i].notes.push_back(std::string("unscannable: ") + err.what());
      }
    }
  });
  std::sort(records.begin(), records.end(),
            [](const InventoryRecord& a, const InventoryRecord& b) {
              return a.package_id < b.package_id;
            });
  return records;
}

std::string to_jsonl(const InventoryRecord& record) {
  ordered_json j;
  j["package_id"] = record.package_id;
  j["is_dl_app"] = record.is_dl_app;
  j["frameworks_detected"] = record.frameworks_detected;
  j["model_candidates"] = ordered_json::array();
  for (const auto& c : record.model_candidates) {
    ordered_json jc;
    jc["archive_path"] = c.archive_path;
    jc["format_hint"] = to_string(c.format_hint);
    jc["size_bytes"] = c.size_bytes;
    jc["validation"] = to_string(c.validation);
    if (!c.validation_reason.empty()) jc["validation_reason"] = c.validation_reason;
    j["model_candidates"].push_back(std::move(jc));
  }
  j["label_files"] = ordered_json::array();
  for (const auto& l : record.label_files) {
    ordered_json jl;
    jl["archive_path"] = l.archive_path;
    jl["label_count"] = l.label_count;
    jl["labels"] = l.labels;
    jl["has_duplicates"] = l.has_duplicates;
    if (!l.error.empty()) jl["error"] = l.error;
    j["label_files"].push_back(std::move(jl));
  }
  j["notes"] = record.notes;
  j["scan_timestamp"] = record.scan_timestamp;
  return j.dump();
}

InventoryRecord inventory_from_json(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  InventoryRecord rec;
  rec.package_id = j.at("package_id").get<std::string>();
  rec.is_dl_app = j.at("is_dl_app").get<bool>();
  rec.frameworks_detected = j.at("frameworks_detected").get<std::vector<std::string>>();
  for (const auto& jc : j.at("model_candidates")) {
    ModelCandidate c;
    c.archive_path = jc.at("archive_path").get<std::string>();
    const std::string hint = jc.at("format_hint").get<std::string>();
    c.format_hint = hint == "graph-proto"  ? FormatHint::GraphProto
                    : hint == "flat-schema" ? FormatHint::FlatSchema
                                            : FormatHint::Unknown;
    c.size_bytes = jc.at("size_bytes").get<std::uint64_t>();
    const std::string v = jc.at("validation").get<std::string>();
    c.validation = v == "valid"     ? Validation::Valid
                   : v == "invalid" ? Validation::Invalid
                                    : Validation::Unvalidated;
    if (jc.contains("validation_reason")) {
      c.validation_reason = jc.at("validation_reason").get<std::string>();
    }
    rec.model_candidates.push_back(std::move(c));
  }
  for (const auto& jl : j.at("label_files")) {
    LabelFileRecord l;
    l.archive_path = jl.at("archive_path").get<std::string>();
    l.label_count = jl.at("label_count").get<std::size_t>();
    l.labels = jl.at("labels").get<std::vector<std::string>>();
    l.has_duplicates = jl.at("has_duplicates").get<bool>();
    if (jl.contains("error")) l.error = jl.at("error").get<std::string>();
    rec.label_files.push_back(std::move(l));
  }
  rec.notes = j.at("notes").get<std::vector<std::string>>();
  rec.scan_timestamp = j.at("scan_timestamp").get<std::string>();
  return rec;
}

}  // namespace odm::inventory
