#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace odm::fix {

struct PackageOptions {
  bool with_framework_lib = true;
  bool with_model = true;
  bool with_labels = true;
  int label_count = 10;
  bool model_in_res_raw = false;     // assets/ otherwise
  bool corrupt_model = false;        // truncated model bytes
  bool partial_identifiers = false;  // library carries only one TF identifier
  std::uint64_t seed = 1;
};

// One APK-shaped ZIP with optional planted native library, model, labels and
// a few distractor files.
std::vector<std::uint8_t> build_package(const PackageOptions& opts);

// The 10-package fixture corpus: 5 DL packages (framework library + valid
// model + matching labels) and 5 without framework libraries, including the
// tricky negatives (stray model without a library, partial identifiers,
// corrupt model). Returns the file names written, DL packages first.
std::vector<std::string> write_fixture_corpus(const std::filesystem::path& dir,
                                              std::uint64_t seed);

}  // namespace odm::fix
