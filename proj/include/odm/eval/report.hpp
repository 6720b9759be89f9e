#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace odm::eval {

// One measured (model, attack) pair. The "normal" attack row carries the
// clean baseline; BAC of other rows is validated against it.
struct AttackRunRow {
  std::string model_id;
  std::string attack;  // normal | stego | patch | noise | ...
  double ba = 0.0;     // percent
  std::optional<double> asr;
  std::optional<double> bac;
  std::optional<double> psnr_mean;
  std::optional<double> psnr_min;
  std::optional<int> psnr_infinite;
  std::optional<double> msssim_mean;
  std::optional<double> msssim_min;
  int sample_count = 0;
  int stealth_pairs = 0;
  std::string config_digest;
  std::map<std::string, std::string> extra;  // recorded settings (MAX, K, window, ...)
};

struct ReportTables {
  std::string human_text;  // aligned columns + Average row
  std::string csv;         // machine, fixed column order
  std::string jsonl;       // one row per line + average record
};

// Validates schema (digests present, BAC identity against the normal row,
// metric ranges), fills derivable BAC values, and renders all three forms.
// Throws InconsistentSchema.
ReportTables build_report(std::vector<AttackRunRow> runs);

std::string row_to_jsonl(const AttackRunRow& row);
AttackRunRow row_from_jsonl(const std::string& line);

}  // namespace odm::eval
