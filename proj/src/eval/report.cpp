#include "odm/eval/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "nlohmann/json.hpp"
#include "odm/errors.hpp"

namespace odm::eval {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string fmt(double v, int decimals, bool sign = false) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[48];
  std::snprintf(buf, sizeof(buf), sign ? "%+.*f" : "%.*f", decimals, v);
  return buf;
}

std::string opt_fmt(const std::optional<double>& v, int decimals, bool sign = false) {
  return v ? fmt(*v, decimals, sign) : "-";
}

struct Avg {
  double sum = 0.0;
  int n = 0;
  void add(double v) {
    if (std::isfinite(v)) {
      sum += v;
      ++n;
    }
  }
  std::optional<double> get() const {
    return n ? std::optional<double>(sum / n) : std::nullopt;
  }
};

}  // namespace

std::string row_to_jsonl(const AttackRunRow& row) {
  ordered_json j;
  j["model_id"] = row.model_id;
  j["attack"] = row.attack;
  j["ba"] = row.ba;
  if (row.asr) j["asr"] = *row.asr;
  if (row.bac) j["bac"] = *row.bac;
  if (row.psnr_mean) j["psnr_mean"] = *row.psnr_mean;
  if (row.psnr_min) j["psnr_min"] = *row.psnr_min;
  if (row.psnr_infinite) j["psnr_infinite"] = *row.psnr_infinite;
  if (row.msssim_mean) j["msssim_mean"] = *row.msssim_mean;
  if (row.msssim_min) j["msssim_min"] = *row.msssim_min;
  j["sample_count"] = row.sample_count;
  j["stealth_pairs"] = row.stealth_pairs;
  j["config_digest"] = row.config_digest;
  j["extra"] = row.extra;
  return j.dump();
}

AttackRunRow row_from_jsonl(const std::string& line) {
  const auto j = json::parse(line);
  AttackRunRow row;
  row.model_id = j.at("model_id").get<std::string>();
  row.attack = j.at("attack").get<std::string>();
  row.ba = j.at("ba").get<double>();
  if (j.contains("asr")) row.asr = j.at("asr").get<double>();
  if (j.contains("bac")) row.bac = j.at("bac").get<double>();
  if (j.contains("psnr_mean")) row.psnr_mean = j.at("psnr_mean").get<double>();
  if (j.contains("psnr_min")) row.psnr_min = j.at("psnr_min").get<double>();
  if (j.contains("psnr_infinite")) row.psnr_infinite = j.at("psnr_infinite").get<int>();
  if (j.contains("msssim_mean")) row.msssim_mean = j.at("msssim_mean").get<double>();
  if (j.contains("msssim_min")) row.msssim_min = j.at("msssim_min").get<double>();
  row.sample_count = j.at("sample_count").get<int>();
  row.stealth_pairs = j.at("stealth_pairs").get<int>();
  row.config_digest = j.at("config_digest").get<std::string>();
  if (j.contains("extra")) {
    row.extra = j.at("extra").get<std::map<std::string, std::string>>();
  }
  return row;
}

ReportTables build_report(std::vector<AttackRunRow> runs) {
  if (runs.empty()) throw InconsistentSchema("report needs at least one run");

  std::map<std::string, double> normal_ba;  // model -> clean baseline
  for (const auto& row : runs) {
    if (row.model_id.empty()) throw InconsistentSchema("run without model id");
    if (row.attack.empty()) throw InconsistentSchema("run without attack kind");
    if (row.config_digest.empty()) {
      throw InconsistentSchema("run " + row.model_id + "/" + row.attack +
                               " carries no config digest");
    }
    if (row.ba < 0.0 || row.ba > 100.0) {
      throw InconsistentSchema("BA outside [0,100] for " + row.model_id + "/" + row.attack);
    }
    if (row.asr && (*row.asr < 0.0 || *row.asr > 100.0)) {
      throw InconsistentSchema("ASR outside [0,100] for " + row.model_id + "/" + row.attack);
    }
    if (row.msssim_mean && (*row.msssim_mean < 0.0 || *row.msssim_mean > 1.0)) {
      throw InconsistentSchema("MS-SSIM outside [0,1] for " + row.model_id + "/" + row.attack);
    }
    if (row.attack == "normal") normal_ba[row.model_id] = row.ba;
  }

  for (auto& row : runs) {
    if (row.attack == "normal") continue;
    const auto it = normal_ba.find(row.model_id);
    if (it == normal_ba.end()) continue;  // BAC not derivable, left as provided
    const double derived = row.ba - it->second;
    if (row.bac) {
      if (std::abs(*row.bac - derived) > 1e-9) {
        throw InconsistentSchema("BAC does not equal BA_backdoor - BA_normal for " +
                                 row.model_id + "/" + row.attack);
      }
    } else {
      row.bac = derived;
    }
  }

  // Human table.
  const std::vector<std::string> header = {"Model",     "Attack", "BA (%)",
                                           "ASR (%)",   "BAC (%)", "PSNR (dB)",
                                           "MS-SSIM"};
  std::vector<std::vector<std::string>> cells;
  cells.push_back(header);
  Avg avg_ba, avg_asr, avg_bac, avg_psnr, avg_ms;
  for (const auto& row : runs) {
    avg_ba.add(row.ba);
    if (row.asr) avg_asr.add(*row.asr);
    if (row.bac) avg_bac.add(*row.bac);
    if (row.psnr_mean) avg_psnr.add(*row.psnr_mean);
    if (row.msssim_mean) avg_ms.add(*row.msssim_mean);
    cells.push_back({row.model_id, row.attack, fmt(row.ba, 2), opt_fmt(row.asr, 2),
                     opt_fmt(row.bac, 2, true), opt_fmt(row.psnr_mean, 2),
                     opt_fmt(row.msssim_mean, 3)});
  }
  cells.push_back({"Average", "", fmt(avg_ba.get().value_or(0.0), 2),
                   opt_fmt(avg_asr.get(), 2), opt_fmt(avg_bac.get(), 2, true),
                   opt_fmt(avg_psnr.get(), 2), opt_fmt(avg_ms.get(), 3)});

  std::vector<std::size_t> widths(header.size(), 0);
  for (const auto& line : cells) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      widths[i] = std::max(widths[i], line[i].size());
    }
  }
  std::string human;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    std::string line;
    for (std::size_t i = 0; i < cells[r].size(); ++i) {
      std::string cell = cells[r][i];
      cell.resize(widths[i], ' ');
      line += cell;
      if (i + 1 < cells[r].size()) line += "  ";
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    human += line + "\n";
    if (r == 0) {
      std::string rule;
      for (std::size_t i = 0; i < widths.size(); ++i) {
        rule += std::string(widths[i], '-');
        if (i + 1 < widths.size()) rule += "  ";
      }
      human += rule + "\n";
    }
  }

  // CSV (machine; fixed column order).
  std::string csv = "model_id,attack,ba,asr,bac,psnr_mean,msssim_mean,sample_count,"
                    "stealth_pairs,config_digest\n";
  auto csv_opt = [](const std::optional<double>& v) {
    return v ? fmt(*v, 6) : std::string("");
  };
  for (const auto& row : runs) {
    csv += row.model_id + "," + row.attack + "," + fmt(row.ba, 6) + "," + csv_opt(row.asr) +
           "," + csv_opt(row.bac) + "," + csv_opt(row.psnr_mean) + "," +
           csv_opt(row.msssim_mean) + "," + std::to_string(row.sample_count) + "," +
           std::to_string(row.stealth_pairs) + "," + row.config_digest + "\n";
  }
  csv += "Average,," + fmt(avg_ba.get().value_or(0.0), 6) + "," + csv_opt(avg_asr.get()) + "," +
         csv_opt(avg_bac.get()) + "," + csv_opt(avg_psnr.get()) + "," + csv_opt(avg_ms.get()) +
         ",,,\n";

  // JSONL: rows then the average record.
  std::string jsonl;
  for (const auto& row : runs) jsonl += row_to_jsonl(row) + "\n";
  {
    ordered_json j;
    j["model_id"] = "Average";
    j["attack"] = "";
    j["ba"] = avg_ba.get().value_or(0.0);
    if (avg_asr.get()) j["asr"] = *avg_asr.get();
    if (avg_bac.get()) j["bac"] = *avg_bac.get();
    if (avg_psnr.get()) j["psnr_mean"] = *avg_psnr.get();
    if (avg_ms.get()) j["msssim_mean"] = *avg_ms.get();
    jsonl += j.dump() + "\n";
  }

  return ReportTables{human, csv, jsonl};
}

}  // namespace odm::eval
