#pragma once

#include <algorithm>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "roixai/harness/record.hpp"

namespace roixai {

inline constexpr const char* kMissingCell = "--";

/// Stable report order: architecture, then label, then digest.
inline std::vector<RunRecord> report_order(std::vector<RunRecord> runs) {
  std::stable_sort(runs.begin(), runs.end(), [](const RunRecord& a, const RunRecord& b) {
    const auto ka = static_cast<int>(a.config.model.architecture), kb = static_cast<int>(b.config.model.architecture);
    if (ka != kb) return ka < kb;
    if (a.config.label() != b.config.label()) return a.config.label() < b.config.label();
    return a.digest < b.digest;
  });
  return runs;
}

namespace detail {
inline std::string cell(const std::optional<double>& v, int precision) { return v ? format_metric(*v, precision) : kMissingCell; }

inline std::string md_escape(const std::string& s) {
  std::string out;
  for (char c : s) out += c == '|' ? std::string("\\|") : std::string(1, c);
  return out;
}
}  // namespace detail

/// Markdown table `Model | AUC | Accuracy | PSNR | SSIM` from each run's
/// final evaluation; cells that do not apply read "--".
inline std::string render_table(const std::vector<RunRecord>& runs) {
  std::ostringstream os;
  os << "| Model | AUC | Accuracy | PSNR | SSIM |\n";
  os << "|---|---|---|---|---|\n";
  for (const auto& r : report_order(runs)) {
    const MetricsReport empty;
    const MetricsReport& m = r.final_metrics() ? *r.final_metrics() : empty;
    os << "| " << detail::md_escape(r.config.label()) << (r.status == "ok" ? "" : " (failed)") << " | "
       << detail::cell(m.auc, 4) << " | " << detail::cell(m.accuracy, 4) << " | " << detail::cell(m.psnr_db, 2) << " | "
       << detail::cell(m.ssim, 5) << " |\n";
  }
  return os.str();
}

/// Every run.json below `dir`, in path order.
inline std::vector<RunRecord> collect_runs(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw std::runtime_error("'" + dir.string() + "' is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() == "run.json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<RunRecord> runs;
  for (const auto& f : files) {
    runs.push_back(run_record_from_json(read_json_file(f)));
    runs.back().location = f.parent_path();
  }
  return runs;
}

}  // namespace roixai
