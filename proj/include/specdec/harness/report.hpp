#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "specdec/error.hpp"
#include "specdec/harness/config.hpp"
#include "specdec/harness/matrix.hpp"

namespace specdec::harness {

enum class ReportFormat { kCsv, kJson };

inline ReportFormat parse_report_format(const std::string& s) {
  if (s == "csv") return ReportFormat::kCsv;
  if (s == "json") return ReportFormat::kJson;
  throw InputError("unknown report format '" + s + "' (expected csv or json)");
}

inline constexpr const char* kReportColumns =
    "domain,lambda,tau,branch,depth,budget,prompts,cycles,emitted_tokens,gamma,kl_estimate,draft_calls,"
    "draft_calls_per_cycle,tree_nodes_per_cycle,target_passes,target_context_evals,target_tree_contexts,"
    "predicted_speedup,losslessness_verified";

inline std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  return {
      {"corpus_path", c.corpus_path},
      {"ood_corpus_path", c.ood_corpus_path},
      {"prompt_set_path", c.prompt_set_path},
      {"ngram_order_target", c.ngram_order_target},
      {"ngram_order_draft", c.ngram_order_draft},
      {"smoothing_target", c.smoothing_target},
      {"smoothing_draft", c.smoothing_draft},
      {"lambda_grid", c.lambda_grid},
      {"tau_grid", c.tau_grid},
      {"branch_grid", c.branch_grid},
      {"depth_grid", c.depth_grid},
      {"budget_grid", c.budget_grid},
      {"prompt_count", c.prompt_count},
      {"prompt_length", c.prompt_length},
      {"probe_count", c.probe_count},
      {"probe_length", c.probe_length},
      {"holdout_fraction", c.holdout_fraction},
      {"max_tokens", c.max_tokens},
      {"seed", c.seed},
      {"kl_direction", to_string(c.kl_direction)},
      {"cost_draft_call", c.cost.draft_call},
      {"cost_target_batch", c.cost.target_batch},
  };
}

inline nlohmann::json record_to_json(const RunRecord& r) {
  std::vector<std::uint64_t> histogram;
  for (auto a : r.stats.per_cycle_acceptance) {
    if (a >= histogram.size()) histogram.resize(a + 1, 0);
    ++histogram[a];
  }
  return {
      {"domain", r.cell.domain},
      {"lambda", r.cell.lambda},
      {"tau", r.cell.policy.entropy_threshold},
      {"branch", r.cell.policy.max_branch},
      {"depth", r.cell.policy.max_depth},
      {"budget", r.cell.policy.node_budget},
      {"prompts", r.prompts},
      {"cycles", r.stats.cycles},
      {"emitted_tokens", r.stats.emitted_tokens},
      {"gamma", r.stats.gamma()},
      {"kl_estimate", r.kl_estimate},
      {"draft_calls", r.stats.draft_calls},
      {"tree_nodes", r.stats.tree_nodes},
      {"target_passes", r.stats.target_passes},
      {"target_context_evals", r.stats.target_context_evals},
      {"target_tree_contexts", r.stats.target_tree_contexts},
      {"acceptance_histogram", histogram},
      {"predicted_speedup", r.predicted_speedup},
      {"losslessness_verified", r.losslessness_verified},
  };
}

/// Inverse of record_to_json. Per-cycle order is not stored, so cycles come
/// back grouped by acceptance length; every aggregate is preserved.
inline RunRecord record_from_json(const nlohmann::json& j) {
  try {
    RunRecord r;
    r.cell.domain = j.at("domain").get<std::string>();
    r.cell.lambda = j.at("lambda").get<double>();
    r.cell.policy = BranchPolicy{j.at("tau").get<double>(), j.at("branch").get<int>(), j.at("depth").get<int>(),
                                 j.at("budget").get<int>()};
    r.prompts = j.at("prompts").get<std::size_t>();
    r.stats.cycles = j.at("cycles").get<std::uint64_t>();
    r.stats.emitted_tokens = j.at("emitted_tokens").get<std::uint64_t>();
    r.stats.draft_calls = j.at("draft_calls").get<std::uint64_t>();
    r.stats.tree_nodes = j.at("tree_nodes").get<std::uint64_t>();
    r.stats.target_passes = j.at("target_passes").get<std::uint64_t>();
    r.stats.target_context_evals = j.at("target_context_evals").get<std::uint64_t>();
    r.stats.target_tree_contexts = j.at("target_tree_contexts").get<std::uint64_t>();
    const auto histogram = j.at("acceptance_histogram").get<std::vector<std::uint64_t>>();
    for (std::size_t len = 0; len < histogram.size(); ++len)
      r.stats.per_cycle_acceptance.insert(r.stats.per_cycle_acceptance.end(), histogram[len],
                                          static_cast<std::uint32_t>(len));
    r.kl_estimate = j.at("kl_estimate").get<double>();
    r.predicted_speedup = j.at("predicted_speedup").get<double>();
    r.losslessness_verified = j.at("losslessness_verified").get<bool>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed run record: ") + e.what());
  }
}

inline nlohmann::json report_to_json(const nlohmann::json& config_echo, const std::vector<RunRecord>& records) {
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& r : records) recs.push_back(record_to_json(r));
  return {{"format", "specdec-report"}, {"version", 1}, {"config", config_echo}, {"records", recs}};
}

struct LoadedReport {
  nlohmann::json config;
  std::vector<RunRecord> records;
};

inline LoadedReport load_report(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError("'" + path + "' is not valid JSON: " + e.what());
  }
  if (!j.is_object() || j.value("format", "") != "specdec-report" || j.value("version", 0) != 1)
    throw InputError("'" + path + "' is not a specdec-report v1 file");
  LoadedReport out;
  out.config = j.at("config");
  for (const auto& r : j.at("records")) out.records.push_back(record_from_json(r));
  return out;
}

/// One row per record, columns as in kReportColumns, preceded by a
/// versioned comment line.
inline std::string records_csv(const std::vector<RunRecord>& records) {
  std::ostringstream os;
  os << "# specdec-report v1 columns=" << kReportColumns << "\n" << kReportColumns << "\n";
  for (const auto& r : records) {
    const auto& s = r.stats;
    os << r.cell.domain << ',' << format_real(r.cell.lambda) << ',' << format_real(r.cell.policy.entropy_threshold)
       << ',' << r.cell.policy.max_branch << ',' << r.cell.policy.max_depth << ',' << r.cell.policy.node_budget << ','
       << r.prompts << ',' << s.cycles << ',' << s.emitted_tokens << ',' << format_real(s.gamma()) << ','
       << format_real(r.kl_estimate) << ',' << s.draft_calls << ',' << format_real(s.draft_calls_per_cycle()) << ','
       << format_real(s.tree_nodes_per_cycle()) << ',' << s.target_passes << ',' << s.target_context_evals << ','
       << s.target_tree_contexts << ',' << format_real(r.predicted_speedup) << ','
       << (r.losslessness_verified ? "true" : "false") << "\n";
  }
  return os.str();
}

/// (kl_estimate, gamma) pairs ordered by lambda; ties keep record order.
inline std::string scatter_csv(const std::vector<RunRecord>& records) {
  std::vector<const RunRecord*> sorted;
  for (const auto& r : records) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const RunRecord* a, const RunRecord* b) { return a->cell.lambda < b->cell.lambda; });
  std::ostringstream os;
  os << "# specdec-scatter v1 rows ordered by lambda\nkl_estimate,gamma\n";
  for (const RunRecord* r : sorted) os << format_real(r->kl_estimate) << ',' << format_real(r->stats.gamma()) << "\n";
  return os.str();
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write '" + path.string() + "'");
  os << content;
  if (!os) throw IoError("failed writing '" + path.string() + "'");
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw IoError("cannot create output directory '" + dir.string() + "'");
}

}  // namespace detail

/// Writes report.csv and kl_gamma.csv (csv) or report.json (json) into
/// `out_dir`. Only records whose output was verified against the baseline
/// are published. Returns the paths written.
inline std::vector<std::filesystem::path> emit_report(const std::vector<RunRecord>& records,
                                                      const nlohmann::json& config_echo,
                                                      const std::filesystem::path& out_dir, ReportFormat format) {
  if (records.empty()) throw InputError("emit_report: no records");
  for (const auto& r : records)
    if (!r.losslessness_verified)
      throw InputError("emit_report: record [" + r.cell.describe() + "] was not verified lossless");
  detail::ensure_dir(out_dir);
  std::vector<std::filesystem::path> written;
  if (format == ReportFormat::kCsv) {
    written.push_back(out_dir / "report.csv");
    detail::write_file(written.back(), records_csv(records));
    written.push_back(out_dir / "kl_gamma.csv");
    detail::write_file(written.back(), scatter_csv(records));
  } else {
    written.push_back(out_dir / "report.json");
    detail::write_file(written.back(), report_to_json(config_echo, records).dump(2) + "\n");
  }
  return written;
}

/// Per-cell wall-clock times. Kept apart from the reports because timings
/// vary between runs.
inline void write_timing(const std::vector<RunRecord>& records, const std::filesystem::path& out_dir) {
  detail::ensure_dir(out_dir);
  std::ostringstream os;
  os << "domain,lambda,tau,branch,depth,budget,wall_clock_ms\n";
  for (const auto& r : records)
    os << r.cell.domain << ',' << format_real(r.cell.lambda) << ',' << format_real(r.cell.policy.entropy_threshold)
       << ',' << r.cell.policy.max_branch << ',' << r.cell.policy.max_depth << ',' << r.cell.policy.node_budget << ','
       << format_real(r.wall_clock_ms) << "\n";
  detail::write_file(out_dir / "timing.csv", os.str());
}

}  // namespace specdec::harness
