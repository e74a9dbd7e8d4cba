#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "specdec/error.hpp"
#include "specdec/harness/corpus.hpp"
#include "specdec/metrics.hpp"
#include "specdec/spec_tree.hpp"

namespace specdec::harness {

/// One benchmark matrix: every lambda in `lambda_grid` crossed with every
/// policy in the (tau, branch, depth, budget) grids, for the in-domain
/// corpus and, when `ood_corpus_path` is set, the out-of-domain one.
/// See configs/default.cfg for the file format.
struct ExperimentConfig {
  std::string corpus_path;
  std::string ood_corpus_path;    // optional
  std::string prompt_set_path;    // optional; one prompt per line
  int ngram_order_target = 5;
  int ngram_order_draft = 2;
  double smoothing_target = 0.01;
  double smoothing_draft = 0.5;
  std::vector<double> lambda_grid{0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<double> tau_grid{1.0};
  std::vector<int> branch_grid{4};
  std::vector<int> depth_grid{6};
  std::vector<int> budget_grid{12};
  int prompt_count = 200;
  int prompt_length = 20;
  int probe_count = 100;
  int probe_length = 20;
  double holdout_fraction = 0.2;
  int max_tokens = 48;
  std::uint64_t seed = 1;
  KlDirection kl_direction = KlDirection::kTargetDraft;
  CostModel cost;
  int threads = 0;  // 0 = hardware concurrency

  void validate() const {
    auto need = [](bool ok, const std::string& what) {
      if (!ok) throw InputError("config: " + what);
    };
    need(!corpus_path.empty(), "corpus_path is required");
    need(ngram_order_target >= 1 && ngram_order_draft >= 1, "n-gram orders must be >= 1");
    need(smoothing_target > 0.0 && smoothing_draft > 0.0, "smoothing values must be > 0");
    need(!lambda_grid.empty() && !tau_grid.empty() && !branch_grid.empty() && !depth_grid.empty() &&
             !budget_grid.empty(),
         "every grid must be non-empty");
    for (double l : lambda_grid) need(l >= 0.0 && l <= 1.0, "lambda values must lie in [0, 1]");
    for (double t : tau_grid) need(t >= 0.0, "tau values must be >= 0");
    for (int b : branch_grid)
      for (int n : budget_grid) {
        need(b >= 1 && n >= 1, "branch and budget values must be >= 1");
        need(b <= n, "every branch value must be <= every budget value");
      }
    for (int d : depth_grid) need(d >= 1, "depth values must be >= 1");
    need(prompt_count >= 1 && prompt_length >= 1, "prompt_count and prompt_length must be >= 1");
    need(probe_count >= 1 && probe_length >= 1, "probe_count and probe_length must be >= 1");
    need(holdout_fraction > 0.0 && holdout_fraction < 1.0, "holdout_fraction must lie in (0, 1)");
    need(max_tokens >= 1, "max_tokens must be >= 1");
    need(threads >= 0, "threads must be >= 0");
    cost.validate();
  }

  /// Every policy in the grid product, in grid order.
  std::vector<BranchPolicy> policies() const {
    std::vector<BranchPolicy> out;
    for (double t : tau_grid)
      for (int b : branch_grid)
        for (int d : depth_grid)
          for (int n : budget_grid) out.push_back(BranchPolicy{t, b, d, n});
    return out;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  std::istringstream is(text);
  T value{};
  if (!(is >> value) || !(is >> std::ws).eof()) throw InputError("config: bad value '" + text + "' for " + key);
  return value;
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<T>(key, trim(item)));
  if (out.empty()) throw InputError("config: empty list for " + key);
  return out;
}

}  // namespace detail

/// Parses `key = value` lines. '#' starts a comment, lists are
/// comma-separated, unknown keys are rejected. Relative paths are resolved
/// against `base_dir`.
inline ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {}) {
  ExperimentConfig cfg;
  auto path_value = [&](const std::string& v) {
    std::filesystem::path p(v);
    return (p.is_relative() && !base_dir.empty() ? base_dir / p : p).lexically_normal().string();
  };
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters{
      {"corpus_path", [&](auto&, auto& v) { cfg.corpus_path = path_value(v); }},
      {"ood_corpus_path", [&](auto&, auto& v) { cfg.ood_corpus_path = v.empty() ? "" : path_value(v); }},
      {"prompt_set_path", [&](auto&, auto& v) { cfg.prompt_set_path = v.empty() ? "" : path_value(v); }},
      {"ngram_order_target", [&](auto& k, auto& v) { cfg.ngram_order_target = detail::parse_number<int>(k, v); }},
      {"ngram_order_draft", [&](auto& k, auto& v) { cfg.ngram_order_draft = detail::parse_number<int>(k, v); }},
      {"smoothing_target", [&](auto& k, auto& v) { cfg.smoothing_target = detail::parse_number<double>(k, v); }},
      {"smoothing_draft", [&](auto& k, auto& v) { cfg.smoothing_draft = detail::parse_number<double>(k, v); }},
      {"lambda_grid", [&](auto& k, auto& v) { cfg.lambda_grid = detail::parse_list<double>(k, v); }},
      {"tau_grid", [&](auto& k, auto& v) { cfg.tau_grid = detail::parse_list<double>(k, v); }},
      {"branch_grid", [&](auto& k, auto& v) { cfg.branch_grid = detail::parse_list<int>(k, v); }},
      {"depth_grid", [&](auto& k, auto& v) { cfg.depth_grid = detail::parse_list<int>(k, v); }},
      {"budget_grid", [&](auto& k, auto& v) { cfg.budget_grid = detail::parse_list<int>(k, v); }},
      {"prompt_count", [&](auto& k, auto& v) { cfg.prompt_count = detail::parse_number<int>(k, v); }},
      {"prompt_length", [&](auto& k, auto& v) { cfg.prompt_length = detail::parse_number<int>(k, v); }},
      {"probe_count", [&](auto& k, auto& v) { cfg.probe_count = detail::parse_number<int>(k, v); }},
      {"probe_length", [&](auto& k, auto& v) { cfg.probe_length = detail::parse_number<int>(k, v); }},
      {"holdout_fraction", [&](auto& k, auto& v) { cfg.holdout_fraction = detail::parse_number<double>(k, v); }},
      {"max_tokens", [&](auto& k, auto& v) { cfg.max_tokens = detail::parse_number<int>(k, v); }},
      {"seed", [&](auto& k, auto& v) { cfg.seed = detail::parse_number<std::uint64_t>(k, v); }},
      {"kl_direction", [&](auto&, auto& v) { cfg.kl_direction = parse_kl_direction(v); }},
      {"cost_draft_call", [&](auto& k, auto& v) { cfg.cost.draft_call = detail::parse_number<double>(k, v); }},
      {"cost_target_batch", [&](auto& k, auto& v) { cfg.cost.target_batch = detail::parse_number<double>(k, v); }},
      {"threads", [&](auto& k, auto& v) { cfg.threads = detail::parse_number<int>(k, v); }},
  };
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InputError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    auto it = setters.find(key);
    if (it == setters.end()) throw InputError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    it->second(key, value);
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  const std::string text = read_text_file(path);
  std::istringstream in(text);
  return parse_config(in, std::filesystem::path(path).parent_path());
}

}  // namespace specdec::harness
