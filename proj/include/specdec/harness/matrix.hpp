#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <memory>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "specdec/error.hpp"
#include "specdec/harness/config.hpp"
#include "specdec/harness/corpus.hpp"
#include "specdec/language_model.hpp"
#include "specdec/metrics.hpp"
#include "specdec/ngram.hpp"
#include "specdec/verifier.hpp"

namespace specdec::harness {

inline constexpr std::size_t kMinCorpusChars = 100;

struct CellKey {
  std::string domain;  // "in" or "ood"
  double lambda = 0.0;
  BranchPolicy policy;

  std::string describe() const {
    std::ostringstream os;
    os << "domain=" << domain << " lambda=" << lambda << " tau=" << policy.entropy_threshold
       << " b=" << policy.max_branch << " d=" << policy.max_depth << " n=" << policy.node_budget;
    return os.str();
  }
};

struct RunRecord {
  CellKey cell;
  std::size_t prompts = 0;
  DecodeStats stats;
  double kl_estimate = 0.0;
  double predicted_speedup = 0.0;
  double wall_clock_ms = 0.0;  // informational only; kept out of the reports
  bool losslessness_verified = false;
};

/// Prompts and KL probes for one evaluation domain.
struct DomainSet {
  std::string name;
  std::vector<Context> prompts;
  std::vector<Context> probes;
};

/// Everything a matrix run needs that does not depend on the cell.
struct PreparedExperiment {
  Corpus corpus;
  std::shared_ptr<const NGramModel> target;
  std::shared_ptr<const NGramModel> draft_base;
  std::vector<DomainSet> domains;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// `count` random spans of `length` tokens from `region`, each prefixed by bos.
inline std::vector<Context> draw_spans(const Vocabulary& vocab, std::span<const TokenId> region, int count,
                                       int length, std::mt19937_64& rng, const std::string& what) {
  const auto len = static_cast<std::size_t>(length);
  if (region.size() < len)
    throw InputError(what + ": region of " + std::to_string(region.size()) + " tokens is shorter than span length " +
                     std::to_string(length));
  const std::uint64_t positions = region.size() - len + 1;
  std::vector<Context> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const auto start = static_cast<std::size_t>(rng() % positions);
    out.push_back(Context::from_body(vocab, region.subspan(start, len)));
  }
  return out;
}

inline DomainSet make_domain(const std::string& name, const Vocabulary& vocab, std::span<const TokenId> heldout,
                             const ExperimentConfig& cfg, std::uint64_t stream) {
  // First half of the held-out text feeds prompts, second half KL probes.
  const std::size_t half = heldout.size() / 2;
  std::mt19937_64 rng(splitmix64(cfg.seed ^ splitmix64(stream)));
  DomainSet d;
  d.name = name;
  d.prompts = draw_spans(vocab, heldout.first(half), cfg.prompt_count, cfg.prompt_length, rng, name + " prompts");
  d.probes = draw_spans(vocab, heldout.subspan(half), cfg.probe_count, cfg.probe_length, rng, name + " probes");
  return d;
}

}  // namespace detail

/// Loads corpora, trains target and draft-base models on the in-domain
/// training split, and draws prompts and probes for every domain.
inline PreparedExperiment prepare_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<std::string> paths{cfg.corpus_path};
  if (!cfg.ood_corpus_path.empty()) paths.push_back(cfg.ood_corpus_path);
  PreparedExperiment exp;
  exp.corpus = ingest_corpora(paths, kMinCorpusChars);
  const Vocabulary& vocab = *exp.corpus.vocab;

  std::span<const TokenId> main_seq = exp.corpus.sequences[0];
  const auto train_len = static_cast<std::size_t>(static_cast<double>(main_seq.size()) * (1.0 - cfg.holdout_fraction));
  const auto train = main_seq.first(train_len);
  exp.target = train_ngram(exp.corpus.vocab, train, cfg.ngram_order_target, cfg.smoothing_target);
  exp.draft_base = train_ngram(exp.corpus.vocab, train, cfg.ngram_order_draft, cfg.smoothing_draft);

  DomainSet in = detail::make_domain("in", vocab, main_seq.subspan(train_len), cfg, 1);
  if (!cfg.prompt_set_path.empty()) {
    in.prompts.clear();
    std::istringstream lines(read_text_file(cfg.prompt_set_path));
    std::string line;
    while (std::getline(lines, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const auto body = encode_text(vocab, line);
      in.prompts.push_back(Context::from_body(vocab, body));
    }
    if (in.prompts.empty()) throw InputError("prompt set '" + cfg.prompt_set_path + "' has no prompts");
  }
  exp.domains.push_back(std::move(in));
  if (!cfg.ood_corpus_path.empty())
    exp.domains.push_back(detail::make_domain("ood", vocab, exp.corpus.sequences[1], cfg, 2));
  return exp;
}

/// Runs every (domain, lambda, policy) cell: speculative decoding of every
/// prompt, checked token-for-token against target-only greedy decoding.
///
/// Cells run on worker threads; each cell decodes its prompts in order.
/// Records come back in (domain, lambda, policy grid) order, and a
/// losslessness violation raises LosslessnessError naming the seed, cell,
/// and prompt.
inline std::vector<RunRecord> run_matrix(const ExperimentConfig& cfg, const PreparedExperiment& exp) {
  const auto policies = cfg.policies();

  struct Cell {
    std::size_t domain;
    std::size_t draft;
    BranchPolicy policy;
  };
  std::vector<std::shared_ptr<const InterpolatedModel>> drafts;
  for (double lambda : cfg.lambda_grid) drafts.push_back(distill_interpolate(exp.target, exp.draft_base, lambda));

  std::vector<Cell> cells;
  for (std::size_t d = 0; d < exp.domains.size(); ++d)
    for (std::size_t l = 0; l < drafts.size(); ++l)
      for (const auto& p : policies) cells.push_back({d, l, p});

  // Baselines and KL depend only on (domain) and (domain, lambda).
  std::vector<std::vector<std::vector<TokenId>>> baselines(exp.domains.size());
  std::vector<std::vector<double>> kl(exp.domains.size(), std::vector<double>(drafts.size()));
  for (std::size_t d = 0; d < exp.domains.size(); ++d) {
    for (const auto& prompt : exp.domains[d].prompts)
      baselines[d].push_back(greedy_decode(*exp.target, prompt, cfg.max_tokens));
    for (std::size_t l = 0; l < drafts.size(); ++l)
      kl[d][l] = estimate_kl(*drafts[l], *exp.target, exp.domains[d].probes, cfg.kl_direction);
  }

  std::vector<RunRecord> records(cells.size());
  std::vector<std::exception_ptr> errors(cells.size());
  auto run_cell = [&](std::size_t i) {
    const Cell& c = cells[i];
    const DomainSet& dom = exp.domains[c.domain];
    RunRecord& rec = records[i];
    rec.cell = CellKey{dom.name, cfg.lambda_grid[c.draft], c.policy};
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t p = 0; p < dom.prompts.size(); ++p) {
      DecodeResult r = speculative_decode(*drafts[c.draft], *exp.target, dom.prompts[p], cfg.max_tokens, c.policy);
      if (r.tokens != baselines[c.domain][p])
        throw LosslessnessError("losslessness violation: seed=" + std::to_string(cfg.seed) + " cell=[" +
                                rec.cell.describe() + "] prompt=" + std::to_string(p));
      rec.stats += r.stats;
    }
    rec.wall_clock_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    rec.prompts = dom.prompts.size();
    rec.kl_estimate = kl[c.domain][c.draft];
    rec.predicted_speedup = predicted_speedup(rec.stats.gamma(), cfg.cost, rec.stats.draft_calls_per_cycle());
    rec.losslessness_verified = true;
  };

  std::size_t workers = cfg.threads > 0 ? static_cast<std::size_t>(cfg.threads)
                                        : std::max<std::size_t>(1, std::thread::hardware_concurrency());
  workers = std::min(workers, cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        run_cell(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return records;
}

inline std::vector<RunRecord> run_matrix(const ExperimentConfig& cfg) { return run_matrix(cfg, prepare_experiment(cfg)); }

}  // namespace specdec::harness
