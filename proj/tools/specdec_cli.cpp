// specdec: train surrogate models, decode a prompt speculatively, run the
// benchmark matrix, and convert reports.
//
// Exit codes: 0 success, 1 usage error, 2 I/O error, 3 losslessness violation.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "specdec/harness/config.hpp"
#include "specdec/harness/corpus.hpp"
#include "specdec/harness/matrix.hpp"
#include "specdec/harness/report.hpp"
#include "specdec/specdec.hpp"

namespace {

namespace fs = std::filesystem;
using namespace specdec;

enum ExitCode { kOk = 0, kUsage = 1, kIo = 2, kLossless = 3 };

struct TrainArgs {
  std::string corpus;
  std::string config;
  std::string out;
  int target_order = -1;
  int draft_order = -1;
};

struct DecodeArgs {
  std::string models;
  std::string prompt;
  double lambda = 0.5;
  BranchPolicy policy{1.0, 4, 6, 12};
  int max_tokens = 48;
};

struct BenchArgs {
  std::string config;
  std::string out;
  std::string corpus;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int max_tokens = 0;
  int threads = -1;
};

struct ReportArgs {
  std::string in;
  std::string out;
  std::string format = "csv";
};

int run_train(const TrainArgs& a) {
  harness::ExperimentConfig cfg;
  if (!a.config.empty()) cfg = harness::load_config(a.config);
  if (a.target_order > 0) cfg.ngram_order_target = a.target_order;
  if (a.draft_order > 0) cfg.ngram_order_draft = a.draft_order;
  const auto corpus = harness::ingest_corpus(a.corpus, harness::kMinCorpusChars);
  const auto& seq = corpus.sequences.front();
  const auto target = train_ngram(corpus.vocab, seq, cfg.ngram_order_target, cfg.smoothing_target);
  const auto draft = train_ngram(corpus.vocab, seq, cfg.ngram_order_draft, cfg.smoothing_draft);
  harness::detail::ensure_dir(a.out);
  target->save_file((fs::path(a.out) / "target.ngram").string());
  draft->save_file((fs::path(a.out) / "draft.ngram").string());
  std::cout << "vocabulary " << corpus.vocab->size() << " tokens, corpus " << seq.size() << " characters\n"
            << "target order " << target->order() << " -> " << (fs::path(a.out) / "target.ngram").string() << "\n"
            << "draft  order " << draft->order() << " -> " << (fs::path(a.out) / "draft.ngram").string() << "\n";
  return kOk;
}

int run_decode(const DecodeArgs& a) {
  const auto target = NGramModel::load_file((fs::path(a.models) / "target.ngram").string());
  const auto base = NGramModel::load_file((fs::path(a.models) / "draft.ngram").string());
  if (!(target->vocabulary() == base->vocabulary())) throw InputError("target and draft vocabularies differ");
  const auto draft = distill_interpolate(target, base, a.lambda);
  const Vocabulary& vocab = target->vocabulary();
  const Context prompt = Context::from_body(vocab, harness::encode_text(vocab, a.prompt));

  const DecodeResult spec = speculative_decode(*draft, *target, prompt, a.max_tokens, a.policy);
  const auto baseline = greedy_decode(*target, prompt, a.max_tokens);
  if (spec.tokens != baseline) {
    std::cerr << "losslessness violation: speculative output differs from greedy baseline\n";
    return kLossless;
  }
  std::vector<TokenId> shown;
  for (TokenId t : spec.tokens)
    if (t != vocab.eos_id()) shown.push_back(t);
  const auto& s = spec.stats;
  std::cout << a.prompt << harness::decode_text(vocab, shown) << "\n";
  std::cout << "tokens=" << s.emitted_tokens << " cycles=" << s.cycles << " gamma=" << harness::format_real(s.gamma())
            << " draft_calls=" << s.draft_calls << " target_context_evals=" << s.target_context_evals
            << " kl_not_estimated lossless=true\n";
  return kOk;
}

int run_bench(const BenchArgs& a) {
  auto cfg = harness::load_config(a.config);
  if (a.seed_set) cfg.seed = a.seed;
  if (!a.corpus.empty()) cfg.corpus_path = a.corpus;
  if (a.max_tokens > 0) cfg.max_tokens = a.max_tokens;
  if (a.threads >= 0) cfg.threads = a.threads;
  const auto records = harness::run_matrix(cfg);
  const auto echo = harness::config_to_json(cfg);
  harness::emit_report(records, echo, a.out, harness::ReportFormat::kJson);
  harness::emit_report(records, echo, a.out, harness::ReportFormat::kCsv);
  harness::write_timing(records, a.out);
  std::printf("%-4s %7s %6s %3s %3s %3s %9s %9s %9s\n", "dom", "lambda", "tau", "b", "d", "n", "kl", "gamma",
              "speedup");
  for (const auto& r : records)
    std::printf("%-4s %7.3f %6.3f %3d %3d %3d %9.4f %9.4f %9.4f\n", r.cell.domain.c_str(), r.cell.lambda,
                r.cell.policy.entropy_threshold, r.cell.policy.max_branch, r.cell.policy.max_depth,
                r.cell.policy.node_budget, r.kl_estimate, r.stats.gamma(), r.predicted_speedup);
  std::cout << records.size() << " cells, all lossless; reports in " << a.out << "\n";
  return kOk;
}

int run_report(const ReportArgs& a) {
  const auto loaded = harness::load_report(a.in);
  for (const auto& p : harness::emit_report(loaded.records, loaded.config, a.out, harness::parse_report_format(a.format)))
    std::cout << p.string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speculative decoding with dynamic draft trees over n-gram surrogate models"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train target and draft-base n-gram models from a corpus");
  train_cmd->add_option("--corpus", train.corpus, "UTF-8 corpus file")->required();
  train_cmd->add_option("--config", train.config, "Config file for orders and smoothing");
  train_cmd->add_option("--out", train.out, "Output directory for target.ngram and draft.ngram")->required();
  train_cmd->add_option("--target-order", train.target_order, "Override target n-gram order");
  train_cmd->add_option("--draft-order", train.draft_order, "Override draft n-gram order");

  DecodeArgs decode;
  auto* decode_cmd = app.add_subcommand("decode", "Decode one prompt speculatively and print tokens and stats");
  decode_cmd->add_option("--models", decode.models, "Directory written by 'train'")->required();
  decode_cmd->add_option("--prompt", decode.prompt, "Prompt text")->required();
  decode_cmd->add_option("--lambda", decode.lambda, "Draft alignment toward the target, in [0, 1]")
      ->capture_default_str();
  decode_cmd->add_option("--tau", decode.policy.entropy_threshold, "Entropy threshold in nats")->capture_default_str();
  decode_cmd->add_option("--branch", decode.policy.max_branch, "Branch width when uncertain")->capture_default_str();
  decode_cmd->add_option("--depth", decode.policy.max_depth, "Maximum tree depth")->capture_default_str();
  decode_cmd->add_option("--budget", decode.policy.node_budget, "Nodes kept after pruning")->capture_default_str();
  decode_cmd->add_option("--max-tokens", decode.max_tokens, "Tokens to generate")->capture_default_str();

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Run the benchmark matrix from a config file");
  bench_cmd->add_option("--config", bench.config, "Experiment config file")->required();
  bench_cmd->add_option("--out", bench.out, "Output directory")->required();
  bench_cmd->add_option("--corpus", bench.corpus, "Override corpus_path");
  bench_cmd->add_option("--max-tokens", bench.max_tokens, "Override max_tokens");
  bench_cmd->add_option("--threads", bench.threads, "Worker threads (0 = all cores)");
  auto* seed_opt = bench_cmd->add_option("--seed", bench.seed, "Override seed");

  ReportArgs report;
  auto* report_cmd = app.add_subcommand("report", "Re-emit a report.json as CSV or JSON");
  report_cmd->add_option("--in", report.in, "report.json written by 'bench'")->required();
  report_cmd->add_option("--out", report.out, "Output directory")->required();
  report_cmd->add_option("--format", report.format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }
  bench.seed_set = seed_opt->count() > 0;

  try {
    if (*train_cmd) return run_train(train);
    if (*decode_cmd) return run_decode(decode);
    if (*bench_cmd) return run_bench(bench);
    if (*report_cmd) return run_report(report);
  } catch (const LosslessnessError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kLossless;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
