#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "specdec/error.hpp"
#include "specdec/language_model.hpp"

namespace specdec {

namespace detail {

struct TokenSeqHash {
  std::size_t operator()(const std::vector<TokenId>& v) const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (TokenId t : v) {
      h ^= static_cast<std::uint32_t>(t);
      h *= 0x100000001b3ULL;
    }
    return static_cast<std::size_t>(h);
  }
};

inline std::string hex_encode(const std::string& s) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * s.size());
  for (unsigned char c : s) {
    out.push_back(kDigits[c >> 4]);
    out.push_back(kDigits[c & 0xf]);
  }
  return out;
}

inline std::string hex_decode(const std::string& s) {
  if (s.size() % 2 != 0) throw InputError("bad hex token '" + s + "'");
  auto nibble = [&](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    throw InputError("bad hex token '" + s + "'");
  };
  std::string out;
  for (std::size_t i = 0; i < s.size(); i += 2)
    out.push_back(static_cast<char>(nibble(s[i]) * 16 + nibble(s[i + 1])));
  return out;
}

}  // namespace detail

/// Additively smoothed n-gram model over a shared vocabulary.
///
/// An order-k model conditions on the last k-1 tokens:
///   P(w | h) = (c(h, w) + alpha) / (c(h) + alpha * V).
/// Histories never seen in training, including contexts shorter than k-1,
/// fall back to the smoothed unigram row. Order 1 is the unigram model.
class NGramModel final : public LanguageModel {
 public:
  using Counts = std::vector<std::uint64_t>;
  using History = std::vector<TokenId>;

  NGramModel(std::shared_ptr<const Vocabulary> vocab, int order, double alpha, Counts unigram,
             std::map<History, Counts> conditional)
      : LanguageModel(std::move(vocab)),
        order_(order),
        alpha_(alpha),
        unigram_counts_(std::move(unigram)),
        conditional_counts_(std::move(conditional)) {
    const std::size_t v = vocabulary().size();
    if (order_ < 1) throw InputError("n-gram order must be >= 1");
    if (!(alpha_ >= 0.0) || !std::isfinite(alpha_)) throw InputError("smoothing alpha must be finite and >= 0");
    if (unigram_counts_.size() != v) throw InputError("unigram counts do not match vocabulary size");
    unigram_row_ = smoothed_row(unigram_counts_);
    rows_.reserve(conditional_counts_.size());
    for (const auto& [history, counts] : conditional_counts_) {
      if (static_cast<int>(history.size()) != order_ - 1) throw InputError("history length does not match order");
      if (counts.size() != v) throw InputError("conditional counts do not match vocabulary size");
      check_token_range(vocabulary(), history);
      rows_.emplace(history, smoothed_row(counts));
    }
  }

  int order() const noexcept { return order_; }
  double smoothing_alpha() const noexcept { return alpha_; }
  const Counts& unigram_counts() const noexcept { return unigram_counts_; }
  const std::map<History, Counts>& conditional_counts() const noexcept { return conditional_counts_; }

  /// Smoothed unigram row used for unseen histories.
  const Distribution& unigram_row() const noexcept { return unigram_row_; }

  /// Writes the versioned text dump described in docs/model_format.md.
  void save(std::ostream& os) const {
    char alpha_buf[64];
    std::snprintf(alpha_buf, sizeof alpha_buf, "%a", alpha_);
    const auto& vocab = vocabulary();
    os << "specdec-ngram v1\n";
    os << "order " << order_ << "\n";
    os << "alpha " << alpha_buf << "\n";
    os << "vocab " << vocab.size() << " " << vocab.bos_id() << " " << vocab.eos_id() << "\n";
    for (const auto& tok : vocab.tokens()) os << detail::hex_encode(tok) << "\n";
    os << "unigram";
    for (auto c : unigram_counts_) os << " " << c;
    os << "\n";
    os << "histories " << conditional_counts_.size() << "\n";
    for (const auto& [history, counts] : conditional_counts_) {
      for (TokenId t : history) os << t << " ";
      os << "|";
      for (std::size_t i = 0; i < counts.size(); ++i)
        if (counts[i] != 0) os << " " << i << ":" << counts[i];
      os << "\n";
    }
    os << "end\n";
  }

  static std::shared_ptr<const NGramModel> load(std::istream& is) {
    auto fail = [](const std::string& what) -> InputError { return InputError("n-gram dump: " + what); };
    std::string line, word;
    if (!std::getline(is, line) || line != "specdec-ngram v1") throw fail("missing 'specdec-ngram v1' header");
    int order = 0;
    std::string alpha_text;
    std::size_t vsize = 0;
    TokenId bos = 0, eos = 0;
    if (!(is >> word >> order) || word != "order") throw fail("expected 'order'");
    if (!(is >> word >> alpha_text) || word != "alpha") throw fail("expected 'alpha'");
    if (!(is >> word >> vsize >> bos >> eos) || word != "vocab") throw fail("expected 'vocab'");
    std::vector<std::string> tokens(vsize);
    for (auto& tok : tokens) {
      std::string hex;
      if (!(is >> hex)) throw fail("truncated vocabulary");
      tok = detail::hex_decode(hex);
    }
    auto vocab = std::make_shared<const Vocabulary>(std::move(tokens), bos, eos);
    if (!(is >> word) || word != "unigram") throw fail("expected 'unigram'");
    Counts unigram(vsize);
    for (auto& c : unigram)
      if (!(is >> c)) throw fail("truncated unigram counts");
    std::size_t n_hist = 0;
    if (!(is >> word >> n_hist) || word != "histories") throw fail("expected 'histories'");
    std::getline(is, line);
    std::map<History, Counts> conditional;
    for (std::size_t h = 0; h < n_hist; ++h) {
      if (!std::getline(is, line)) throw fail("truncated histories");
      const auto bar = line.find('|');
      if (bar == std::string::npos) throw fail("history line without '|'");
      std::istringstream hs(line.substr(0, bar)), cs(line.substr(bar + 1));
      History history;
      TokenId t;
      while (hs >> t) history.push_back(t);
      Counts counts(vsize, 0);
      std::string entry;
      while (cs >> entry) {
        const auto colon = entry.find(':');
        if (colon == std::string::npos) throw fail("bad count entry '" + entry + "'");
        const auto idx = std::stoull(entry.substr(0, colon));
        if (idx >= vsize) throw fail("count index out of range");
        counts[idx] = std::stoull(entry.substr(colon + 1));
      }
      conditional.emplace(std::move(history), std::move(counts));
    }
    if (!(is >> word) || word != "end") throw fail("missing 'end' marker");
    char* parse_end = nullptr;
    const double alpha = std::strtod(alpha_text.c_str(), &parse_end);
    if (parse_end == alpha_text.c_str()) throw fail("bad alpha '" + alpha_text + "'");
    return std::make_shared<const NGramModel>(std::move(vocab), order, alpha, std::move(unigram),
                                              std::move(conditional));
  }

  void save_file(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write model file '" + path + "'");
    save(os);
    if (!os) throw IoError("failed writing model file '" + path + "'");
  }

  static std::shared_ptr<const NGramModel> load_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot read model file '" + path + "'");
    return load(is);
  }

 protected:
  Distribution compute(std::span<const TokenId> ctx) const override {
    const std::size_t hlen = static_cast<std::size_t>(order_ - 1);
    if (hlen == 0 || ctx.size() < hlen) return unigram_row_;
    History history(ctx.end() - static_cast<std::ptrdiff_t>(hlen), ctx.end());
    auto it = rows_.find(history);
    return it == rows_.end() ? unigram_row_ : it->second;
  }

 private:
  Distribution smoothed_row(const Counts& counts) const {
    const double v = static_cast<double>(counts.size());
    double total = 0.0;
    for (auto c : counts) total += static_cast<double>(c);
    const double denom = total + alpha_ * v;
    if (!(denom > 0.0)) throw InputError("n-gram row has no mass; use alpha > 0");
    std::vector<double> probs(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) probs[i] = (static_cast<double>(counts[i]) + alpha_) / denom;
    return Distribution(std::move(probs));
  }

  int order_;
  double alpha_;
  Counts unigram_counts_;
  std::map<History, Counts> conditional_counts_;
  Distribution unigram_row_{std::vector<double>{1.0}};
  std::unordered_map<History, Distribution, detail::TokenSeqHash> rows_;
};

/// Counts every (order-1)-token history in `corpus` and its successor.
inline std::shared_ptr<const NGramModel> train_ngram(std::shared_ptr<const Vocabulary> vocab,
                                                     std::span<const TokenId> corpus, int order,
                                                     double smoothing_alpha) {
  if (!vocab) throw InputError("train_ngram: null vocabulary");
  if (corpus.empty()) throw InputError("train_ngram: empty corpus");
  if (order < 1) throw InputError("train_ngram: order must be >= 1");
  if (corpus.size() < static_cast<std::size_t>(order))
    throw InputError("train_ngram: corpus shorter than model order");
  if (!(smoothing_alpha >= 0.0)) throw InputError("train_ngram: smoothing alpha must be >= 0");
  check_token_range(*vocab, corpus);

  const std::size_t v = vocab->size();
  const std::size_t hlen = static_cast<std::size_t>(order - 1);
  NGramModel::Counts unigram(v, 0);
  for (TokenId t : corpus) ++unigram[static_cast<std::size_t>(t)];
  std::map<NGramModel::History, NGramModel::Counts> conditional;
  if (hlen > 0) {
    for (std::size_t i = hlen; i < corpus.size(); ++i) {
      NGramModel::History history(corpus.begin() + static_cast<std::ptrdiff_t>(i - hlen),
                                  corpus.begin() + static_cast<std::ptrdiff_t>(i));
      auto [it, inserted] = conditional.try_emplace(std::move(history));
      if (inserted) it->second.assign(v, 0);
      ++it->second[static_cast<std::size_t>(corpus[i])];
    }
  }
  return std::make_shared<const NGramModel>(std::move(vocab), order, smoothing_alpha, std::move(unigram),
                                            std::move(conditional));
}

}  // namespace specdec
