#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "specdec/error.hpp"

namespace specdec {

using TokenId = std::int32_t;

/// Token space shared by draft and target models.
///
/// Token strings are unique. `bos` and `eos` are ordinary entries with
/// reserved ids, so every model sees a single contiguous id range
/// `[0, size())`.
class Vocabulary {
 public:
  Vocabulary(std::vector<std::string> tokens, TokenId bos_id, TokenId eos_id)
      : tokens_(std::move(tokens)), bos_(bos_id), eos_(eos_id) {
    if (tokens_.size() < 2) throw InputError("vocabulary needs at least 2 tokens");
    if (bos_ == eos_) throw InputError("bos_id and eos_id must differ");
    if (bos_ < 0 || eos_ < 0 || static_cast<std::size_t>(bos_) >= tokens_.size() ||
        static_cast<std::size_t>(eos_) >= tokens_.size())
      throw InputError("bos_id/eos_id out of range");
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      auto [it, inserted] = index_.emplace(tokens_[i], static_cast<TokenId>(i));
      if (!inserted) throw InputError("duplicate token string '" + tokens_[i] + "'");
    }
  }

  /// Character-level vocabulary: `<s>` = 0, `</s>` = 1, then `symbols` in
  /// the given order.
  static Vocabulary with_specials(const std::vector<std::string>& symbols) {
    std::vector<std::string> tokens{"<s>", "</s>"};
    tokens.insert(tokens.end(), symbols.begin(), symbols.end());
    return Vocabulary(std::move(tokens), 0, 1);
  }

  std::size_t size() const noexcept { return tokens_.size(); }
  TokenId bos_id() const noexcept { return bos_; }
  TokenId eos_id() const noexcept { return eos_; }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  const std::string& token(TokenId id) const {
    if (!contains(id)) throw InputError("token id " + std::to_string(id) + " out of range");
    return tokens_[static_cast<std::size_t>(id)];
  }

  bool contains(TokenId id) const noexcept {
    return id >= 0 && static_cast<std::size_t>(id) < tokens_.size();
  }

  /// Id for a token string, or -1 if unknown.
  TokenId find(const std::string& s) const {
    auto it = index_.find(s);
    return it == index_.end() ? TokenId{-1} : it->second;
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.bos_ == b.bos_ && a.eos_ == b.eos_ && a.tokens_ == b.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  TokenId bos_;
  TokenId eos_;
  std::unordered_map<std::string, TokenId> index_;
};

/// Throws InputError unless every id in `tokens` is inside the vocabulary.
inline void check_token_range(const Vocabulary& vocab, std::span<const TokenId> tokens) {
  for (TokenId t : tokens) {
    if (!vocab.contains(t))
      throw InputError("token id " + std::to_string(t) + " outside vocabulary of size " +
                       std::to_string(vocab.size()));
  }
}

/// A decoding context: starts with bos, ids in range, eos only in final
/// position.
class Context {
 public:
  Context(const Vocabulary& vocab, std::vector<TokenId> tokens) : tokens_(std::move(tokens)) {
    if (tokens_.empty()) throw InputError("context must be non-empty");
    if (tokens_.front() != vocab.bos_id()) throw InputError("context must begin with bos");
    check_token_range(vocab, tokens_);
    for (std::size_t i = 0; i + 1 < tokens_.size(); ++i)
      if (tokens_[i] == vocab.eos_id()) throw InputError("eos may only end a context");
  }

  /// bos followed by `body`.
  static Context from_body(const Vocabulary& vocab, std::span<const TokenId> body) {
    std::vector<TokenId> tokens;
    tokens.reserve(body.size() + 1);
    tokens.push_back(vocab.bos_id());
    tokens.insert(tokens.end(), body.begin(), body.end());
    return Context(vocab, std::move(tokens));
  }

  std::span<const TokenId> tokens() const noexcept { return tokens_; }
  std::size_t size() const noexcept { return tokens_.size(); }
  TokenId back() const noexcept { return tokens_.back(); }

  friend bool operator==(const Context&, const Context&) = default;

 private:
  std::vector<TokenId> tokens_;
};

}  // namespace specdec
