#pragma once

#include <cstddef>
#include <fstream>
#include <iterator>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "specdec/error.hpp"
#include "specdec/vocabulary.hpp"

namespace specdec::harness {

/// Splits UTF-8 text into one string per code point. Returns false on
/// malformed input.
inline bool split_utf8(const std::string& text, std::vector<std::string>& out) {
  out.clear();
  for (std::size_t i = 0; i < text.size();) {
    const auto lead = static_cast<unsigned char>(text[i]);
    std::size_t len = 0;
    if (lead < 0x80) len = 1;
    else if ((lead >> 5) == 0x6) len = 2;
    else if ((lead >> 4) == 0xe) len = 3;
    else if ((lead >> 3) == 0x1e) len = 4;
    else return false;
    if (i + len > text.size()) return false;
    for (std::size_t k = 1; k < len; ++k)
      if ((static_cast<unsigned char>(text[i + k]) >> 6) != 0x2) return false;
    out.emplace_back(text, i, len);
    i += len;
  }
  return true;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("error while reading '" + path + "'");
  return buf.str();
}

struct Corpus {
  std::shared_ptr<const Vocabulary> vocab;
  /// One token sequence per input file, in argument order.
  std::vector<std::vector<TokenId>> sequences;
};

/// Reads UTF-8 files as character streams over one shared vocabulary:
/// `<s>`, `</s>`, then characters in order of first occurrence across the
/// files.
inline Corpus ingest_corpora(const std::vector<std::string>& paths, std::size_t min_chars = 1) {
  std::vector<std::vector<std::string>> chars(paths.size());
  std::vector<std::string> alphabet;
  std::unordered_map<std::string, TokenId> seen;
  for (std::size_t f = 0; f < paths.size(); ++f) {
    const std::string text = read_text_file(paths[f]);
    if (text.empty()) throw IoError("corpus file '" + paths[f] + "' is empty");
    if (!split_utf8(text, chars[f])) throw IoError("corpus file '" + paths[f] + "' is not valid UTF-8");
    if (chars[f].size() < min_chars)
      throw IoError("corpus file '" + paths[f] + "' has " + std::to_string(chars[f].size()) +
                    " characters, need at least " + std::to_string(min_chars));
    for (const auto& c : chars[f])
      if (seen.emplace(c, static_cast<TokenId>(alphabet.size() + 2)).second) alphabet.push_back(c);
  }
  Corpus corpus;
  corpus.vocab = std::make_shared<const Vocabulary>(Vocabulary::with_specials(alphabet));
  for (const auto& file_chars : chars) {
    std::vector<TokenId> seq;
    seq.reserve(file_chars.size());
    for (const auto& c : file_chars) seq.push_back(seen.at(c));
    corpus.sequences.push_back(std::move(seq));
  }
  return corpus;
}

/// Single-file ingestion.
inline Corpus ingest_corpus(const std::string& path, std::size_t min_chars = 1) {
  return ingest_corpora({path}, min_chars);
}

/// Maps text onto an existing vocabulary; unknown characters are an error.
inline std::vector<TokenId> encode_text(const Vocabulary& vocab, const std::string& text) {
  std::vector<std::string> chars;
  if (!split_utf8(text, chars)) throw InputError("text is not valid UTF-8");
  std::vector<TokenId> ids;
  ids.reserve(chars.size());
  for (const auto& c : chars) {
    const TokenId id = vocab.find(c);
    if (id < 0) throw InputError("character '" + c + "' is not in the vocabulary");
    ids.push_back(id);
  }
  return ids;
}

inline std::string decode_text(const Vocabulary& vocab, std::span<const TokenId> ids) {
  std::string out;
  for (TokenId t : ids) out += vocab.token(t);
  return out;
}

}  // namespace specdec::harness
