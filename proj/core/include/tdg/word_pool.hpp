#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "tdg/vec.hpp"

namespace tdg {

// Ordered pool of domain-relevant words. Order is significant: it indexes
// the columns of the text feature grid. Token embeddings are assigned later
// by the dataset vocabulary and stay empty until then.
struct DomainWordPool {
  std::vector<std::string> words;
  std::vector<Vec> token_embeddings;

  std::size_t size() const { return words.size(); }
};

// Parses newline-delimited UTF-8, one word per line; blank lines and lines
// starting with '#' are ignored. Rejects duplicates case-insensitively and
// words containing whitespace.
DomainWordPool load_word_pool(std::istream& in);
DomainWordPool load_word_pool_text(const std::string& text);
DomainWordPool load_word_pool_file(const std::string& path);

// Serializes back to the same one-word-per-line format load_word_pool reads.
std::string serialize_word_pool(const DomainWordPool& pool);

// The bundled default: 20 style/medium words (picture, photo, ...).
DomainWordPool default_pool();

}  // namespace tdg
