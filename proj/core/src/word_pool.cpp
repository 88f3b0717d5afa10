#include "tdg/word_pool.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <sstream>
#include <unordered_set>

#include "tdg/error.hpp"

namespace tdg {

namespace {

std::string trim(const std::string& s) {
  std::size_t begin = 0;
  std::size_t end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
  return s.substr(begin, end - begin);
}

std::string ascii_lower(const std::string& s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

bool has_interior_whitespace(const std::string& s) {
  return std::any_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isspace(c) != 0;
  });
}

// Minimal UTF-8 well-formedness scan (RFC 3629 ranges).
void require_utf8(const std::string& text) {
  const auto* p = reinterpret_cast<const unsigned char*>(text.data());
  const std::size_t n = text.size();
  std::size_t i = 0;
  while (i < n) {
    const unsigned char c = p[i];
    std::size_t len = 0;
    if (c < 0x80) {
      len = 1;
    } else if ((c & 0xE0) == 0xC0 && c >= 0xC2) {
      len = 2;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
    } else if ((c & 0xF8) == 0xF0 && c <= 0xF4) {
      len = 4;
    } else {
      throw EncodingError("word pool: invalid UTF-8 byte at offset " +
                          std::to_string(i));
    }
    if (i + len > n) {
      throw EncodingError("word pool: truncated UTF-8 sequence at offset " +
                          std::to_string(i));
    }
    for (std::size_t k = 1; k < len; ++k) {
      if ((p[i + k] & 0xC0) != 0x80) {
        throw EncodingError("word pool: invalid UTF-8 continuation at offset " +
                            std::to_string(i + k));
      }
    }
    i += len;
  }
}

}  // namespace

DomainWordPool load_word_pool_text(const std::string& text) {
  require_utf8(text);
  DomainWordPool pool;
  std::unordered_set<std::string> seen;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    const std::string word = trim(line);
    if (word.empty() || word.front() == '#') continue;
    if (has_interior_whitespace(word)) {
      throw ValidationError("word pool: word contains whitespace: \"" + word +
                            "\"");
    }
    const std::string key = ascii_lower(word);
    if (!seen.insert(key).second) {
      throw ValidationError("word pool: duplicate word \"" + key + "\"");
    }
    pool.words.push_back(word);
  }
  if (pool.words.empty()) {
    throw ValidationError("word pool: no words after filtering");
  }
  return pool;
}

DomainWordPool load_word_pool(std::istream& in) {
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) {
    throw IoError("word pool: read failure");
  }
  return load_word_pool_text(buffer.str());
}

DomainWordPool load_word_pool_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("word pool: cannot open " + path);
  }
  return load_word_pool(in);
}

std::string serialize_word_pool(const DomainWordPool& pool) {
  std::string out;
  for (const std::string& w : pool.words) {
    out += w;
    out += '\n';
  }
  return out;
}

DomainWordPool default_pool() {
  DomainWordPool pool;
  pool.words = {
      "picture",     "photo",   "photograph", "portrait",     "silhouette",
      "statue",      "symbol",  "painting",   "figure",       "depiction",
      "drawing",     "caricature", "video",   "face",         "sculpture",
      "vision",      "illustration", "cartoon", "imagery",    "representation",
  };
  return pool;
}

}  // namespace tdg
