#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "entlib/common.hpp"
#include "entlib/corpus.hpp"

// Pretrained word-vector file: ASCII header "<vocab_count> <dim>\n", then
// repeated records of a whitespace-terminated word, one space, and dim
// little-endian IEEE-754 float32 values.

namespace entlib {

struct EmbeddingMatrix {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<real> values;  // row-major, rows x dim
};

struct EmbeddingCoverage {
  std::size_t hits = 0;
  std::size_t misses = 0;
  std::vector<std::string> missing;  // tokens absent from the file
  double hit_rate() const {
    const std::size_t total = hits + misses;
    return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
  }
};

namespace detail {

inline float float32_from_le(const unsigned char* p) {
  std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                       (static_cast<std::uint32_t>(p[2]) << 16) |
                       (static_cast<std::uint32_t>(p[3]) << 24);
  float f;
  std::memcpy(&f, &bits, sizeof f);
  return f;
}

inline void float32_to_le(float f, unsigned char* p) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, sizeof bits);
  p[0] = static_cast<unsigned char>(bits & 0xff);
  p[1] = static_cast<unsigned char>((bits >> 8) & 0xff);
  p[2] = static_cast<unsigned char>((bits >> 16) & 0xff);
  p[3] = static_cast<unsigned char>((bits >> 24) & 0xff);
}

}  // namespace detail

// Xavier-style bound used both for full random init and for rows whose tokens
// are absent from the pretrained file: uniform in [-a, a] with
// a = sqrt(6 / (rows + dim)), so each row norm is at most a * sqrt(dim).
inline real embedding_init_bound(std::size_t rows, std::size_t dim) {
  return static_cast<real>(std::sqrt(6.0 / static_cast<double>(rows + dim)));
}

// Loads one vector per listed token, in list order. Tokens present in the
// file get the stored vector (first file occurrence wins); misses are drawn
// uniformly from [-a, a]. File words outside the list are skipped.
inline EmbeddingMatrix load_pretrained_embeddings(const std::string& path,
                                                  const std::vector<std::string>& tokens,
                                                  std::size_t dim, std::uint64_t seed,
                                                  EmbeddingCoverage* coverage = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open embedding file: " + path);

  std::string header;
  if (!std::getline(in, header)) throw FormatError(path + ": missing header line");
  std::size_t file_count = 0, file_dim = 0;
  {
    std::istringstream hs(header);
    if (!(hs >> file_count >> file_dim)) {
      throw FormatError(path + ": malformed header '" + header + "'");
    }
  }
  if (file_dim != dim) {
    throw FormatError(path + ": dimension mismatch, header says " + std::to_string(file_dim) +
                      " but " + std::to_string(dim) + " requested");
  }

  std::unordered_map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < tokens.size(); ++i) row_of.emplace(tokens[i], i);

  const std::size_t rows = tokens.size();
  EmbeddingMatrix m;
  m.rows = rows;
  m.dim = dim;
  m.values.assign(rows * dim, real(0));

  std::vector<std::uint8_t> filled(rows, 0);
  std::vector<unsigned char> buf(4 * dim);
  for (std::size_t rec = 0; rec < file_count; ++rec) {
    // Skip separators, read the word up to the single space, then the floats.
    int c = in.get();
    while (c == '\n' || c == '\r' || c == ' ') c = in.get();
    if (c == EOF) throw FormatError(path + ": truncated file at record " + std::to_string(rec));
    std::string word;
    while (c != EOF && c != ' ' && c != '\n' && c != '\r') {
      word.push_back(static_cast<char>(c));
      c = in.get();
    }
    if (c != ' ') throw FormatError(path + ": truncated record for word '" + word + "'");
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() != static_cast<std::streamsize>(buf.size())) {
      throw FormatError(path + ": truncated vector for word '" + word + "'");
    }
    auto it = row_of.find(word);
    if (it == row_of.end() || filled[it->second]) continue;
    filled[it->second] = 1;
    for (std::size_t j = 0; j < dim; ++j) {
      m.values[it->second * dim + j] = static_cast<real>(detail::float32_from_le(buf.data() + 4 * j));
    }
  }

  const real bound = embedding_init_bound(rows, dim);
  Rng rng(mix_seed(seed, 0x656d626564ull));
  EmbeddingCoverage cov;
  for (std::size_t i = 0; i < rows; ++i) {
    if (filled[i]) {
      ++cov.hits;
      continue;
    }
    ++cov.misses;
    cov.missing.push_back(tokens[i]);
    for (std::size_t j = 0; j < dim; ++j) {
      m.values[i * dim + j] = static_cast<real>(uniform_real(rng, -bound, bound));
    }
  }
  if (coverage) *coverage = std::move(cov);
  return m;
}

inline EmbeddingMatrix load_pretrained_embeddings(const std::string& path, const Vocabulary& vocab,
                                                  std::size_t dim, std::uint64_t seed,
                                                  EmbeddingCoverage* coverage = nullptr) {
  return load_pretrained_embeddings(path, vocab.tokens(), dim, seed, coverage);
}

// Writer for the same format (fixtures and interoperability tests).
inline void write_embeddings_file(const std::string& path, const std::vector<std::string>& words,
                                  const std::vector<std::vector<float>>& vectors) {
  if (words.size() != vectors.size()) {
    throw ShapeError("write_embeddings_file: word/vector count mismatch");
  }
  const std::size_t dim = vectors.empty() ? 0 : vectors[0].size();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write embedding file: " + path);
  out << words.size() << " " << dim << "\n";
  std::vector<unsigned char> buf(4);
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (vectors[i].size() != dim) {
      throw ShapeError("write_embeddings_file: ragged vector for word '" + words[i] + "'");
    }
    out << words[i] << ' ';
    for (float f : vectors[i]) {
      detail::float32_to_le(f, buf.data());
      out.write(reinterpret_cast<const char*>(buf.data()), 4);
    }
  }
}

}  // namespace entlib
