#include "tdg/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tdg/error.hpp"

namespace tdg {

namespace {

void require_token_dims(const std::vector<Vec>& tokens, std::size_t token_dim) {
  for (std::size_t l = 0; l < tokens.size(); ++l) {
    if (tokens[l].size() != token_dim) {
      throw DimensionError("encode_text: token " + std::to_string(l) +
                           " has length " + std::to_string(tokens[l].size()) +
                           ", expected " + std::to_string(token_dim));
    }
  }
}

}  // namespace

bool has_full_row_rank(const Mat& m) {
  if (m.rows == 0 || m.rows > m.cols) return false;
  Mat a = m;
  double max_abs = 0.0;
  for (double v : a.data) max_abs = std::max(max_abs, std::fabs(v));
  const double tol = std::max(max_abs, 1.0) * 1e-10;
  std::size_t rank = 0;
  for (std::size_t col = 0; col < a.cols && rank < a.rows; ++col) {
    std::size_t pivot = rank;
    for (std::size_t r = rank + 1; r < a.rows; ++r) {
      if (std::fabs(a.at(r, col)) > std::fabs(a.at(pivot, col))) pivot = r;
    }
    if (std::fabs(a.at(pivot, col)) <= tol) continue;
    if (pivot != rank) {
      for (std::size_t j = 0; j < a.cols; ++j) {
        std::swap(a.at(pivot, j), a.at(rank, j));
      }
    }
    for (std::size_t r = rank + 1; r < a.rows; ++r) {
      const double f = a.at(r, col) / a.at(rank, col);
      for (std::size_t j = col; j < a.cols; ++j) {
        a.at(r, j) -= f * a.at(rank, j);
      }
    }
    ++rank;
  }
  return rank == m.rows;
}

TextEncoder make_text_encoder(std::size_t shared_dim, std::size_t token_dim,
                              RngStream& rng) {
  if (shared_dim == 0 || token_dim == 0 || shared_dim > token_dim) {
    throw ConfigError("text encoder: need 0 < shared_dim <= token_dim");
  }
  const double stddev = 1.0 / std::sqrt(static_cast<double>(token_dim));
  for (int attempt = 0; attempt < 64; ++attempt) {
    TextEncoder enc{rng.gaussian_mat(shared_dim, token_dim, stddev)};
    if (has_full_row_rank(enc.projection)) return enc;
  }
  throw NumericError("text encoder: projection rank check failed repeatedly");
}

Vec encode_text(const TextEncoder& enc, const std::vector<Vec>& tokens) {
  if (tokens.empty()) {
    throw DegenerateInputError("encode_text: empty token sequence");
  }
  require_token_dims(tokens, enc.token_dim());
  const std::size_t len = tokens.size();
  Vec mean(enc.token_dim(), 0.0);
  std::vector<double> column(len);
  for (std::size_t c = 0; c < mean.size(); ++c) {
    for (std::size_t l = 0; l < len; ++l) column[l] = tokens[l][c];
    // Sorted accumulation keeps pooling exactly permutation-invariant.
    std::sort(column.begin(), column.end());
    double s = 0.0;
    for (double v : column) s += v;
    mean[c] = s / static_cast<double>(len);
  }
  return matvec(enc.projection, mean);
}

Vec encode_text_grad(const TextEncoder& enc, const std::vector<Vec>& tokens,
                     std::size_t slot, const Vec& upstream) {
  if (slot >= tokens.size()) {
    throw IndexError("encode_text_grad: slot " + std::to_string(slot) +
                     " out of range for sequence of length " +
                     std::to_string(tokens.size()));
  }
  if (upstream.size() != enc.shared_dim()) {
    throw DimensionError("encode_text_grad: upstream length mismatch");
  }
  Vec g = matvec_transposed(enc.projection, upstream);
  scale_in_place(g, 1.0 / static_cast<double>(tokens.size()));
  return g;
}

ImageEncoder make_image_encoder(std::size_t shared_dim, std::size_t raw_dim,
                                RngStream& rng) {
  if (shared_dim == 0 || raw_dim == 0) {
    throw ConfigError("image encoder: dimensions must be positive");
  }
  const double stddev = 1.0 / std::sqrt(static_cast<double>(raw_dim));
  ImageEncoder enc;
  enc.weight = rng.gaussian_mat(shared_dim, raw_dim, stddev);
  enc.bias = Vec(shared_dim, 0.0);
  return enc;
}

Vec encode_image(const ImageEncoder& enc, const Vec& x) {
  if (x.size() != enc.raw_dim()) {
    throw DimensionError("encode_image: expected raw feature length " +
                         std::to_string(enc.raw_dim()) + ", got " +
                         std::to_string(x.size()));
  }
  Vec out = matvec(enc.weight, x);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += enc.bias[i];
  return out;
}

ImageEncoderGrads encode_image_grads(const ImageEncoder& enc, const Vec& x,
                                     const Vec& upstream) {
  if (x.size() != enc.raw_dim() || upstream.size() != enc.shared_dim()) {
    throw DimensionError("encode_image_grads: shape mismatch");
  }
  ImageEncoderGrads grads;
  grads.weight = Mat(enc.shared_dim(), enc.raw_dim());
  add_outer(grads.weight, upstream, x, 1.0);
  grads.bias = upstream;
  return grads;
}

}  // namespace tdg
