#pragma once

#include <vector>

#include "tdg/rng.hpp"
#include "tdg/vec.hpp"

namespace tdg {

// Frozen text encoder: mean pooling over token embeddings followed by a
// fixed linear projection into the shared space. The projection is never
// updated; gradients flow only to the input tokens.
struct TextEncoder {
  Mat projection;  // shared_dim x token_dim

  std::size_t shared_dim() const { return projection.rows; }
  std::size_t token_dim() const { return projection.cols; }
};

// Draws projection entries i.i.d. Gaussian(0, 1/token_dim) and redraws until
// the matrix has full row rank.
TextEncoder make_text_encoder(std::size_t shared_dim, std::size_t token_dim,
                              RngStream& rng);

// projection * mean(tokens). Pooling accumulates each coordinate in sorted
// order, so the output is exactly invariant to token order.
Vec encode_text(const TextEncoder& enc, const std::vector<Vec>& tokens);

// Gradient of a scalar loss with respect to the token at `slot`, given the
// upstream gradient with respect to the encoder output. Under mean pooling
// this is (1/L) projection^T upstream for every slot.
Vec encode_text_grad(const TextEncoder& enc, const std::vector<Vec>& tokens,
                     std::size_t slot, const Vec& upstream);

// Trainable affine map from raw features to the shared space.
struct ImageEncoder {
  Mat weight;  // shared_dim x raw_dim
  Vec bias;    // shared_dim

  std::size_t shared_dim() const { return weight.rows; }
  std::size_t raw_dim() const { return weight.cols; }
};

ImageEncoder make_image_encoder(std::size_t shared_dim, std::size_t raw_dim,
                                RngStream& rng);

Vec encode_image(const ImageEncoder& enc, const Vec& x);

struct ImageEncoderGrads {
  Mat weight;
  Vec bias;
};

// weight-gradient = upstream (outer) x, bias-gradient = upstream.
ImageEncoderGrads encode_image_grads(const ImageEncoder& enc, const Vec& x,
                                     const Vec& upstream);

// True when the matrix has full row rank (Gaussian elimination with partial
// pivoting; relative tolerance on pivots).
bool has_full_row_rank(const Mat& m);

}  // namespace tdg
