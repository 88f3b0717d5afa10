#pragma once

#include <vector>

#include "tdg/prompt.hpp"
#include "tdg/rng.hpp"
#include "tdg/vec.hpp"

namespace tdg {

// Cosine classifier: both the input feature and every head are normalized
// to unit vectors, so pre-scale logits are cosines in [-1, 1]. logit_scale
// sharpens the softmax; predictions are invariant to the feature norm.
struct NormalizedClassifier {
  Mat heads;  // n_classes x shared_dim
  double logit_scale = 10.0;

  std::size_t n_classes() const { return heads.rows; }
};

// Plain affine classifier used by the baseline arms.
struct LinearClassifier {
  Mat heads;  // n_classes x shared_dim
  Vec biases;

  std::size_t n_classes() const { return heads.rows; }
};

struct Prediction {
  Vec logits;
  Vec probabilities;  // softmax of logits; sums to 1 within 1e-12
};

// Head entries i.i.d. Gaussian(0, 1/shared_dim) so norms are unit-order.
NormalizedClassifier make_normalized_classifier(std::size_t n_classes,
                                                std::size_t shared_dim,
                                                double logit_scale,
                                                RngStream& rng);
LinearClassifier make_linear_classifier(std::size_t n_classes,
                                        std::size_t shared_dim, RngStream& rng);

Prediction predict_normalized(const NormalizedClassifier& cls, const Vec& z);
Prediction predict_linear(const LinearClassifier& cls, const Vec& z);

Vec softmax(const Vec& logits);
std::size_t argmax_lowest_tie(const Vec& values);

// Mean negative log probability of the true class over a batch.
double cross_entropy_image(const std::vector<Prediction>& preds,
                           const std::vector<int>& labels);

// Predictions for every text grid cell, row-major by category; the label of
// cell (i, j) is its category i.
struct PredictionGrid {
  std::size_t n_categories = 0;
  std::size_t n_domain_words = 0;
  std::vector<Prediction> cells;
};

double cross_entropy_text(const PredictionGrid& grid_preds);

// Per-sample cross-entropy gradients. For the normalized classifier the
// chain runs through both normalizations, so the feature gradient is
// orthogonal to the normalized feature; `biases` is unused there.
struct ClassifierGrads {
  Mat heads;
  Vec biases;
  Vec feature;
};

ClassifierGrads normalized_backward(const NormalizedClassifier& cls,
                                    const Vec& z, int label);
ClassifierGrads linear_backward(const LinearClassifier& cls, const Vec& z,
                                int label);

// Gradient of cross-entropy with respect to the logits themselves:
// softmax(logits) - onehot(label).
Vec cross_entropy_logit_grad(const Vec& logits, int label);

}  // namespace tdg
