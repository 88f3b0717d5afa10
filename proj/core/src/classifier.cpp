#include "tdg/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tdg/error.hpp"

namespace tdg {

namespace {

void require_label(int label, std::size_t n_classes, const char* what) {
  if (label < 0 || static_cast<std::size_t>(label) >= n_classes) {
    throw IndexError(std::string(what) + ": label " + std::to_string(label) +
                     " out of range for " + std::to_string(n_classes) +
                     " classes");
  }
}

double log_true_class_prob(const Prediction& pred, int label,
                           const char* what) {
  require_label(label, pred.probabilities.size(), what);
  const double p = pred.probabilities[static_cast<std::size_t>(label)];
  const double lp = std::log(p);
  if (!std::isfinite(lp)) {
    throw NumericError(std::string(what) +
                       ": non-finite log probability (p = " +
                       std::to_string(p) + ")");
  }
  return lp;
}

}  // namespace

NormalizedClassifier make_normalized_classifier(std::size_t n_classes,
                                                std::size_t shared_dim,
                                                double logit_scale,
                                                RngStream& rng) {
  if (!(logit_scale > 0.0)) {
    throw ConfigError("normalized classifier: logit_scale must be positive");
  }
  NormalizedClassifier cls;
  cls.heads = rng.gaussian_mat(n_classes, shared_dim,
                               1.0 / std::sqrt(static_cast<double>(shared_dim)));
  cls.logit_scale = logit_scale;
  return cls;
}

LinearClassifier make_linear_classifier(std::size_t n_classes,
                                        std::size_t shared_dim,
                                        RngStream& rng) {
  LinearClassifier cls;
  cls.heads = rng.gaussian_mat(n_classes, shared_dim,
                               1.0 / std::sqrt(static_cast<double>(shared_dim)));
  cls.biases = Vec(n_classes, 0.0);
  return cls;
}

Vec softmax(const Vec& logits) {
  double max_logit = logits[0];
  for (double v : logits) max_logit = std::max(max_logit, v);
  Vec probs(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - max_logit);
    total += probs[i];
  }
  for (double& p : probs) p /= total;
  return probs;
}

std::size_t argmax_lowest_tie(const Vec& values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

Prediction predict_normalized(const NormalizedClassifier& cls, const Vec& z) {
  const Vec z_hat = normalized(z);
  Prediction pred;
  pred.logits.resize(cls.n_classes());
  for (std::size_t i = 0; i < cls.n_classes(); ++i) {
    pred.logits[i] = cls.logit_scale * cosine(cls.heads.row_vec(i), z_hat);
  }
  pred.probabilities = softmax(pred.logits);
  return pred;
}

Prediction predict_linear(const LinearClassifier& cls, const Vec& z) {
  if (z.size() != cls.heads.cols) {
    throw DimensionError("predict_linear: feature length mismatch");
  }
  Prediction pred;
  pred.logits.resize(cls.n_classes());
  for (std::size_t i = 0; i < cls.n_classes(); ++i) {
    pred.logits[i] = dot(cls.heads.row_vec(i), z) + cls.biases[i];
  }
  pred.probabilities = softmax(pred.logits);
  return pred;
}

double cross_entropy_image(const std::vector<Prediction>& preds,
                           const std::vector<int>& labels) {
  if (preds.empty()) {
    throw DegenerateInputError("cross_entropy_image: empty batch");
  }
  if (preds.size() != labels.size()) {
    throw DimensionError("cross_entropy_image: prediction/label count mismatch");
  }
  double total = 0.0;
  for (std::size_t n = 0; n < preds.size(); ++n) {
    total -= log_true_class_prob(preds[n], labels[n], "cross_entropy_image");
  }
  return total / static_cast<double>(preds.size());
}

double cross_entropy_text(const PredictionGrid& grid_preds) {
  const std::size_t n_c = grid_preds.n_categories;
  const std::size_t n_d = grid_preds.n_domain_words;
  if (n_c == 0 || n_d == 0 || grid_preds.cells.size() != n_c * n_d) {
    throw DegenerateInputError("cross_entropy_text: incomplete grid");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n_c; ++i) {
    for (std::size_t j = 0; j < n_d; ++j) {
      total -= log_true_class_prob(grid_preds.cells[i * n_d + j],
                                   static_cast<int>(i), "cross_entropy_text");
    }
  }
  return total / (static_cast<double>(n_c) * static_cast<double>(n_d));
}

Vec cross_entropy_logit_grad(const Vec& logits, int label) {
  require_label(label, logits.size(), "cross_entropy_logit_grad");
  Vec grad = softmax(logits);
  grad[static_cast<std::size_t>(label)] -= 1.0;
  return grad;
}

ClassifierGrads normalized_backward(const NormalizedClassifier& cls,
                                    const Vec& z, int label) {
  require_label(label, cls.n_classes(), "normalized_backward");
  const double z_norm = norm(z);
  if (!(z_norm > kNormEpsilon)) {
    throw DegenerateInputError("normalized_backward: degenerate feature");
  }
  const Vec z_hat = normalized(z);

  Vec logits(cls.n_classes());
  std::vector<Vec> head_hats(cls.n_classes());
  std::vector<double> head_norms(cls.n_classes());
  std::vector<double> cosines(cls.n_classes());
  for (std::size_t i = 0; i < cls.n_classes(); ++i) {
    const Vec head = cls.heads.row_vec(i);
    head_norms[i] = norm(head);
    head_hats[i] = normalized(head);
    cosines[i] = std::clamp(dot(head_hats[i], z_hat), -1.0, 1.0);
    logits[i] = cls.logit_scale * cosines[i];
  }
  const Vec dlogits = cross_entropy_logit_grad(logits, label);

  ClassifierGrads grads;
  grads.heads = Mat(cls.n_classes(), cls.heads.cols);
  grads.feature = Vec(z.size(), 0.0);
  for (std::size_t i = 0; i < cls.n_classes(); ++i) {
    const double coeff = cls.logit_scale * dlogits[i];
    double* head_grad = grads.heads.row(i);
    for (std::size_t k = 0; k < cls.heads.cols; ++k) {
      // d cos / d g_i = (z_hat - cos * g_hat) / ||g_i||
      head_grad[k] =
          coeff * (z_hat[k] - cosines[i] * head_hats[i][k]) / head_norms[i];
      grads.feature[k] +=
          coeff * (head_hats[i][k] - cosines[i] * z_hat[k]) / z_norm;
    }
  }
  return grads;
}

ClassifierGrads linear_backward(const LinearClassifier& cls, const Vec& z,
                                int label) {
  require_label(label, cls.n_classes(), "linear_backward");
  if (z.size() != cls.heads.cols) {
    throw DimensionError("linear_backward: feature length mismatch");
  }
  const Prediction pred = predict_linear(cls, z);
  const Vec dlogits = cross_entropy_logit_grad(pred.logits, label);

  ClassifierGrads grads;
  grads.heads = Mat(cls.n_classes(), cls.heads.cols);
  grads.biases = dlogits;
  grads.feature = Vec(z.size(), 0.0);
  for (std::size_t i = 0; i < cls.n_classes(); ++i) {
    double* head_grad = grads.heads.row(i);
    const double* head = cls.heads.row(i);
    for (std::size_t k = 0; k < z.size(); ++k) {
      head_grad[k] = dlogits[i] * z[k];
      grads.feature[k] += dlogits[i] * head[k];
    }
  }
  return grads;
}

}  // namespace tdg
