#include "tdg/prompt.hpp"

#include <cmath>
#include <string>

#include "tdg/error.hpp"

namespace tdg {

namespace {

void require_labels(const std::vector<int>& labels, std::size_t n_categories) {
  for (std::size_t n = 0; n < labels.size(); ++n) {
    if (labels[n] < 0 || static_cast<std::size_t>(labels[n]) >= n_categories) {
      throw IndexError("labels: class index " + std::to_string(labels[n]) +
                       " out of range at position " + std::to_string(n));
    }
  }
}

}  // namespace

PromptTemplate init_prompt(std::size_t token_dim, RngStream& rng) {
  PromptTemplate tpl;
  tpl.ctx1 = rng.gaussian_vec(token_dim, 0.02);
  tpl.ctx2 = rng.gaussian_vec(token_dim, 0.02);
  return tpl;
}

std::vector<Vec> fill_template(const PromptTemplate& tpl, const Vec& domain_tok,
                               const Vec& category_tok) {
  const std::size_t token_dim = tpl.ctx1.size();
  if (tpl.ctx2.size() != token_dim || domain_tok.size() != token_dim ||
      category_tok.size() != token_dim) {
    throw DimensionError("fill_template: token dimensions differ");
  }
  return {tpl.ctx1, domain_tok, tpl.ctx2, category_tok};
}

TextFeatureGrid build_text_grid(const PromptTemplate& tpl,
                                const TextEncoder& enc,
                                const std::vector<Vec>& category_tokens,
                                const DomainWordPool& pool) {
  if (category_tokens.empty()) {
    throw DegenerateInputError("build_text_grid: no categories");
  }
  if (pool.size() == 0) {
    throw DegenerateInputError("build_text_grid: empty word pool");
  }
  if (pool.token_embeddings.size() != pool.size()) {
    throw ValidationError(
        "build_text_grid: pool token embeddings not assigned");
  }
  TextFeatureGrid grid;
  grid.n_categories = category_tokens.size();
  grid.n_domain_words = pool.size();
  grid.features.reserve(grid.n_categories * grid.n_domain_words);
  for (std::size_t i = 0; i < grid.n_categories; ++i) {
    for (std::size_t j = 0; j < grid.n_domain_words; ++j) {
      Vec z = encode_text(
          enc, fill_template(tpl, pool.token_embeddings[j], category_tokens[i]));
      if (!(norm(z) > kNormEpsilon)) {
        throw DegenerateInputError("build_text_grid: degenerate feature at (" +
                                   std::to_string(i) + ", " +
                                   std::to_string(j) + ")");
      }
      grid.features.push_back(std::move(z));
    }
  }
  return grid;
}

double alignment_loss(const std::vector<Vec>& image_feats,
                      const std::vector<int>& labels,
                      const TextFeatureGrid& grid) {
  if (image_feats.empty()) {
    throw DegenerateInputError("alignment_loss: empty batch");
  }
  if (image_feats.size() != labels.size()) {
    throw DimensionError("alignment_loss: feature/label count mismatch");
  }
  require_labels(labels, grid.n_categories);
  double total = 0.0;
  for (std::size_t n = 0; n < image_feats.size(); ++n) {
    const auto category = static_cast<std::size_t>(labels[n]);
    for (std::size_t j = 0; j < grid.n_domain_words; ++j) {
      total += cosine(image_feats[n], grid.cell(category, j));
    }
  }
  const double denom = static_cast<double>(image_feats.size()) *
                       static_cast<double>(grid.n_domain_words);
  return -total / denom;
}

double similarity_loss(const TextFeatureGrid& grid) {
  const std::size_t n_d = grid.n_domain_words;
  double total = 0.0;
  for (std::size_t i = 0; i < grid.n_categories; ++i) {
    for (std::size_t j = 0; j < n_d; ++j) {
      for (std::size_t jp = 0; jp < n_d; ++jp) {
        // The diagonal is cosine(z, z) == 1 by definition; adding the exact
        // constant keeps the N_d = 1 value at exactly 1.
        total += (j == jp) ? 1.0 : cosine(grid.cell(i, j), grid.cell(i, jp));
      }
    }
  }
  const double denom = static_cast<double>(grid.n_categories) *
                       static_cast<double>(n_d) * static_cast<double>(n_d);
  return total / denom;
}

PromptLossResult prompt_loss_and_grads(const PromptTemplate& tpl,
                                       const TextEncoder& enc,
                                       const std::vector<Vec>& image_feats,
                                       const std::vector<int>& labels,
                                       const std::vector<Vec>& category_tokens,
                                       const DomainWordPool& pool,
                                       double lambda,
                                       PromptLossMode mode) {
  if (lambda < 0.0) {
    throw ConfigError("prompt loss: lambda must be nonnegative");
  }
  const TextFeatureGrid grid =
      build_text_grid(tpl, enc, category_tokens, pool);
  const std::size_t n_c = grid.n_categories;
  const std::size_t n_d = grid.n_domain_words;

  const double l_align = alignment_loss(image_feats, labels, grid);
  const double l_sim = similarity_loss(grid);

  const bool use_align = mode != PromptLossMode::kSimOnly;
  const bool use_sim = mode != PromptLossMode::kAlignOnly;

  // d(loss)/d(cell) accumulated per grid cell, then chained through the
  // encoder. Fixed iteration order keeps the reduction bit-reproducible.
  std::vector<Vec> cell_grads(n_c * n_d, Vec(enc.shared_dim(), 0.0));

  if (use_align) {
    const double align_scale =
        -1.0 / (static_cast<double>(image_feats.size()) *
                static_cast<double>(n_d));
    for (std::size_t n = 0; n < image_feats.size(); ++n) {
      const auto category = static_cast<std::size_t>(labels[n]);
      for (std::size_t j = 0; j < n_d; ++j) {
        const Vec& z = grid.cell(category, j);
        // grad of cosine(image, z) with respect to z
        axpy(align_scale, cosine_grad_wrt_first(z, image_feats[n]),
             cell_grads[category * n_d + j]);
      }
    }
  }

  // Each unordered pair appears twice in the double sum and cosine is
  // symmetric, hence the factor 2; the diagonal has zero gradient.
  const double sim_scale = lambda * 2.0 /
                           (static_cast<double>(n_c) *
                            static_cast<double>(n_d) *
                            static_cast<double>(n_d));
  if (use_sim && sim_scale != 0.0) {
    for (std::size_t i = 0; i < n_c; ++i) {
      for (std::size_t j = 0; j < n_d; ++j) {
        Vec& g = cell_grads[i * n_d + j];
        for (std::size_t jp = 0; jp < n_d; ++jp) {
          if (jp == j) continue;
          axpy(sim_scale, cosine_grad_wrt_first(grid.cell(i, j), grid.cell(i, jp)),
               g);
        }
      }
    }
  }

  Vec upstream_sum(enc.shared_dim(), 0.0);
  for (const Vec& g : cell_grads) {
    axpy(1.0, g, upstream_sum);
  }

  // Under mean pooling over the 4 template slots, both context tokens see
  // the same (1/4) projection^T chain.
  Vec grad_ctx = matvec_transposed(enc.projection, upstream_sum);
  scale_in_place(grad_ctx, 0.25);

  PromptLossResult result;
  result.align = l_align;
  result.sim = l_sim;
  switch (mode) {
    case PromptLossMode::kBoth:
      result.total = l_align + lambda * l_sim;
      break;
    case PromptLossMode::kAlignOnly:
      result.total = l_align;
      break;
    case PromptLossMode::kSimOnly:
      result.total = lambda * l_sim;
      break;
  }
  result.grad_ctx1 = grad_ctx;
  result.grad_ctx2 = std::move(grad_ctx);
  return result;
}

}  // namespace tdg
