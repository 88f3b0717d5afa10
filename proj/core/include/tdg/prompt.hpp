#pragma once

#include <vector>

#include "tdg/encoders.hpp"
#include "tdg/rng.hpp"
#include "tdg/vec.hpp"
#include "tdg/word_pool.hpp"

namespace tdg {

// Learnable prompt template. Filled as [ctx1][domain][ctx2][category]; only
// ctx1 and ctx2 are trainable.
struct PromptTemplate {
  Vec ctx1;
  Vec ctx2;
};

// ctx tokens start as small Gaussian noise, std 0.02.
PromptTemplate init_prompt(std::size_t token_dim, RngStream& rng);

// The 4-token sequence [ctx1, domain, ctx2, category].
std::vector<Vec> fill_template(const PromptTemplate& tpl, const Vec& domain_tok,
                               const Vec& category_tok);

// Text features for every (category, domain word) pair; row-major by
// category. Complete by construction; every cell is checked nondegenerate.
struct TextFeatureGrid {
  std::size_t n_categories = 0;
  std::size_t n_domain_words = 0;
  std::vector<Vec> features;

  const Vec& cell(std::size_t category, std::size_t word) const {
    return features[category * n_domain_words + word];
  }
  Vec& cell(std::size_t category, std::size_t word) {
    return features[category * n_domain_words + word];
  }
};

// Requires pool.token_embeddings to be assigned (see synthetic.hpp).
TextFeatureGrid build_text_grid(const PromptTemplate& tpl,
                                const TextEncoder& enc,
                                const std::vector<Vec>& category_tokens,
                                const DomainWordPool& pool);

// Mean negative cosine between each image feature and the text features of
// its own category, averaged over the batch and the word pool. In [-1, 1].
double alignment_loss(const std::vector<Vec>& image_feats,
                      const std::vector<int>& labels,
                      const TextFeatureGrid& grid);

// Mean pairwise cosine between text features sharing a category, both sum
// indices running over the word pool. The j == j' diagonal is included and
// contributes exactly 1 per cell (gradient-free), so the value lies in
// [2/N_d - 1, 1].
double similarity_loss(const TextFeatureGrid& grid);

// Which terms of the prompt objective are active.
enum class PromptLossMode {
  kBoth,       // alignment + lambda * similarity
  kAlignOnly,  // alignment term only
  kSimOnly,    // lambda * similarity only
};

struct PromptLossResult {
  double total = 0.0;
  double align = 0.0;  // always reported, even when inactive
  double sim = 0.0;
  Vec grad_ctx1;
  Vec grad_ctx2;
};

// Loss and exact closed-form gradients with respect to the two context
// tokens. Image features and word/category tokens are treated as constants.
PromptLossResult prompt_loss_and_grads(const PromptTemplate& tpl,
                                       const TextEncoder& enc,
                                       const std::vector<Vec>& image_feats,
                                       const std::vector<int>& labels,
                                       const std::vector<Vec>& category_tokens,
                                       const DomainWordPool& pool,
                                       double lambda,
                                       PromptLossMode mode = PromptLossMode::kBoth);

}  // namespace tdg
