#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "tdg/optim.hpp"
#include "tdg/prompt.hpp"
#include "tdg/rng.hpp"

using namespace tdg;

namespace {

DomainWordPool pool_with_tokens(RngStream& rng, std::size_t n_words,
                                std::size_t token_dim) {
  DomainWordPool pool;
  for (std::size_t j = 0; j < n_words; ++j) {
    pool.words.push_back("w" + std::to_string(j));
    pool.token_embeddings.push_back(rng.gaussian_vec(token_dim, 1.0));
  }
  return pool;
}

struct PromptInstance {
  TextEncoder enc;
  PromptTemplate tpl;
  std::vector<Vec> category_tokens;
  DomainWordPool pool;
  std::vector<Vec> image_feats;
  std::vector<int> labels;
};

PromptInstance random_instance(std::uint64_t seed, std::size_t n_c,
                               std::size_t n_d, std::size_t batch) {
  RngStream rng(seed, "prompt-instance");
  PromptInstance inst;
  inst.enc = make_text_encoder(4, 7, rng);
  inst.tpl.ctx1 = rng.gaussian_vec(7, 0.5);
  inst.tpl.ctx2 = rng.gaussian_vec(7, 0.5);
  for (std::size_t i = 0; i < n_c; ++i) {
    inst.category_tokens.push_back(rng.gaussian_vec(7, 1.0));
  }
  inst.pool = pool_with_tokens(rng, n_d, 7);
  for (std::size_t b = 0; b < batch; ++b) {
    inst.image_feats.push_back(rng.gaussian_vec(4, 1.0));
    inst.labels.push_back(static_cast<int>(rng.next_below(n_c)));
  }
  return inst;
}

double max_abs_diff(const Vec& a, const Vec& b) {
  double out = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    out = std::max(out, std::fabs(a[i] - b[i]));
  }
  return out;
}

}  // namespace

TEST_CASE("fill_template produces the four-slot sequence") {
  PromptTemplate tpl{{1, 0}, {0, 1}};
  const Vec domain{2, 2};
  const Vec category{3, 3};
  const auto seq = fill_template(tpl, domain, category);
  REQUIRE(seq.size() == 4);
  CHECK(seq[0] == tpl.ctx1);
  CHECK(seq[1] == domain);
  CHECK(seq[2] == tpl.ctx2);
  CHECK(seq[3] == category);

  const auto swapped = fill_template(tpl, category, domain);
  CHECK(swapped[0] == seq[0]);
  CHECK(swapped[2] == seq[2]);
  CHECK(swapped[1] == seq[3]);
  CHECK(swapped[3] == seq[1]);

  CHECK_THROWS_AS(fill_template(tpl, Vec{1, 2, 3}, category), DimensionError);
}

TEST_CASE("zero context tokens reduce pooling to (domain+category)/4") {
  RngStream rng(2, "zero-ctx");
  const TextEncoder enc = make_text_encoder(3, 5, rng);
  PromptTemplate tpl{Vec(5, 0.0), Vec(5, 0.0)};
  const Vec domain = rng.gaussian_vec(5, 1.0);
  const Vec category = rng.gaussian_vec(5, 1.0);
  const Vec out = encode_text(enc, fill_template(tpl, domain, category));
  const Vec expected = matvec(enc.projection, scaled(add(domain, category), 0.25));
  CHECK(max_abs_diff(out, expected) <= 1e-12);
}

TEST_CASE("text grid construction") {
  RngStream rng(3, "grid");
  const TextEncoder enc = make_text_encoder(4, 6, rng);
  PromptTemplate tpl{rng.gaussian_vec(6, 0.1), rng.gaussian_vec(6, 0.1)};
  const std::vector<Vec> cats{rng.gaussian_vec(6, 1.0)};
  DomainWordPool pool = pool_with_tokens(rng, 1, 6);

  SUBCASE("1x1 grid equals direct encoding") {
    const TextFeatureGrid grid = build_text_grid(tpl, enc, cats, pool);
    CHECK(grid.n_categories == 1);
    CHECK(grid.n_domain_words == 1);
    CHECK(grid.cell(0, 0) ==
          encode_text(enc, fill_template(tpl, pool.token_embeddings[0], cats[0])));
  }

  SUBCASE("deterministic across rebuilds") {
    const TextFeatureGrid a = build_text_grid(tpl, enc, cats, pool);
    const TextFeatureGrid b = build_text_grid(tpl, enc, cats, pool);
    CHECK(a.features == b.features);
  }

  SUBCASE("shifting ctx1 shifts every cell by projection(delta)/4") {
    const TextFeatureGrid before = build_text_grid(tpl, enc, cats, pool);
    const Vec delta = rng.gaussian_vec(6, 1.0);
    PromptTemplate moved = tpl;
    axpy(1.0, delta, moved.ctx1);
    const TextFeatureGrid after = build_text_grid(moved, enc, cats, pool);
    const Vec expected_shift = matvec(enc.projection, scaled(delta, 0.25));
    for (std::size_t c = 0; c < after.features.size(); ++c) {
      const Vec observed = sub(after.features[c], before.features[c]);
      CHECK(max_abs_diff(observed, expected_shift) <= 1e-12);
    }
  }

  SUBCASE("degenerate features are reported with their cell") {
    // ctx tokens cancel domain+category exactly -> zero feature
    PromptTemplate degenerate{scaled(pool.token_embeddings[0], -1.0),
                              scaled(cats[0], -1.0)};
    try {
      build_text_grid(degenerate, enc, cats, pool);
      FAIL("expected DegenerateInputError");
    } catch (const DegenerateInputError& e) {
      CHECK(std::string(e.what()).find("(0, 0)") != std::string::npos);
    }
  }
}

TEST_CASE("alignment loss analytic anchors") {
  // Perfectly aligned: every matching text feature is a positive multiple
  // of the image feature.
  TextFeatureGrid grid;
  grid.n_categories = 2;
  grid.n_domain_words = 2;
  const Vec e0{1.0, 0.0};
  const Vec e1{0.0, 1.0};
  grid.features = {scaled(e0, 2.0), scaled(e0, 0.5), scaled(e1, 3.0), e1};
  const std::vector<Vec> images{e0, e1};
  const std::vector<int> labels{0, 1};
  CHECK(alignment_loss(images, labels, grid) ==
        doctest::Approx(-1.0).epsilon(1e-15));

  // Orthogonal: all text features orthogonal to all image features.
  TextFeatureGrid ortho;
  ortho.n_categories = 1;
  ortho.n_domain_words = 2;
  ortho.features = {Vec{0.0, 0.0, 1.0}, Vec{0.0, 0.0, -2.0}};
  CHECK(alignment_loss({Vec{1.0, 0.0, 0.0}}, {0}, ortho) == 0.0);

  CHECK_THROWS_AS(alignment_loss({}, {}, grid), DegenerateInputError);
  CHECK_THROWS_AS(alignment_loss(images, {0, 7}, grid), IndexError);
}

TEST_CASE("alignment loss equals hand summation on a small instance") {
  // N_s = 1, N_c = 2, N_d = 2 with hand-picked unit vectors.
  TextFeatureGrid grid;
  grid.n_categories = 2;
  grid.n_domain_words = 2;
  const double r = std::sqrt(0.5);
  grid.features = {Vec{1.0, 0.0}, Vec{r, r}, Vec{0.0, 1.0}, Vec{-1.0, 0.0}};
  const std::vector<Vec> images{Vec{r, r}};
  const std::vector<int> labels{0};
  // only category 0 contributes: -(1/1)(1/2) (cos(img, t00) + cos(img, t01))
  const double expected = -0.5 * (r + 1.0);
  CHECK(alignment_loss(images, labels, grid) ==
        doctest::Approx(expected).epsilon(1e-15));
  CHECK(oracle::alignment_by_summation(images, labels, grid) ==
        doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("similarity loss analytic anchors") {
  SUBCASE("single word pool is exactly one") {
    RngStream rng(4, "sim-1");
    for (int trial = 0; trial < 10; ++trial) {
      TextFeatureGrid grid;
      grid.n_categories = 1 + rng.next_below(5);
      grid.n_domain_words = 1;
      for (std::size_t i = 0; i < grid.n_categories; ++i) {
        grid.features.push_back(rng.gaussian_vec(4, 1.0));
      }
      CHECK(similarity_loss(grid) == 1.0);
    }
  }
  SUBCASE("identical features per category give one") {
    TextFeatureGrid grid;
    grid.n_categories = 2;
    grid.n_domain_words = 3;
    const Vec a{1.0, 2.0, -0.5};
    const Vec b{-1.0, 0.5, 0.25};
    grid.features = {a, a, a, b, b, b};
    CHECK(similarity_loss(grid) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("orthogonal pair per category gives one half") {
    TextFeatureGrid grid;
    grid.n_categories = 2;
    grid.n_domain_words = 2;
    grid.features = {Vec{1.0, 0.0}, Vec{0.0, 2.0}, Vec{0.0, -3.0}, Vec{4.0, 0.0}};
    CHECK(similarity_loss(grid) == 0.5);
  }
}

TEST_CASE("losses agree with the independent summation oracle") {
  RngStream rng(99, "oracle-sweep");
  for (std::size_t n_c = 1; n_c <= 3; ++n_c) {
    for (std::size_t n_d = 1; n_d <= 3; ++n_d) {
      for (std::size_t batch = 1; batch <= 3; ++batch) {
        TextFeatureGrid grid;
        grid.n_categories = n_c;
        grid.n_domain_words = n_d;
        for (std::size_t c = 0; c < n_c * n_d; ++c) {
          grid.features.push_back(rng.gaussian_vec(5, 1.0));
        }
        std::vector<Vec> images;
        std::vector<int> labels;
        for (std::size_t b = 0; b < batch; ++b) {
          images.push_back(rng.gaussian_vec(5, 1.0));
          labels.push_back(static_cast<int>(rng.next_below(n_c)));
        }
        CHECK(std::fabs(alignment_loss(images, labels, grid) -
                        oracle::alignment_by_summation(images, labels, grid)) <=
              1e-12);
        CHECK(std::fabs(similarity_loss(grid) -
                        oracle::similarity_by_summation(grid)) <= 1e-12);
      }
    }
  }
}

TEST_CASE("losses are invariant to positive rescaling of individual features") {
  RngStream rng(12, "scale-inv");
  PromptInstance inst = random_instance(12, 3, 3, 4);
  TextFeatureGrid grid =
      build_text_grid(inst.tpl, inst.enc, inst.category_tokens, inst.pool);
  const double l_a = alignment_loss(inst.image_feats, inst.labels, grid);
  const double l_s = similarity_loss(grid);

  // rescale one grid cell and one image feature by 7.3
  TextFeatureGrid scaled_grid = grid;
  scale_in_place(scaled_grid.cell(1, 2), 7.3);
  auto scaled_images = inst.image_feats;
  scale_in_place(scaled_images[0], 7.3);
  CHECK(alignment_loss(scaled_images, inst.labels, scaled_grid) ==
        doctest::Approx(l_a).epsilon(1e-12));
  CHECK(similarity_loss(scaled_grid) == doctest::Approx(l_s).epsilon(1e-12));

  // range checks
  CHECK(l_a >= -1.0);
  CHECK(l_a <= 1.0);
  CHECK(l_s <= 1.0);
  CHECK(l_s >= 2.0 / 3.0 - 1.0);
}

TEST_CASE("prompt loss composition") {
  PromptInstance inst = random_instance(5, 2, 3, 3);
  const auto at_zero =
      prompt_loss_and_grads(inst.tpl, inst.enc, inst.image_feats, inst.labels,
                            inst.category_tokens, inst.pool, 0.0);
  CHECK(at_zero.total == at_zero.align);

  const auto at_default =
      prompt_loss_and_grads(inst.tpl, inst.enc, inst.image_feats, inst.labels,
                            inst.category_tokens, inst.pool, 0.3);
  CHECK(at_default.total == at_default.align + 0.3 * at_default.sim);

  CHECK_THROWS_AS(
      prompt_loss_and_grads(inst.tpl, inst.enc, inst.image_feats, inst.labels,
                            inst.category_tokens, inst.pool, -0.1),
      ConfigError);
}

TEST_CASE("prompt gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    PromptInstance inst =
        random_instance(seed, 2 + seed % 2, 1 + seed % 3, 1 + seed % 4);
    const double lambda = 0.3;
    const auto result =
        prompt_loss_and_grads(inst.tpl, inst.enc, inst.image_feats, inst.labels,
                              inst.category_tokens, inst.pool, lambda);
    const auto loss_at = [&](const Vec& c1, const Vec& c2) {
      PromptTemplate probe{c1, c2};
      const TextFeatureGrid grid =
          build_text_grid(probe, inst.enc, inst.category_tokens, inst.pool);
      return alignment_loss(inst.image_feats, inst.labels, grid) +
             lambda * similarity_loss(grid);
    };
    const Vec fd1 = central_difference_gradient(
        [&](const Vec& v) { return loss_at(v, inst.tpl.ctx2); }, inst.tpl.ctx1,
        1e-5);
    const Vec fd2 = central_difference_gradient(
        [&](const Vec& v) { return loss_at(inst.tpl.ctx1, v); }, inst.tpl.ctx2,
        1e-5);
    double mag = 1e-4;
    for (double v : fd1) mag = std::max(mag, std::fabs(v));
    for (double v : fd2) mag = std::max(mag, std::fabs(v));
    CHECK(max_abs_diff(result.grad_ctx1, fd1) <= 1e-5 * mag);
    CHECK(max_abs_diff(result.grad_ctx2, fd2) <= 1e-5 * mag);
  }
}

TEST_CASE("diagonal similarity terms carry no gradient") {
  // The similarity gradient of the full double sum must equal the gradient
  // of the off-diagonal-only variant.
  PromptInstance inst = random_instance(17, 2, 3, 2);
  const double lambda = 1.0;
  const auto result = prompt_loss_and_grads(
      inst.tpl, inst.enc, inst.image_feats, inst.labels, inst.category_tokens,
      inst.pool, lambda, PromptLossMode::kSimOnly);
  const auto off_diag_loss = [&](const Vec& c1) {
    PromptTemplate probe{c1, inst.tpl.ctx2};
    const TextFeatureGrid grid =
        build_text_grid(probe, inst.enc, inst.category_tokens, inst.pool);
    double total = 0.0;
    for (std::size_t i = 0; i < grid.n_categories; ++i) {
      for (std::size_t j = 0; j < grid.n_domain_words; ++j) {
        for (std::size_t jp = 0; jp < grid.n_domain_words; ++jp) {
          if (j == jp) continue;
          total += cosine(grid.cell(i, j), grid.cell(i, jp));
        }
      }
    }
    return lambda * total /
           (static_cast<double>(grid.n_categories) *
            static_cast<double>(grid.n_domain_words) *
            static_cast<double>(grid.n_domain_words));
  };
  const Vec fd = central_difference_gradient(off_diag_loss, inst.tpl.ctx1, 1e-5);
  double mag = 1e-4;
  for (double v : fd) mag = std::max(mag, std::fabs(v));
  CHECK(max_abs_diff(result.grad_ctx1, fd) <= 1e-5 * mag);
}

TEST_CASE("one small SGD step decreases the prompt loss") {
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    PromptInstance inst = random_instance(seed, 3, 4, 8);
    const double lambda = 0.3;
    const auto result =
        prompt_loss_and_grads(inst.tpl, inst.enc, inst.image_feats, inst.labels,
                              inst.category_tokens, inst.pool, lambda);
    PromptTemplate stepped = inst.tpl;
    SgdState s1, s2;
    sgd_step(s1, stepped.ctx1, result.grad_ctx1, 1e-4);
    sgd_step(s2, stepped.ctx2, result.grad_ctx2, 1e-4);
    const auto after =
        prompt_loss_and_grads(stepped, inst.enc, inst.image_feats, inst.labels,
                              inst.category_tokens, inst.pool, lambda);
    CHECK(after.total < result.total);
  }
}

TEST_CASE("alignment-only training raises the matched cosine monotonically") {
  // Text features start near the image class means; 50 prompt-only steps at
  // lambda = 0 must not decrease the mean matched cosine.
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    RngStream rng(seed, "align-warm");
    const std::size_t d = 4;
    const std::size_t d_tok = 8;
    const TextEncoder enc = make_text_encoder(d, d_tok, rng);
    const std::size_t n_c = 3;
    const std::size_t n_d = 2;

    // image features clustered per class
    std::vector<Vec> class_means;
    for (std::size_t c = 0; c < n_c; ++c) {
      class_means.push_back(rng.gaussian_vec(d, 1.0));
    }
    std::vector<Vec> images;
    std::vector<int> labels;
    for (std::size_t c = 0; c < n_c; ++c) {
      for (int rep = 0; rep < 4; ++rep) {
        Vec z = class_means[c];
        axpy(1.0, rng.gaussian_vec(d, 0.1), z);
        images.push_back(std::move(z));
        labels.push_back(static_cast<int>(c));
      }
    }

    // category tokens solved so projection(token)/4 ~ class mean:
    // use projection^T (P P^T)^-1 is overkill; least squares via a few
    // gradient steps is enough to start "near" the means.
    std::vector<Vec> cats;
    for (std::size_t c = 0; c < n_c; ++c) {
      Vec token(d_tok, 0.0);
      for (int it = 0; it < 500; ++it) {
        const Vec residual =
            sub(matvec(enc.projection, scaled(token, 0.25)), class_means[c]);
        Vec grad = matvec_transposed(enc.projection, residual);
        axpy(-0.05, grad, token);
      }
      axpy(1.0, rng.gaussian_vec(d_tok, 0.05), token);
      cats.push_back(std::move(token));
    }
    DomainWordPool pool = pool_with_tokens(rng, n_d, d_tok);
    for (Vec& tok : pool.token_embeddings) scale_in_place(tok, 0.2);

    RngStream init_rng(seed, "align-warm-init");
    PromptTemplate tpl = init_prompt(d_tok, init_rng);
    SgdState s1, s2;
    double prev = -2.0;
    for (int step = 0; step < 50; ++step) {
      const auto result = prompt_loss_and_grads(tpl, enc, images, labels, cats,
                                                pool, 0.0);
      const double matched_cos = -result.align;
      CHECK(matched_cos >= prev - 1e-9);
      prev = matched_cos;
      sgd_step(s1, tpl.ctx1, result.grad_ctx1, 1e-3);
      sgd_step(s2, tpl.ctx2, result.grad_ctx2, 1e-3);
    }
  }
}
