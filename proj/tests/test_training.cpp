#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tdg/checkpoint.hpp"
#include "tdg/classifier.hpp"
#include "tdg/optim.hpp"
#include "tdg/rng.hpp"
#include "tdg/train.hpp"
#include "tdg/word_pool.hpp"

using namespace tdg;

namespace {

BenchmarkSpec small_spec() {
  BenchmarkSpec spec;
  spec.n_categories = 3;
  spec.n_domains = 3;
  spec.samples_per_class_per_domain = 20;
  spec.latent_dim = 5;
  spec.raw_dim = 8;
  spec.token_dim = 12;
  spec.seed = 13;
  return spec;
}

TrainConfig small_config(Arm arm) {
  TrainConfig config;
  config.arm = arm;
  config.total_steps = 40;
  config.warmup_steps = 10;
  config.batch_size = 8;
  config.embed_dim = 6;
  config.val_every = 10;
  config.seed = 5;
  return config;
}

struct Capture {
  Mat enc_weight;
  Vec enc_bias;
  Mat heads;
  Vec biases;
  Vec ctx1;
  Vec ctx2;
  Mat projection;

  static Capture of(const ModelState& state) {
    return {state.image_encoder.weight, state.image_encoder.bias,
            state.cls_heads,            state.cls_biases,
            state.prompt.ctx1,          state.prompt.ctx2,
            state.text_encoder.projection};
  }
};

// Verifies the per-phase isolation contracts of the training loop.
class PhaseChecker : public TrainObserver {
 public:
  int warmup_steps;
  explicit PhaseChecker(int warmup) : warmup_steps(warmup) {}

  Capture step_start;
  Capture initial;
  bool has_initial = false;
  int violations = 0;

  void on_step_start(int /*step*/, const ModelState& state) override {
    step_start = Capture::of(state);
    if (!has_initial) {
      initial = step_start;
      has_initial = true;
    }
  }

  void after_prompt_update(int /*step*/, const ModelState& state) override {
    const Capture now = Capture::of(state);
    // prompt phase: classifier, encoder and projection must not move
    if (!(now.enc_weight == step_start.enc_weight) ||
        !(now.enc_bias == step_start.enc_bias) ||
        !(now.heads == step_start.heads) ||
        !(now.biases == step_start.biases) ||
        !(now.projection == step_start.projection)) {
      ++violations;
    }
    step_start.ctx1 = now.ctx1;
    step_start.ctx2 = now.ctx2;
  }

  void after_ce_update(int step, const ModelState& state) override {
    const Capture now = Capture::of(state);
    // cross-entropy phase: the prompt must not move
    if (!(now.ctx1 == step_start.ctx1) || !(now.ctx2 == step_start.ctx2) ||
        !(now.projection == step_start.projection)) {
      ++violations;
    }
    // during warm-up the encoder stays at initialization
    if (step < warmup_steps &&
        (!(now.enc_weight == initial.enc_weight) ||
         !(now.enc_bias == initial.enc_bias))) {
      ++violations;
    }
  }
};

}  // namespace

TEST_CASE("warmup-only run leaves the image encoder at initialization") {
  const MultiDomainDataset ds = generate_benchmark(small_spec());
  TrainConfig config = small_config(Arm::kTdg);
  config.total_steps = 15;
  config.warmup_steps = 15;
  const SplitPlan split = split_train_val(ds, {0, 1}, config.seed);
  const DomainWordPool pool = default_pool();
  const TrainedModel model = train(config, ds, split, pool);

  // reconstruct the aligned initialization independently
  RngStream init_text(config.seed, "init-text-encoder");
  const TextEncoder text_enc = make_text_encoder(
      static_cast<std::size_t>(config.embed_dim),
      static_cast<std::size_t>(ds.spec.token_dim), init_text);
  const ImageEncoder fresh = make_aligned_image_encoder(
      text_enc, ds, static_cast<std::size_t>(config.embed_dim));
  // model selection may pick any step, but the encoder never moved
  CHECK(model.state.image_encoder.weight == fresh.weight);
  CHECK(model.state.image_encoder.bias == fresh.bias);
}

TEST_CASE("aligned backbone maps source images toward their class anchors") {
  const MultiDomainDataset ds = generate_benchmark(small_spec());
  RngStream init_text(5, "init-text-encoder");
  const TextEncoder text_enc = make_text_encoder(6, 12, init_text);
  const ImageEncoder enc = make_aligned_image_encoder(text_enc, ds, 6);

  std::vector<Vec> anchors;
  for (const Vec& token : ds.vocabulary.category_tokens) {
    anchors.push_back(normalized(matvec(text_enc.projection, token)));
  }
  double matched = 0.0;
  double mismatched = 0.0;
  std::size_t pairs = 0;
  for (const Sample& sample : ds.samples) {
    const Vec z = encode_image(enc, sample.x);
    for (int c = 0; c < ds.spec.n_categories; ++c) {
      const double cs = cosine(z, anchors[static_cast<std::size_t>(c)]);
      if (c == sample.label) {
        matched += cs;
      } else {
        mismatched += cs;
        ++pairs;
      }
    }
  }
  matched /= static_cast<double>(ds.samples.size());
  mismatched /= static_cast<double>(pairs);
  // pretrained-style alignment: own-class anchor clearly closest on average
  CHECK(matched > 0.5);
  CHECK(matched > mismatched + 0.3);

  // one fixed backbone per dataset, regardless of how it is consumed
  const ImageEncoder again = make_aligned_image_encoder(text_enc, ds, 6);
  CHECK(again.weight == enc.weight);
  CHECK(again.bias == enc.bias);
}

TEST_CASE("training is deterministic in (config, seed)") {
  const MultiDomainDataset ds = generate_benchmark(small_spec());
  const SplitPlan split = split_train_val(ds, {0, 1}, 5);
  const DomainWordPool pool = default_pool();
  for (Arm arm : {Arm::kErm, Arm::kText, Arm::kTdg}) {
    const TrainConfig config = small_config(arm);
    const TrainedModel a = train(config, ds, split, pool);
    const TrainedModel b = train(config, ds, split, pool);
    CHECK(serialize_model(a) == serialize_model(b));
    CHECK(a.trace.size() == static_cast<std::size_t>(config.total_steps));
  }
}

TEST_CASE("phase isolation holds for every arm") {
  const MultiDomainDataset ds = generate_benchmark(small_spec());
  const SplitPlan split = split_train_val(ds, {0, 2}, 5);
  const DomainWordPool pool = default_pool();
  for (Arm arm : {Arm::kErm, Arm::kText, Arm::kTdg}) {
    const TrainConfig config = small_config(arm);
    PhaseChecker checker(config.warmup_steps);
    const TrainedModel model = train(config, ds, split, pool, &checker);
    CHECK(checker.violations == 0);
    // frozen text encoder, end to end
    CHECK(model.state.text_encoder.projection == checker.initial.projection);
  }
}

TEST_CASE("prompt moves only for text arms") {
  const MultiDomainDataset ds = generate_benchmark(small_spec());
  const SplitPlan split = split_train_val(ds, {0, 1}, 5);
  const DomainWordPool pool = default_pool();

  const TrainedModel erm = train(small_config(Arm::kErm), ds, split, pool);
  RngStream prompt_rng(erm.config.seed, "init-prompt");
  const PromptTemplate fresh =
      init_prompt(static_cast<std::size_t>(ds.spec.token_dim), prompt_rng);
  CHECK(erm.state.prompt.ctx1 == fresh.ctx1);
  CHECK(erm.state.prompt.ctx2 == fresh.ctx2);

  const TrainedModel tdg = train(small_config(Arm::kTdg), ds, split, pool);
  CHECK_FALSE(tdg.state.prompt.ctx1 == fresh.ctx1);
}

TEST_CASE("training never reads target-domain samples") {
  // Corrupt every target-domain sample; the trained model must be
  // byte-identical to training on the clean dataset.
  const MultiDomainDataset clean = generate_benchmark(small_spec());
  MultiDomainDataset corrupted = clean;
  const int target = 2;
  for (Sample& s : corrupted.samples) {
    if (s.domain == target) {
      for (double& v : s.x) v = 1e9;
    }
  }
  SplitPlan split = split_train_val(clean, {0, 1}, 5);
  split.target_domain = target;
  const DomainWordPool pool = default_pool();
  const TrainConfig config = small_config(Arm::kTdg);
  const TrainedModel on_clean = train(config, clean, split, pool);
  const TrainedModel on_corrupted = train(config, corrupted, split, pool);
  CHECK(serialize_model(on_clean) == serialize_model(on_corrupted));
}

TEST_CASE("split leaking the target domain is rejected") {
  const MultiDomainDataset ds = generate_benchmark(small_spec());
  SplitPlan split = split_train_val(ds, {0, 1}, 5);
  split.target_domain = 1;  // declared target overlaps a source
  const DomainWordPool pool = default_pool();
  CHECK_THROWS_AS(train(small_config(Arm::kTdg), ds, split, pool),
                  ValidationError);
}

TEST_CASE("empty training split is a config error") {
  const MultiDomainDataset ds = generate_benchmark(small_spec());
  SplitPlan split;
  split.source_domains = {0};
  const DomainWordPool pool = default_pool();
  CHECK_THROWS_AS(train(small_config(Arm::kTdg), ds, split, pool), ConfigError);
}

TEST_CASE("image cross-entropy is non-increasing on a repeated batch") {
  // Warm-up style classifier-only updates on one fixed batch.
  int monotone_seeds = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    RngStream rng(seed, "fixed-batch");
    const std::size_t d = 6;
    const std::size_t n_c = 3;
    NormalizedClassifier cls = make_normalized_classifier(n_c, d, 10.0, rng);
    std::vector<Vec> features;
    std::vector<int> labels;
    for (int n = 0; n < 16; ++n) {
      features.push_back(rng.gaussian_vec(d, 1.0));
      labels.push_back(static_cast<int>(rng.next_below(n_c)));
    }
    AdamState opt;
    bool monotone = true;
    double prev = 1e300;
    for (int step = 0; step < 20; ++step) {
      std::vector<Prediction> preds;
      Mat grads(n_c, d);
      for (std::size_t n = 0; n < features.size(); ++n) {
        preds.push_back(predict_normalized(cls, features[n]));
        const ClassifierGrads g = normalized_backward(cls, features[n], labels[n]);
        axpy(1.0 / static_cast<double>(features.size()), g.heads.data, grads.data);
      }
      const double loss = cross_entropy_image(preds, labels);
      if (loss > prev + 1e-12) monotone = false;
      prev = loss;
      adam_step(opt, cls.heads.data, grads.data, 1e-3);
    }
    monotone_seeds += monotone ? 1 : 0;
  }
  CHECK(monotone_seeds >= 8);
}

TEST_CASE("evaluate anchors") {
  const MultiDomainDataset ds = generate_benchmark(small_spec());

  SUBCASE("constant classifier scores exactly 1/N_c on a balanced domain") {
    TrainedModel model;
    model.config = small_config(Arm::kErm);
    model.state.image_encoder.weight = Mat(6, 8);
    model.state.image_encoder.bias = Vec(6, 0.0);
    model.state.cls_heads = Mat(3, 6);  // all-zero heads -> constant logits
    model.state.cls_biases = Vec(3, 0.0);
    model.state.logit_scale = 10.0;
    model.ema.encoder_weight = model.state.image_encoder.weight.data;
    model.ema.encoder_bias = model.state.image_encoder.bias;
    model.ema.cls_heads = model.state.cls_heads.data;
    model.ema.cls_biases = model.state.cls_biases;
    // argmax ties resolve to class 0, which holds exactly 1/3 of the domain
    CHECK(evaluate(model, ds, 0, false) == doctest::Approx(1.0 / 3.0));
    CHECK(evaluate(model, ds, 0, true) == doctest::Approx(1.0 / 3.0));
  }

  SUBCASE("memorization: train and evaluate on the same noiseless domain") {
    BenchmarkSpec spec = small_spec();
    spec.noise_std = 0.0;
    spec.samples_per_class_per_domain = 12;
    const MultiDomainDataset clean = generate_benchmark(spec);
    TrainConfig config = small_config(Arm::kErm);
    config.total_steps = 300;
    config.warmup_steps = 30;
    config.ema_decay = 0.9;
    const SplitPlan split = split_train_val(clean, {0}, config.seed);
    const DomainWordPool pool = default_pool();
    const TrainedModel model = train(config, clean, split, pool);
    CHECK(evaluate(model, clean, 0, true) == 1.0);
  }

  SUBCASE("ema and live weights disagree whenever shadows lag") {
    TrainConfig config = small_config(Arm::kTdg);
    const SplitPlan split = split_train_val(ds, {0, 1}, config.seed);
    const DomainWordPool pool = default_pool();
    const TrainedModel model = train(config, ds, split, pool);
    CHECK_FALSE(model.ema.cls_heads == model.state.cls_heads.data);
    // different weights generally mean different accuracy; at minimum the
    // evaluation path must distinguish them
    const double live = evaluate(model, ds, 2, false);
    const double ema = evaluate(model, ds, 2, true);
    CHECK(std::isfinite(live));
    CHECK(std::isfinite(ema));
  }

  SUBCASE("errors") {
    TrainConfig config = small_config(Arm::kErm);
    const SplitPlan split = split_train_val(ds, {0}, config.seed);
    const DomainWordPool pool = default_pool();
    const TrainedModel model = train(config, ds, split, pool);
    CHECK_THROWS_AS(evaluate(model, ds, 9, true), IndexError);
  }
}

TEST_CASE("checkpoint round trip is byte-stable") {
  const MultiDomainDataset ds = generate_benchmark(small_spec());
  const SplitPlan split = split_train_val(ds, {0, 1}, 5);
  const DomainWordPool pool = default_pool();
  for (Arm arm : {Arm::kErm, Arm::kTdg}) {
    const TrainedModel model = train(small_config(arm), ds, split, pool);
    const std::string text = serialize_model(model);
    const TrainedModel loaded = deserialize_model(text);
    CHECK(serialize_model(loaded) == text);
    CHECK(loaded.config == model.config);
    CHECK(loaded.trace == model.trace);
    CHECK(loaded.state.cls_heads == model.state.cls_heads);
    // behaviourally identical too
    CHECK(evaluate(loaded, ds, 2, true) == evaluate(model, ds, 2, true));
  }
}

TEST_CASE("config validation") {
  TrainConfig config;
  config.warmup_steps = 700;
  CHECK_THROWS_AS(validate_config(config), ConfigError);
  config = TrainConfig{};
  config.ema_decay = 1.0;
  CHECK_THROWS_AS(validate_config(config), ConfigError);
  config = TrainConfig{};
  config.batch_size = 0;
  CHECK_THROWS_AS(validate_config(config), ConfigError);
  config = TrainConfig{};
  config.lambda = -1.0;
  CHECK_THROWS_AS(validate_config(config), ConfigError);
}
