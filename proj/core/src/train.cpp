#include "tdg/train.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "tdg/error.hpp"

namespace tdg {

std::string arm_name(Arm arm) {
  switch (arm) {
    case Arm::kErm:
      return "ERM";
    case Arm::kText:
      return "TEXT";
    case Arm::kTdg:
      return "TDG";
  }
  throw ConfigError("arm_name: unknown arm");
}

Arm parse_arm(const std::string& name) {
  if (name == "ERM") return Arm::kErm;
  if (name == "TEXT") return Arm::kText;
  if (name == "TDG") return Arm::kTdg;
  throw ConfigError("unknown arm \"" + name + "\" (expected ERM, TEXT or TDG)");
}

std::string text_mode_name(TextMode mode) {
  switch (mode) {
    case TextMode::kNone:
      return "none";
    case TextMode::kAlignOnly:
      return "align_only";
    case TextMode::kSimOnly:
      return "sim_only";
    case TextMode::kBoth:
      return "both";
  }
  throw ConfigError("text_mode_name: unknown mode");
}

TextMode parse_text_mode(const std::string& name) {
  if (name == "none") return TextMode::kNone;
  if (name == "align_only") return TextMode::kAlignOnly;
  if (name == "sim_only") return TextMode::kSimOnly;
  if (name == "both") return TextMode::kBoth;
  throw ConfigError("unknown text mode \"" + name +
                    "\" (expected none, align_only, sim_only or both)");
}

void validate_config(const TrainConfig& config) {
  if (config.warmup_steps < 0 || config.warmup_steps > config.total_steps) {
    throw ConfigError("config: need 0 <= warmup_steps <= total_steps");
  }
  if (config.total_steps < 1) {
    throw ConfigError("config: total_steps must be >= 1");
  }
  if (config.batch_size < 1) {
    throw ConfigError("config: batch_size must be >= 1");
  }
  if (!(config.lr_classifier > 0.0) || !(config.lr_encoder > 0.0) ||
      !(config.lr_prompt > 0.0)) {
    throw ConfigError("config: learning rates must be positive");
  }
  if (config.lambda < 0.0) {
    throw ConfigError("config: lambda must be nonnegative");
  }
  if (!(config.ema_decay >= 0.0) || !(config.ema_decay < 1.0)) {
    throw ConfigError("config: ema_decay must lie in [0, 1)");
  }
  if (!(config.logit_scale > 0.0)) {
    throw ConfigError("config: logit_scale must be positive");
  }
  if (config.val_every < 1) {
    throw ConfigError("config: val_every must be >= 1");
  }
  if (config.embed_dim < 1) {
    throw ConfigError("config: embed_dim must be >= 1");
  }
}

namespace {

// Pretraining corpus for the backbone stand-in: renderings per class and
// the latent jitter applied around each prototype.
constexpr int kPretrainPerClass = 64;
constexpr double kPretrainLatentJitter = 0.25;

bool arm_uses_text(const TrainConfig& config) {
  return config.arm != Arm::kErm && config.text_mode != TextMode::kNone;
}

PromptLossMode to_prompt_mode(TextMode mode) {
  switch (mode) {
    case TextMode::kAlignOnly:
      return PromptLossMode::kAlignOnly;
    case TextMode::kSimOnly:
      return PromptLossMode::kSimOnly;
    default:
      return PromptLossMode::kBoth;
  }
}

Prediction predict(const ModelState& state, bool linear, const Vec& z) {
  if (linear) {
    LinearClassifier cls{state.cls_heads, state.cls_biases};
    return predict_linear(cls, z);
  }
  NormalizedClassifier cls{state.cls_heads, state.logit_scale};
  return predict_normalized(cls, z);
}

void require_finite_loss(double value, int step, const char* what) {
  if (!std::isfinite(value)) {
    throw NumericError(std::string("train: non-finite ") + what + " (" +
                       std::to_string(value) + ") at step " +
                       std::to_string(step));
  }
}

void require_finite_grad(const Vec& grad, int step, const char* name) {
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) {
      throw NumericError("train: non-finite gradient for " + std::string(name) +
                         " at step " + std::to_string(step) + ", index " +
                         std::to_string(i) + ", value " +
                         std::to_string(grad[i]));
    }
  }
}

struct BestCheckpoint {
  ModelState state;
  EmaShadows ema;
  int step = 0;
  double accuracy = -1.0;
};

double accuracy_over(const ModelState& state, bool linear,
                     const MultiDomainDataset& ds,
                     const std::vector<int>& indices) {
  if (indices.empty()) {
    throw DegenerateInputError("evaluate: empty index set");
  }
  std::size_t correct = 0;
  for (int idx : indices) {
    const Sample& sample = ds.samples[static_cast<std::size_t>(idx)];
    const Vec z = encode_image(state.image_encoder, sample.x);
    const Prediction pred = predict(state, linear, z);
    if (static_cast<int>(argmax_lowest_tie(pred.logits)) == sample.label) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(indices.size());
}

ModelState with_ema_weights(const ModelState& state, const EmaShadows& ema) {
  ModelState out = state;
  out.image_encoder.weight.data = ema.encoder_weight;
  out.image_encoder.bias = ema.encoder_bias;
  out.cls_heads.data = ema.cls_heads;
  out.cls_biases = ema.cls_biases;
  return out;
}

}  // namespace

ImageEncoder make_aligned_image_encoder(const TextEncoder& text_enc,
                                        const MultiDomainDataset& ds,
                                        std::size_t shared_dim) {
  const auto m = static_cast<std::size_t>(ds.spec.raw_dim);
  const auto k_dim = static_cast<std::size_t>(ds.spec.latent_dim);
  const std::size_t dim = m + 1;  // bias column
  std::vector<Vec> anchors;
  anchors.reserve(ds.vocabulary.category_tokens.size());
  for (const Vec& token : ds.vocabulary.category_tokens) {
    anchors.push_back(normalized(matvec(text_enc.projection, token)));
  }

  // Generic renderings: base map over jittered prototypes. Keyed by the
  // dataset seed only, so every run on this dataset shares one backbone.
  RngStream pretrain(ds.spec.seed, "pretrain-renderings");
  Mat gram(dim, dim);
  Mat rhs(dim, shared_dim);
  Vec aug(dim, 1.0);
  for (std::size_t cls = 0; cls < anchors.size(); ++cls) {
    const Vec proto = ds.class_prototypes.row_vec(cls);
    for (int rep = 0; rep < kPretrainPerClass; ++rep) {
      Vec latent = proto;
      axpy(1.0, pretrain.gaussian_vec(k_dim, kPretrainLatentJitter), latent);
      const Vec x = matvec(ds.base_map, latent);
      std::copy(x.begin(), x.end(), aug.begin());
      const Vec& anchor = anchors[cls];
      for (std::size_t i = 0; i < dim; ++i) {
        for (std::size_t j = 0; j < dim; ++j) {
          gram.at(i, j) += aug[i] * aug[j];
        }
        for (std::size_t c = 0; c < shared_dim; ++c) {
          rhs.at(i, c) += aug[i] * anchor[c];
        }
      }
    }
  }
  const double n_pretrain =
      static_cast<double>(anchors.size()) * kPretrainPerClass;
  for (std::size_t i = 0; i < dim; ++i) {
    gram.at(i, i) += 1e-3 * n_pretrain;
  }
  const Mat solution = solve_spd(std::move(gram), std::move(rhs));

  ImageEncoder enc;
  enc.weight = Mat(shared_dim, m);
  enc.bias = Vec(shared_dim, 0.0);
  for (std::size_t c = 0; c < shared_dim; ++c) {
    for (std::size_t j = 0; j < m; ++j) {
      enc.weight.at(c, j) = solution.at(j, c);
    }
    enc.bias[c] = solution.at(m, c);
  }
  return enc;
}

TrainedModel train(const TrainConfig& config, const MultiDomainDataset& ds,
                   const SplitPlan& split, const DomainWordPool& pool,
                   TrainObserver* observer) {
  validate_config(config);
  if (split.train_indices.empty()) {
    throw ConfigError("train: empty training split");
  }
  for (int idx : split.train_indices) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= ds.samples.size()) {
      throw IndexError("train: split index out of range");
    }
  }
  // Target isolation: every index must come from a declared source domain.
  for (const auto* indices : {&split.train_indices, &split.val_indices}) {
    for (int idx : *indices) {
      const int dom = ds.samples[static_cast<std::size_t>(idx)].domain;
      if (split.target_domain >= 0 && dom == split.target_domain) {
        throw ValidationError("train: split leaks target domain " +
                              std::to_string(dom));
      }
      if (!std::count(split.source_domains.begin(), split.source_domains.end(),
                      dom)) {
        throw ValidationError("train: split contains non-source domain " +
                              std::to_string(dom));
      }
    }
  }

  const bool use_text = arm_uses_text(config);
  const bool linear = config.arm != Arm::kTdg;
  const auto n_c = static_cast<std::size_t>(ds.spec.n_categories);
  const auto d = static_cast<std::size_t>(config.embed_dim);
  const auto m = static_cast<std::size_t>(ds.spec.raw_dim);
  const auto d_tok = static_cast<std::size_t>(ds.spec.token_dim);

  DomainWordPool pool_with_tokens;
  if (use_text) {
    if (pool.size() == 0) {
      throw ConfigError("train: TEXT/TDG arms require a word pool");
    }
    pool_with_tokens = pool;
    if (pool_with_tokens.token_embeddings.size() != pool_with_tokens.size()) {
      assign_pool_tokens(pool_with_tokens, ds.vocabulary);
    }
  }

  ModelState state;
  {
    RngStream init_text(config.seed, "init-text-encoder");
    state.text_encoder = make_text_encoder(d, d_tok, init_text);
    state.image_encoder = make_aligned_image_encoder(state.text_encoder, ds, d);
    RngStream init_cls(config.seed, "init-classifier");
    if (linear) {
      LinearClassifier cls = make_linear_classifier(n_c, d, init_cls);
      state.cls_heads = std::move(cls.heads);
      state.cls_biases = std::move(cls.biases);
    } else {
      NormalizedClassifier cls =
          make_normalized_classifier(n_c, d, config.logit_scale, init_cls);
      state.cls_heads = std::move(cls.heads);
    }
    state.logit_scale = config.logit_scale;
    RngStream init_prompt_rng(config.seed, "init-prompt");
    state.prompt = init_prompt(d_tok, init_prompt_rng);
  }

  EmaShadows ema;
  ema.decay = config.ema_decay;
  ema.encoder_weight = state.image_encoder.weight.data;
  ema.encoder_bias = state.image_encoder.bias;
  ema.cls_heads = state.cls_heads.data;
  ema.cls_biases = state.cls_biases;

  EmaState ema_enc_w = make_ema(ema.encoder_weight, config.ema_decay);
  EmaState ema_enc_b = make_ema(ema.encoder_bias, config.ema_decay);
  EmaState ema_heads = make_ema(ema.cls_heads, config.ema_decay);
  EmaState ema_biases = make_ema(ema.cls_biases, config.ema_decay);

  AdamState opt_heads;
  AdamState opt_biases;
  AdamState opt_enc_w;
  AdamState opt_enc_b;
  SgdState opt_ctx1;
  SgdState opt_ctx2;

  RngStream sampler(config.seed, "batch-sampler");
  TrainedModel result;
  result.config = config;
  BestCheckpoint best;

  const auto snapshot_ema = [&]() {
    ema.encoder_weight = ema_enc_w.shadow;
    ema.encoder_bias = ema_enc_b.shadow;
    ema.cls_heads = ema_heads.shadow;
    ema.cls_biases = ema_biases.shadow;
  };

  for (int step = 0; step < config.total_steps; ++step) {
    if (observer) observer->on_step_start(step, state);

    // (1) sample a batch and encode/predict the images
    std::vector<Vec> batch_x(static_cast<std::size_t>(config.batch_size));
    std::vector<int> batch_y(static_cast<std::size_t>(config.batch_size));
    std::vector<Vec> batch_z(static_cast<std::size_t>(config.batch_size));
    std::vector<Prediction> batch_preds(static_cast<std::size_t>(config.batch_size));
    for (int b = 0; b < config.batch_size; ++b) {
      const int idx = split.train_indices[static_cast<std::size_t>(
          sampler.next_below(split.train_indices.size()))];
      const Sample& sample = ds.samples[static_cast<std::size_t>(idx)];
      batch_x[static_cast<std::size_t>(b)] = sample.x;
      batch_y[static_cast<std::size_t>(b)] = sample.label;
      batch_z[static_cast<std::size_t>(b)] =
          encode_image(state.image_encoder, sample.x);
      batch_preds[static_cast<std::size_t>(b)] =
          predict(state, linear, batch_z[static_cast<std::size_t>(b)]);
    }

    LossTraceRow row;
    row.step = step;

    // (2) one prompt update on the alignment/similarity objective; image
    // features are constants here.
    TextFeatureGrid grid;
    if (use_text) {
      const PromptLossResult prompt_loss = prompt_loss_and_grads(
          state.prompt, state.text_encoder, batch_z, batch_y,
          ds.vocabulary.category_tokens, pool_with_tokens, config.lambda,
          to_prompt_mode(config.text_mode));
      require_finite_loss(prompt_loss.total, step, "prompt loss");
      require_finite_grad(prompt_loss.grad_ctx1, step, "prompt.ctx1");
      require_finite_grad(prompt_loss.grad_ctx2, step, "prompt.ctx2");
      sgd_step(opt_ctx1, state.prompt.ctx1, prompt_loss.grad_ctx1,
               config.lr_prompt);
      sgd_step(opt_ctx2, state.prompt.ctx2, prompt_loss.grad_ctx2,
               config.lr_prompt);
      row.align = prompt_loss.align;
      row.sim = prompt_loss.sim;
      row.prompt_total = prompt_loss.total;
      if (observer) observer->after_prompt_update(step, state);

      // (3) rebuild the grid from the updated template
      grid = build_text_grid(state.prompt, state.text_encoder,
                             ds.vocabulary.category_tokens, pool_with_tokens);
    } else if (observer) {
      observer->after_prompt_update(step, state);
    }

    // (4) cross-entropy losses and gradients
    row.image_ce = cross_entropy_image(batch_preds, batch_y);
    require_finite_loss(row.image_ce, step, "image cross-entropy");

    Mat head_grads(n_c, d);
    Vec bias_grads(linear ? n_c : 0, 0.0);
    Mat enc_w_grads(d, m);
    Vec enc_b_grads(d, 0.0);
    const double inv_batch = 1.0 / static_cast<double>(config.batch_size);
    for (int b = 0; b < config.batch_size; ++b) {
      const auto bi = static_cast<std::size_t>(b);
      ClassifierGrads grads;
      if (linear) {
        LinearClassifier cls{state.cls_heads, state.cls_biases};
        grads = linear_backward(cls, batch_z[bi], batch_y[bi]);
      } else {
        NormalizedClassifier cls{state.cls_heads, state.logit_scale};
        grads = normalized_backward(cls, batch_z[bi], batch_y[bi]);
      }
      axpy(inv_batch, grads.heads.data, head_grads.data);
      if (linear) axpy(inv_batch, grads.biases, bias_grads);
      // image loss drives the encoder through the feature gradient
      const ImageEncoderGrads enc_grads = encode_image_grads(
          state.image_encoder, batch_x[bi], grads.feature);
      axpy(inv_batch, enc_grads.weight.data, enc_w_grads.data);
      axpy(inv_batch, enc_grads.bias, enc_b_grads);
    }

    if (use_text) {
      PredictionGrid grid_preds;
      grid_preds.n_categories = grid.n_categories;
      grid_preds.n_domain_words = grid.n_domain_words;
      grid_preds.cells.reserve(grid.features.size());
      for (const Vec& z : grid.features) {
        grid_preds.cells.push_back(predict(state, linear, z));
      }
      row.text_ce = cross_entropy_text(grid_preds);
      require_finite_loss(row.text_ce, step, "text cross-entropy");
      const double inv_cells = 1.0 / (static_cast<double>(grid.n_categories) *
                                      static_cast<double>(grid.n_domain_words));
      for (std::size_t i = 0; i < grid.n_categories; ++i) {
        for (std::size_t j = 0; j < grid.n_domain_words; ++j) {
          ClassifierGrads grads;
          if (linear) {
            LinearClassifier cls{state.cls_heads, state.cls_biases};
            grads = linear_backward(cls, grid.cell(i, j), static_cast<int>(i));
          } else {
            NormalizedClassifier cls{state.cls_heads, state.logit_scale};
            grads =
                normalized_backward(cls, grid.cell(i, j), static_cast<int>(i));
          }
          axpy(inv_cells, grads.heads.data, head_grads.data);
          if (linear) axpy(inv_cells, grads.biases, bias_grads);
          // text features do not depend on the image encoder or, in this
          // phase, on the prompt
        }
      }
    }

    require_finite_grad(head_grads.data, step, "classifier.heads");
    if (linear) require_finite_grad(bias_grads, step, "classifier.biases");
    require_finite_grad(enc_w_grads.data, step, "image_encoder.weight");
    require_finite_grad(enc_b_grads, step, "image_encoder.bias");

    // (5) classifier always; encoder only after warm-up
    adam_step(opt_heads, state.cls_heads.data, head_grads.data,
              config.lr_classifier);
    if (linear) {
      adam_step(opt_biases, state.cls_biases, bias_grads, config.lr_classifier);
    }
    if (step >= config.warmup_steps) {
      adam_step(opt_enc_w, state.image_encoder.weight.data, enc_w_grads.data,
                config.lr_encoder);
      adam_step(opt_enc_b, state.image_encoder.bias, enc_b_grads,
                config.lr_encoder);
    }
    if (observer) observer->after_ce_update(step, state);

    // (6) EMA shadows
    ema_update(ema_enc_w, state.image_encoder.weight.data);
    ema_update(ema_enc_b, state.image_encoder.bias);
    ema_update(ema_heads, state.cls_heads.data);
    ema_update(ema_biases, state.cls_biases);

    result.trace.push_back(row);

    const bool at_cadence = (step + 1) % config.val_every == 0;
    const bool at_end = step + 1 == config.total_steps;
    if ((at_cadence || at_end) && !split.val_indices.empty()) {
      snapshot_ema();
      const ModelState ema_state = with_ema_weights(state, ema);
      const double acc = accuracy_over(ema_state, linear, ds, split.val_indices);
      // ties go to the later checkpoint: more training under a matured EMA
      if (acc >= best.accuracy) {
        best.state = state;
        best.ema = ema;
        best.step = step + 1;
        best.accuracy = acc;
      }
    }
  }

  if (best.accuracy < 0.0) {
    // No validation samples: return the final state.
    snapshot_ema();
    best.state = state;
    best.ema = ema;
    best.step = config.total_steps;
    best.accuracy = 0.0;
  }

  result.state = std::move(best.state);
  result.ema = std::move(best.ema);
  result.selected_step = best.step;
  result.best_val_accuracy = best.accuracy;
  return result;
}

double evaluate(const TrainedModel& model, const MultiDomainDataset& ds,
                int domain, bool use_ema) {
  if (domain < 0 || domain >= ds.spec.n_domains) {
    throw IndexError("evaluate: domain " + std::to_string(domain) +
                     " out of range");
  }
  std::vector<int> indices;
  for (std::size_t idx = 0; idx < ds.samples.size(); ++idx) {
    if (ds.samples[idx].domain == domain) {
      indices.push_back(static_cast<int>(idx));
    }
  }
  if (indices.empty()) {
    throw DegenerateInputError("evaluate: domain " + std::to_string(domain) +
                               " has no samples");
  }
  return evaluate_indices(model, ds, indices, use_ema);
}

double evaluate_indices(const TrainedModel& model, const MultiDomainDataset& ds,
                        const std::vector<int>& indices, bool use_ema) {
  const ModelState state =
      use_ema ? with_ema_weights(model.state, model.ema) : model.state;
  return accuracy_over(state, model.uses_linear_classifier(), ds, indices);
}

}  // namespace tdg
