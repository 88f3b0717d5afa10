#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tdg/classifier.hpp"
#include "tdg/encoders.hpp"
#include "tdg/optim.hpp"
#include "tdg/prompt.hpp"
#include "tdg/synthetic.hpp"
#include "tdg/word_pool.hpp"

namespace tdg {

// Training arm. ERM: linear classifier, no text. TEXT: linear classifier
// plus prompt learning and the text cross-entropy term. TDG: the same text
// path with the normalized classifier.
enum class Arm { kErm, kText, kTdg };

// Extends PromptLossMode with the text-free ablation baseline.
enum class TextMode { kNone, kAlignOnly, kSimOnly, kBoth };

std::string arm_name(Arm arm);
Arm parse_arm(const std::string& name);
std::string text_mode_name(TextMode mode);
TextMode parse_text_mode(const std::string& name);

struct TrainConfig {
  double lambda = 0.3;
  int total_steps = 600;
  int warmup_steps = 60;
  int batch_size = 32;
  double lr_classifier = 1e-3;
  double lr_encoder = 1e-4;
  double lr_prompt = 1e-3;
  double ema_decay = 0.99;  // 0.999 belongs to the 3000-step finetune preset
  double logit_scale = 10.0;
  std::uint64_t seed = 0;
  Arm arm = Arm::kTdg;
  TextMode text_mode = TextMode::kBoth;  // ignored by the ERM arm
  int val_every = 20;
  int embed_dim = 16;  // shared text/image space dimension

  bool operator==(const TrainConfig&) const = default;
};

void validate_config(const TrainConfig& config);

// Everything with parameters, trainable or frozen.
struct ModelState {
  TextEncoder text_encoder;  // frozen after construction
  ImageEncoder image_encoder;
  Mat cls_heads;
  Vec cls_biases;  // linear arms only (empty otherwise)
  double logit_scale = 10.0;
  PromptTemplate prompt;
};

// Shadows of the trainable classifier/encoder parameters; the prompt is not
// averaged (only the entities updated in the cross-entropy phase are).
struct EmaShadows {
  Vec encoder_weight;
  Vec encoder_bias;
  Vec cls_heads;
  Vec cls_biases;
  double decay = 0.999;
};

struct LossTraceRow {
  int step = 0;
  double image_ce = 0.0;
  double text_ce = 0.0;
  double align = 0.0;
  double sim = 0.0;
  double prompt_total = 0.0;

  bool operator==(const LossTraceRow&) const = default;
};

struct TrainedModel {
  TrainConfig config;
  ModelState state;       // parameters at the selected checkpoint
  EmaShadows ema;         // shadows at the selected checkpoint
  std::vector<LossTraceRow> trace;  // full run
  int selected_step = 0;
  double best_val_accuracy = 0.0;

  bool uses_linear_classifier() const { return config.arm != Arm::kTdg; }
};

// Test instrumentation: called with the full parameter state at phase
// boundaries inside each step. No-op defaults.
class TrainObserver {
 public:
  virtual ~TrainObserver() = default;
  virtual void on_step_start(int /*step*/, const ModelState& /*state*/) {}
  virtual void after_prompt_update(int /*step*/, const ModelState& /*state*/) {}
  virtual void after_ce_update(int /*step*/, const ModelState& /*state*/) {}
};

// Pretrained-backbone stand-in, one fixed encoder per dataset shared by
// every arm and protocol: a closed-form ridge fit of generic class
// renderings (base map applied to noisy prototypes) onto their unit-norm
// class text anchors. It knows what the classes look like in general but
// has never seen any of the benchmark domains, the way encoders pretrained
// on broad aligned pairs arrive at a downstream task.
ImageEncoder make_aligned_image_encoder(const TextEncoder& text_enc,
                                        const MultiDomainDataset& ds,
                                        std::size_t shared_dim);

// Runs the full per-batch loop: encode and predict the image batch; update
// the prompt on the alignment/similarity objective and rebuild the text
// grid; update classifier (and, after warm-up, the image encoder) on the
// image + text cross-entropy; track EMA shadows; select the checkpoint with
// the best pooled-source validation accuracy (EMA weights).
TrainedModel train(const TrainConfig& config, const MultiDomainDataset& ds,
                   const SplitPlan& split, const DomainWordPool& pool,
                   TrainObserver* observer = nullptr);

// Fraction of correct argmax predictions over every sample of the domain;
// ties break to the lowest class index.
double evaluate(const TrainedModel& model, const MultiDomainDataset& ds,
                int domain, bool use_ema);

// Accuracy over an explicit index set (validation-split evaluation).
double evaluate_indices(const TrainedModel& model, const MultiDomainDataset& ds,
                        const std::vector<int>& indices, bool use_ema);

}  // namespace tdg
