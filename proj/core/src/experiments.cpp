#include "tdg/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <utility>

#include "tdg/error.hpp"
#include "tdg/textio.hpp"
#include "tdg/version.hpp"

namespace tdg {

namespace {

std::string seeds_csv(const std::vector<std::uint64_t>& seeds) {
  std::string out;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(seeds[i]);
  }
  return out;
}

MetricsTable make_table(const AppConfig& config,
                        const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) {
    throw ConfigError("experiments: at least one seed required");
  }
  MetricsTable table;
  table.comments.push_back("tdg-metrics v1");
  table.add_comment("version", kVersion);
  table.add_comment("spec_hash", spec_hash(config.data));
  table.add_comment("config_hash", config_hash(config.train));
  table.add_comment("seeds", seeds_csv(seeds));
  return table;
}

MultiDomainDataset obtain_dataset(const AppConfig& config,
                                  const MultiDomainDataset* dataset) {
  if (dataset) return *dataset;
  return generate_benchmark(config.data);
}

TrainedModel run_one(const AppConfig& config, Arm arm, TextMode mode,
                     std::uint64_t seed, const MultiDomainDataset& ds,
                     const std::vector<int>& sources, int target,
                     const DomainWordPool& pool) {
  TrainConfig train_config = config.train;
  train_config.arm = arm;
  train_config.text_mode = mode;
  train_config.seed = seed;
  SplitPlan split = split_train_val(ds, sources, seed);
  split.target_domain = target;
  return train(train_config, ds, split, pool);
}

}  // namespace

MetricsTable run_lodo(const AppConfig& config,
                      const std::vector<std::uint64_t>& seeds,
                      const std::vector<Arm>& arms, const DomainWordPool& pool,
                      const MultiDomainDataset* dataset) {
  if (config.data.n_domains < 2) {
    throw ConfigError("lodo: need at least two domains");
  }
  const MultiDomainDataset ds = obtain_dataset(config, dataset);
  MetricsTable table = make_table(config, seeds);
  for (int target = 0; target < ds.spec.n_domains; ++target) {
    const auto [sources, tgt] = leave_one_domain_out(ds, target);
    for (Arm arm : arms) {
      for (std::uint64_t seed : seeds) {
        const TrainedModel model = run_one(config, arm, config.train.text_mode,
                                           seed, ds, sources, tgt, pool);
        const double acc = evaluate(model, ds, tgt, /*use_ema=*/true);
        table.rows.push_back({arm_name(arm), "lodo", "rest",
                              std::to_string(tgt), std::to_string(seed), acc});
      }
    }
  }
  finalize_table(table);
  return table;
}

MetricsTable run_single_source(const AppConfig& config,
                               const std::vector<std::uint64_t>& seeds,
                               const std::vector<Arm>& arms,
                               const DomainWordPool& pool,
                               const MultiDomainDataset* dataset) {
  if (config.data.n_domains < 2) {
    throw ConfigError("single-source: need at least two domains");
  }
  const MultiDomainDataset ds = obtain_dataset(config, dataset);
  MetricsTable table = make_table(config, seeds);
  for (int source = 0; source < ds.spec.n_domains; ++source) {
    const std::vector<int> sources{source};
    for (Arm arm : arms) {
      for (std::uint64_t seed : seeds) {
        const TrainedModel model = run_one(config, arm, config.train.text_mode,
                                           seed, ds, sources, -1, pool);
        for (int target = 0; target < ds.spec.n_domains; ++target) {
          if (target == source) continue;
          const double acc = evaluate(model, ds, target, /*use_ema=*/true);
          table.rows.push_back({arm_name(arm), "single_source",
                                std::to_string(source), std::to_string(target),
                                std::to_string(seed), acc});
        }
      }
    }
  }
  finalize_table(table);
  return table;
}

MetricsTable run_loss_ablation(const AppConfig& config,
                               const std::vector<std::uint64_t>& seeds,
                               const DomainWordPool& pool,
                               const MultiDomainDataset* dataset) {
  if (config.data.n_domains < 2) {
    throw ConfigError("loss ablation: need at least two domains");
  }
  const MultiDomainDataset ds = obtain_dataset(config, dataset);
  MetricsTable table = make_table(config, seeds);
  const std::vector<std::pair<std::string, TextMode>> variants = {
      {"NOTEXT", TextMode::kNone},
      {"ALIGN_ONLY", TextMode::kAlignOnly},
      {"SIM_ONLY", TextMode::kSimOnly},
      {"FULL", TextMode::kBoth},
  };
  for (int target = 0; target < ds.spec.n_domains; ++target) {
    const auto [sources, tgt] = leave_one_domain_out(ds, target);
    for (const auto& [name, mode] : variants) {
      for (std::uint64_t seed : seeds) {
        const TrainedModel model =
            run_one(config, Arm::kTdg, mode, seed, ds, sources, tgt, pool);
        const double acc = evaluate(model, ds, tgt, /*use_ema=*/true);
        table.rows.push_back({name, "loss_ablation", "rest",
                              std::to_string(tgt), std::to_string(seed), acc});
      }
    }
  }
  finalize_table(table);
  return table;
}

MetricsTable run_lambda_sweep(const AppConfig& config,
                              const std::vector<std::uint64_t>& seeds,
                              const std::vector<double>& lambdas,
                              const DomainWordPool& pool,
                              const MultiDomainDataset* dataset) {
  if (lambdas.empty()) {
    throw ConfigError("lambda sweep: at least one lambda required");
  }
  const MultiDomainDataset ds = obtain_dataset(config, dataset);
  MetricsTable table = make_table(config, seeds);
  for (int target = 0; target < ds.spec.n_domains; ++target) {
    const auto [sources, tgt] = leave_one_domain_out(ds, target);
    for (double lambda : lambdas) {
      char arm_label[64];
      std::snprintf(arm_label, sizeof(arm_label), "TDG_lambda%g", lambda);
      AppConfig swept = config;
      swept.train.lambda = lambda;
      for (std::uint64_t seed : seeds) {
        const TrainedModel model = run_one(swept, Arm::kTdg, TextMode::kBoth,
                                           seed, ds, sources, tgt, pool);
        const double acc = evaluate(model, ds, tgt, /*use_ema=*/true);
        table.rows.push_back({arm_label, "lambda_sweep", "rest",
                              std::to_string(tgt), std::to_string(seed), acc});
      }
    }
  }
  finalize_table(table);
  return table;
}

// ---------------------------------------------------------------------------
// Gradient verification

double relative_gradient_error(const Vec& analytic, const Vec& numeric) {
  if (analytic.size() != numeric.size()) {
    throw DimensionError("relative_gradient_error: length mismatch");
  }
  double max_diff = 0.0;
  double max_mag = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    max_diff = std::max(max_diff, std::fabs(analytic[i] - numeric[i]));
    max_mag = std::max({max_mag, std::fabs(analytic[i]), std::fabs(numeric[i])});
  }
  return max_diff / std::max(max_mag, 1e-6);
}

bool GradCheckReport::passed() const {
  return std::all_of(families.begin(), families.end(),
                     [&](const GradCheckFamily& f) {
                       return f.max_rel_err <= tolerance;
                     });
}

std::string GradCheckReport::summary() const {
  char line[160];
  std::string out;
  std::snprintf(line, sizeof(line),
                "gradient check: %d trials, h=%g, tolerance=%g\n", trials,
                step_size, tolerance);
  out += line;
  for (const GradCheckFamily& family : families) {
    const bool ok = family.max_rel_err <= tolerance;
    std::snprintf(line, sizeof(line), "  %-24s max rel err %.3e  %s\n",
                  family.name.c_str(), family.max_rel_err,
                  ok ? "ok" : "FAIL");
    out += line;
    if (!ok) {
      std::snprintf(line, sizeof(line), "    worst trial seed %llu\n",
                    static_cast<unsigned long long>(family.worst_trial_seed));
      out += line;
    }
  }
  out += passed() ? "PASS\n" : "FAIL\n";
  return out;
}

namespace {

constexpr double kGradStep = 1e-5;

struct FamilyTracker {
  GradCheckReport* report;
  const GradCheckFault* fault;

  void record(const std::string& name, std::uint64_t trial_seed, Vec analytic,
              const Vec& numeric) {
    if (fault && fault->family == name &&
        fault->component < analytic.size()) {
      analytic[fault->component] *= 1.0 + fault->relative_bump;
    }
    const double err = relative_gradient_error(analytic, numeric);
    for (GradCheckFamily& family : report->families) {
      if (family.name == name) {
        if (err > family.max_rel_err) {
          family.max_rel_err = err;
          family.worst_trial_seed = trial_seed;
        }
        return;
      }
    }
    report->families.push_back({name, err, trial_seed});
  }
};

// One randomized instance exercising every gradient family.
void gradcheck_trial(std::uint64_t trial_seed, FamilyTracker& tracker) {
  RngStream dims(trial_seed, "gradcheck-dims");
  const std::size_t d = 3 + dims.next_below(6);       // shared dim
  const std::size_t d_tok = d + dims.next_below(8);   // token dim >= d
  const std::size_t m = 3 + dims.next_below(8);       // raw dim
  const std::size_t n_c = 2 + dims.next_below(3);
  const std::size_t n_d = 1 + dims.next_below(4);
  const std::size_t batch = 1 + dims.next_below(4);
  const double lambda = 0.1 + 0.9 * dims.next_double();

  RngStream draw(trial_seed, "gradcheck-draw");

  // --- prompt loss w.r.t. both context tokens ---
  TextEncoder text_enc = make_text_encoder(d, d_tok, draw);
  PromptTemplate tpl;
  tpl.ctx1 = draw.gaussian_vec(d_tok, 0.5);
  tpl.ctx2 = draw.gaussian_vec(d_tok, 0.5);
  std::vector<Vec> category_tokens(n_c);
  for (Vec& t : category_tokens) t = draw.gaussian_vec(d_tok, 1.0);
  DomainWordPool pool;
  for (std::size_t j = 0; j < n_d; ++j) {
    pool.words.push_back("w" + std::to_string(j));
    pool.token_embeddings.push_back(draw.gaussian_vec(d_tok, 1.0));
  }
  std::vector<Vec> image_feats(batch);
  std::vector<int> labels(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    image_feats[b] = draw.gaussian_vec(d, 1.0);
    labels[b] = static_cast<int>(draw.next_below(n_c));
  }

  const PromptLossResult prompt_result = prompt_loss_and_grads(
      tpl, text_enc, image_feats, labels, category_tokens, pool, lambda);
  const auto prompt_loss_at = [&](const Vec& ctx1, const Vec& ctx2) {
    PromptTemplate probe{ctx1, ctx2};
    const TextFeatureGrid grid =
        build_text_grid(probe, text_enc, category_tokens, pool);
    return alignment_loss(image_feats, labels, grid) +
           lambda * similarity_loss(grid);
  };
  tracker.record("prompt_ctx1", trial_seed, prompt_result.grad_ctx1,
                 central_difference_gradient(
                     [&](const Vec& v) { return prompt_loss_at(v, tpl.ctx2); },
                     tpl.ctx1, kGradStep));
  tracker.record("prompt_ctx2", trial_seed, prompt_result.grad_ctx2,
                 central_difference_gradient(
                     [&](const Vec& v) { return prompt_loss_at(tpl.ctx1, v); },
                     tpl.ctx2, kGradStep));

  // --- cross-entropy w.r.t. raw logits ---
  const Vec logits = draw.gaussian_vec(n_c, 2.0);
  const int logit_label = static_cast<int>(draw.next_below(n_c));
  tracker.record(
      "ce_logits", trial_seed, cross_entropy_logit_grad(logits, logit_label),
      central_difference_gradient(
          [&](const Vec& l) {
            return -std::log(softmax(l)[static_cast<std::size_t>(logit_label)]);
          },
          logits, kGradStep));

  // --- normalized classifier: heads and feature ---
  const double logit_scale = 2.0 + 8.0 * draw.next_double();
  NormalizedClassifier norm_cls;
  norm_cls.heads = draw.gaussian_mat(n_c, d, 1.0);
  norm_cls.logit_scale = logit_scale;
  const Vec feature = draw.gaussian_vec(d, 1.0);
  const int label = static_cast<int>(draw.next_below(n_c));
  const ClassifierGrads norm_grads = normalized_backward(norm_cls, feature, label);
  tracker.record(
      "normalized_heads", trial_seed, norm_grads.heads.data,
      central_difference_gradient(
          [&](const Vec& flat) {
            NormalizedClassifier probe = norm_cls;
            probe.heads.data = flat;
            const Prediction pred = predict_normalized(probe, feature);
            return -std::log(
                pred.probabilities[static_cast<std::size_t>(label)]);
          },
          norm_cls.heads.data, kGradStep));
  tracker.record(
      "normalized_feature", trial_seed, norm_grads.feature,
      central_difference_gradient(
          [&](const Vec& z) {
            const Prediction pred = predict_normalized(norm_cls, z);
            return -std::log(
                pred.probabilities[static_cast<std::size_t>(label)]);
          },
          feature, kGradStep));

  // --- linear classifier: heads, biases, feature ---
  LinearClassifier lin_cls;
  lin_cls.heads = draw.gaussian_mat(n_c, d, 1.0);
  lin_cls.biases = draw.gaussian_vec(n_c, 0.5);
  const ClassifierGrads lin_grads = linear_backward(lin_cls, feature, label);
  const auto linear_loss = [&](const LinearClassifier& cls, const Vec& z) {
    const Prediction pred = predict_linear(cls, z);
    return -std::log(pred.probabilities[static_cast<std::size_t>(label)]);
  };
  tracker.record("linear_heads", trial_seed, lin_grads.heads.data,
                 central_difference_gradient(
                     [&](const Vec& flat) {
                       LinearClassifier probe = lin_cls;
                       probe.heads.data = flat;
                       return linear_loss(probe, feature);
                     },
                     lin_cls.heads.data, kGradStep));
  tracker.record("linear_biases", trial_seed, lin_grads.biases,
                 central_difference_gradient(
                     [&](const Vec& biases) {
                       LinearClassifier probe = lin_cls;
                       probe.biases = biases;
                       return linear_loss(probe, feature);
                     },
                     lin_cls.biases, kGradStep));
  tracker.record("linear_feature", trial_seed, lin_grads.feature,
                 central_difference_gradient(
                     [&](const Vec& z) { return linear_loss(lin_cls, z); },
                     feature, kGradStep));

  // --- image encoder weight/bias through the normalized CE ---
  ImageEncoder image_enc = make_image_encoder(d, m, draw);
  image_enc.bias = draw.gaussian_vec(d, 0.5);
  const Vec raw = draw.gaussian_vec(m, 1.0);
  const Vec z_img = encode_image(image_enc, raw);
  const ClassifierGrads chain = normalized_backward(norm_cls, z_img, label);
  const ImageEncoderGrads enc_grads =
      encode_image_grads(image_enc, raw, chain.feature);
  const auto encoder_loss = [&](const ImageEncoder& enc) {
    const Prediction pred = predict_normalized(norm_cls, encode_image(enc, raw));
    return -std::log(pred.probabilities[static_cast<std::size_t>(label)]);
  };
  tracker.record("encoder_weight", trial_seed, enc_grads.weight.data,
                 central_difference_gradient(
                     [&](const Vec& flat) {
                       ImageEncoder probe = image_enc;
                       probe.weight.data = flat;
                       return encoder_loss(probe);
                     },
                     image_enc.weight.data, kGradStep));
  tracker.record("encoder_bias", trial_seed, enc_grads.bias,
                 central_difference_gradient(
                     [&](const Vec& bias) {
                       ImageEncoder probe = image_enc;
                       probe.bias = bias;
                       return encoder_loss(probe);
                     },
                     image_enc.bias, kGradStep));
}

}  // namespace

GradCheckReport run_gradcheck(std::uint64_t seed, int trials,
                              const GradCheckFault* fault) {
  if (trials < 1) {
    throw ConfigError("gradcheck: trials must be >= 1");
  }
  GradCheckReport report;
  report.trials = trials;
  report.step_size = kGradStep;
  report.tolerance = 1e-5;
  FamilyTracker tracker{&report, fault};
  RngStream trial_seeds(seed, "gradcheck-trials");
  for (int t = 0; t < trials; ++t) {
    gradcheck_trial(trial_seeds.next_u64(), tracker);
  }
  return report;
}

}  // namespace tdg
