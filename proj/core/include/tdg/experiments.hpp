#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tdg/config_file.hpp"
#include "tdg/metrics.hpp"
#include "tdg/synthetic.hpp"
#include "tdg/train.hpp"
#include "tdg/word_pool.hpp"

namespace tdg {

// Leave-one-domain-out: each domain in turn is the held-out target, the
// rest are pooled sources. One row per (arm, target, seed).
MetricsTable run_lodo(const AppConfig& config,
                      const std::vector<std::uint64_t>& seeds,
                      const std::vector<Arm>& arms, const DomainWordPool& pool,
                      const MultiDomainDataset* dataset = nullptr);

// Train on each domain alone, evaluate on every other domain. One row per
// (arm, source, target, seed).
MetricsTable run_single_source(const AppConfig& config,
                               const std::vector<std::uint64_t>& seeds,
                               const std::vector<Arm>& arms,
                               const DomainWordPool& pool,
                               const MultiDomainDataset* dataset = nullptr);

// Prompt-objective ablation, all with the normalized classifier:
// NOTEXT (no text path), ALIGN_ONLY, SIM_ONLY, FULL. Leave-one-domain-out
// over all targets.
MetricsTable run_loss_ablation(const AppConfig& config,
                               const std::vector<std::uint64_t>& seeds,
                               const DomainWordPool& pool,
                               const MultiDomainDataset* dataset = nullptr);

// TDG runs across similarity-loss weights; arm column names carry the
// weight (e.g. "TDG_lambda0.3").
MetricsTable run_lambda_sweep(const AppConfig& config,
                              const std::vector<std::uint64_t>& seeds,
                              const std::vector<double>& lambdas,
                              const DomainWordPool& pool,
                              const MultiDomainDataset* dataset = nullptr);

// ---------------------------------------------------------------------------
// Gradient verification

struct GradCheckFamily {
  std::string name;
  double max_rel_err = 0.0;
  std::uint64_t worst_trial_seed = 0;
};

struct GradCheckReport {
  int trials = 0;
  double step_size = 1e-5;
  double tolerance = 1e-5;
  std::vector<GradCheckFamily> families;

  bool passed() const;
  std::string summary() const;
};

// Test-only fault injection: multiplies one component of the named family's
// analytic gradient by (1 + relative_bump).
struct GradCheckFault {
  std::string family;
  std::size_t component = 0;
  double relative_bump = 0.1;
};

// Compares every analytic gradient family against central differences at
// h = 1e-5 over `trials` randomized instances. Throws ConfigError when
// trials < 1.
GradCheckReport run_gradcheck(std::uint64_t seed, int trials,
                              const GradCheckFault* fault = nullptr);

// max-norm relative disagreement with a small floor for near-zero gradients.
double relative_gradient_error(const Vec& analytic, const Vec& numeric);

}  // namespace tdg
