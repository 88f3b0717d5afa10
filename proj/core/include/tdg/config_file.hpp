#pragma once

#include <string>

#include "tdg/synthetic.hpp"
#include "tdg/train.hpp"

namespace tdg {

// Everything a run needs: training hyperparameters and the benchmark
// generator parameters.
struct AppConfig {
  TrainConfig train;
  BenchmarkSpec data;

  bool operator==(const AppConfig&) const = default;
};

// Key-value text, one `section.key = value` per line, '#' comments and
// blank lines ignored. Sections: train.*, data.*. Unknown keys are errors.
// `train.preset` (scratch | finetune) expands to a bundle of defaults and
// is applied before explicit keys regardless of line order; `finetune` is
// the long-protocol preset (3000 steps, 300 warm-up, encoder rate 5e-6 as
// used when adapting a pretrained backbone).
AppConfig parse_config_text(const std::string& text);
AppConfig load_config_file(const std::string& path);

// Canonical serializations; stable key order, exact decimals. Used for the
// checkpoint config echo and for table metadata hashes.
std::string canonical_train_text(const TrainConfig& config);
std::string canonical_data_text(const BenchmarkSpec& spec);
std::string canonical_config_text(const AppConfig& config);

std::string config_hash(const TrainConfig& config);
std::string spec_hash(const BenchmarkSpec& spec);

}  // namespace tdg
