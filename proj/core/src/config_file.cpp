#include "tdg/config_file.hpp"

#include <fstream>
#include <sstream>
#include <vector>

#include "tdg/error.hpp"
#include "tdg/textio.hpp"

namespace tdg {

namespace {

struct KeyValue {
  std::string key;
  std::string value;
  int line = 0;
};

std::vector<KeyValue> scan_lines(const std::string& text) {
  std::vector<KeyValue> entries;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = strip(line);
    if (body.empty() || body.front() == '#') continue;
    const std::size_t eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: line " + std::to_string(line_no) +
                        ": expected key = value");
    }
    KeyValue kv;
    kv.key = strip(body.substr(0, eq));
    kv.value = strip(body.substr(eq + 1));
    kv.line = line_no;
    if (kv.key.empty() || kv.value.empty()) {
      throw ConfigError("config: line " + std::to_string(line_no) +
                        ": empty key or value");
    }
    entries.push_back(std::move(kv));
  }
  return entries;
}

void apply_preset(TrainConfig& train, const std::string& preset, int line) {
  if (preset == "scratch") {
    return;  // the defaults
  }
  if (preset == "finetune") {
    train.total_steps = 3000;
    train.warmup_steps = 300;
    train.lr_encoder = 5e-6;
    train.ema_decay = 0.999;
    return;
  }
  throw ConfigError("config: line " + std::to_string(line) +
                    ": unknown preset \"" + preset +
                    "\" (expected scratch or finetune)");
}

double positive_int(const KeyValue& kv) {
  return static_cast<double>(parse_int(kv.value, kv.key.c_str()));
}

}  // namespace

AppConfig parse_config_text(const std::string& text) {
  const std::vector<KeyValue> entries = scan_lines(text);
  AppConfig config;

  // Presets first so explicit keys win regardless of order.
  for (const KeyValue& kv : entries) {
    if (kv.key == "train.preset") {
      apply_preset(config.train, kv.value, kv.line);
    }
  }

  for (const KeyValue& kv : entries) {
    const std::string& k = kv.key;
    TrainConfig& t = config.train;
    BenchmarkSpec& d = config.data;
    if (k == "train.preset") {
      continue;
    } else if (k == "train.arm") {
      t.arm = parse_arm(kv.value);
    } else if (k == "train.text_mode") {
      t.text_mode = parse_text_mode(kv.value);
    } else if (k == "train.lambda") {
      t.lambda = parse_double(kv.value, k.c_str());
    } else if (k == "train.total_steps") {
      t.total_steps = static_cast<int>(positive_int(kv));
    } else if (k == "train.warmup_steps") {
      t.warmup_steps = static_cast<int>(positive_int(kv));
    } else if (k == "train.batch_size") {
      t.batch_size = static_cast<int>(positive_int(kv));
    } else if (k == "train.lr_classifier") {
      t.lr_classifier = parse_double(kv.value, k.c_str());
    } else if (k == "train.lr_encoder") {
      t.lr_encoder = parse_double(kv.value, k.c_str());
    } else if (k == "train.lr_prompt") {
      t.lr_prompt = parse_double(kv.value, k.c_str());
    } else if (k == "train.ema_decay") {
      t.ema_decay = parse_double(kv.value, k.c_str());
    } else if (k == "train.logit_scale") {
      t.logit_scale = parse_double(kv.value, k.c_str());
    } else if (k == "train.seed") {
      t.seed = parse_u64(kv.value, k.c_str());
    } else if (k == "train.val_every") {
      t.val_every = static_cast<int>(positive_int(kv));
    } else if (k == "train.embed_dim") {
      t.embed_dim = static_cast<int>(positive_int(kv));
    } else if (k == "data.n_categories") {
      d.n_categories = static_cast<int>(positive_int(kv));
    } else if (k == "data.n_domains") {
      d.n_domains = static_cast<int>(positive_int(kv));
    } else if (k == "data.samples_per_class_per_domain") {
      d.samples_per_class_per_domain = static_cast<int>(positive_int(kv));
    } else if (k == "data.latent_dim") {
      d.latent_dim = static_cast<int>(positive_int(kv));
    } else if (k == "data.raw_dim") {
      d.raw_dim = static_cast<int>(positive_int(kv));
    } else if (k == "data.token_dim") {
      d.token_dim = static_cast<int>(positive_int(kv));
    } else if (k == "data.domain_transform_scale") {
      d.domain_transform_scale = parse_double(kv.value, k.c_str());
    } else if (k == "data.noise_std") {
      d.noise_std = parse_double(kv.value, k.c_str());
    } else if (k == "data.alignment_noise_std") {
      d.alignment_noise_std = parse_double(kv.value, k.c_str());
    } else if (k == "data.seed") {
      d.seed = parse_u64(kv.value, k.c_str());
    } else {
      throw ConfigError("config: line " + std::to_string(kv.line) +
                        ": unknown key \"" + k + "\"");
    }
  }

  validate_config(config.train);
  return config;
}

AppConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("config: cannot open " + path);
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) {
    throw IoError("config: read failure on " + path);
  }
  return parse_config_text(buffer.str());
}

std::string canonical_train_text(const TrainConfig& config) {
  std::string out;
  out += "train.arm = " + arm_name(config.arm) + '\n';
  out += "train.text_mode = " + text_mode_name(config.text_mode) + '\n';
  out += "train.lambda = " + fmt_g17(config.lambda) + '\n';
  out += "train.total_steps = " + std::to_string(config.total_steps) + '\n';
  out += "train.warmup_steps = " + std::to_string(config.warmup_steps) + '\n';
  out += "train.batch_size = " + std::to_string(config.batch_size) + '\n';
  out += "train.lr_classifier = " + fmt_g17(config.lr_classifier) + '\n';
  out += "train.lr_encoder = " + fmt_g17(config.lr_encoder) + '\n';
  out += "train.lr_prompt = " + fmt_g17(config.lr_prompt) + '\n';
  out += "train.ema_decay = " + fmt_g17(config.ema_decay) + '\n';
  out += "train.logit_scale = " + fmt_g17(config.logit_scale) + '\n';
  out += "train.seed = " + std::to_string(config.seed) + '\n';
  out += "train.val_every = " + std::to_string(config.val_every) + '\n';
  out += "train.embed_dim = " + std::to_string(config.embed_dim) + '\n';
  return out;
}

std::string canonical_data_text(const BenchmarkSpec& spec) {
  std::string out;
  out += "data.n_categories = " + std::to_string(spec.n_categories) + '\n';
  out += "data.n_domains = " + std::to_string(spec.n_domains) + '\n';
  out += "data.samples_per_class_per_domain = " +
         std::to_string(spec.samples_per_class_per_domain) + '\n';
  out += "data.latent_dim = " + std::to_string(spec.latent_dim) + '\n';
  out += "data.raw_dim = " + std::to_string(spec.raw_dim) + '\n';
  out += "data.token_dim = " + std::to_string(spec.token_dim) + '\n';
  out += "data.domain_transform_scale = " +
         fmt_g17(spec.domain_transform_scale) + '\n';
  out += "data.noise_std = " + fmt_g17(spec.noise_std) + '\n';
  out += "data.alignment_noise_std = " + fmt_g17(spec.alignment_noise_std) +
         '\n';
  out += "data.seed = " + std::to_string(spec.seed) + '\n';
  return out;
}

std::string canonical_config_text(const AppConfig& config) {
  return canonical_train_text(config.train) + canonical_data_text(config.data);
}

std::string config_hash(const TrainConfig& config) {
  return hash_hex(canonical_train_text(config));
}

std::string spec_hash(const BenchmarkSpec& spec) {
  return hash_hex(canonical_data_text(spec));
}

}  // namespace tdg
