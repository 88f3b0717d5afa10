// Command-line driver: dataset generation, single runs, and the
// leave-one-domain-out / single-source / ablation / gradient-check
// protocols, all emitting machine-readable tables.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tdg/checkpoint.hpp"
#include "tdg/config_file.hpp"
#include "tdg/error.hpp"
#include "tdg/experiments.hpp"
#include "tdg/metrics.hpp"
#include "tdg/synthetic.hpp"
#include "tdg/textio.hpp"
#include "tdg/train.hpp"
#include "tdg/version.hpp"
#include "tdg/word_pool.hpp"

namespace {

using namespace tdg;

struct CommonOptions {
  std::string config_path;
  std::string word_pool_path;
  std::string data_path;
  std::string out_path;
  std::string format = "csv";
  std::string seeds_text = "0,1,2,3,4";
  std::string arms_text = "ERM,TEXT,TDG";
};

AppConfig load_config(const CommonOptions& opts) {
  if (opts.config_path.empty()) return AppConfig{};
  return load_config_file(opts.config_path);
}

DomainWordPool load_pool(const CommonOptions& opts) {
  if (opts.word_pool_path.empty()) return default_pool();
  return load_word_pool_file(opts.word_pool_path);
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const std::string& part : split(text, ',')) {
    const std::string body = strip(part);
    if (body.empty()) continue;
    seeds.push_back(parse_u64(body, "seed"));
  }
  if (seeds.empty()) {
    throw ConfigError("no seeds given");
  }
  return seeds;
}

std::vector<Arm> parse_arms(const std::string& text) {
  std::vector<Arm> arms;
  for (const std::string& part : split(text, ',')) {
    const std::string body = strip(part);
    if (body.empty()) continue;
    arms.push_back(parse_arm(body));
  }
  if (arms.empty()) {
    throw ConfigError("no arms given");
  }
  return arms;
}

std::vector<double> parse_lambdas(const std::string& text) {
  std::vector<double> lambdas;
  for (const std::string& part : split(text, ',')) {
    const std::string body = strip(part);
    if (body.empty()) continue;
    lambdas.push_back(parse_double(body, "lambda"));
  }
  return lambdas;
}

const MultiDomainDataset* maybe_load_dataset(const CommonOptions& opts,
                                             MultiDomainDataset& storage) {
  if (opts.data_path.empty()) return nullptr;
  storage = load_dataset_file(opts.data_path);
  return &storage;
}

void write_table(const MetricsTable& table, const CommonOptions& opts) {
  if (opts.format != "csv" && opts.format != "json") {
    throw ConfigError("unknown format \"" + opts.format +
                      "\" (expected csv or json)");
  }
  if (opts.out_path.empty()) {
    std::cout << (opts.format == "json" ? to_json(table) : to_csv(table));
    return;
  }
  const std::size_t bytes = emit_table_file(table, opts.format, opts.out_path);
  std::cout << "wrote " << bytes << " bytes to " << opts.out_path << '\n';
}

int dispatch(const std::string& command, const CommonOptions& opts,
             int gradcheck_trials, std::uint64_t gradcheck_seed,
             const std::string& lambdas_text, int eval_domain, bool eval_live,
             const std::string& ckpt_path, const std::string& seed_override) {
  AppConfig config = load_config(opts);
  if (!seed_override.empty()) {
    const std::uint64_t seed = parse_u64(seed_override, "seed");
    config.train.seed = seed;
    config.data.seed = seed;
  }

  if (command == "gen-data") {
    if (opts.out_path.empty()) throw ConfigError("gen-data: --out is required");
    const MultiDomainDataset ds = generate_benchmark(config.data);
    save_dataset_file(ds, opts.out_path);
    std::cout << "wrote dataset (" << ds.samples.size() << " samples) to "
              << opts.out_path << '\n';
    return 0;
  }

  if (command == "train") {
    if (opts.data_path.empty()) throw ConfigError("train: --data is required");
    if (opts.out_path.empty()) throw ConfigError("train: --out is required");
    const MultiDomainDataset ds = load_dataset_file(opts.data_path);
    DomainWordPool pool = load_pool(opts);
    std::vector<int> sources;
    for (int dom = 0; dom < ds.spec.n_domains; ++dom) sources.push_back(dom);
    const SplitPlan split = split_train_val(ds, sources, config.train.seed);
    const TrainedModel model = train(config.train, ds, split, pool);
    save_model_file(model, opts.out_path);
    std::cout << "trained " << arm_name(model.config.arm) << " for "
              << model.config.total_steps << " steps; best val accuracy "
              << fmt_f6(model.best_val_accuracy) << " at step "
              << model.selected_step << "; checkpoint written to "
              << opts.out_path << '\n';
    return 0;
  }

  if (command == "eval") {
    if (ckpt_path.empty()) throw ConfigError("eval: --ckpt is required");
    if (opts.data_path.empty()) throw ConfigError("eval: --data is required");
    const MultiDomainDataset ds = load_dataset_file(opts.data_path);
    if (eval_domain < 0 || eval_domain >= ds.spec.n_domains) {
      throw ConfigError("eval: --domain out of range for dataset with " +
                        std::to_string(ds.spec.n_domains) + " domains");
    }
    const TrainedModel model = load_model_file(ckpt_path);
    const double acc = evaluate(model, ds, eval_domain, !eval_live);
    std::cout << fmt_f6(acc) << '\n';
    return 0;
  }

  const std::vector<std::uint64_t> seeds = parse_seeds(opts.seeds_text);
  MultiDomainDataset storage;
  const MultiDomainDataset* ds = maybe_load_dataset(opts, storage);
  DomainWordPool pool = load_pool(opts);

  if (command == "lodo") {
    write_table(run_lodo(config, seeds, parse_arms(opts.arms_text), pool, ds),
                opts);
    return 0;
  }
  if (command == "single-source") {
    write_table(
        run_single_source(config, seeds, parse_arms(opts.arms_text), pool, ds),
        opts);
    return 0;
  }
  if (command == "ablate-losses") {
    write_table(run_loss_ablation(config, seeds, pool, ds), opts);
    return 0;
  }
  if (command == "sweep-lambda") {
    write_table(run_lambda_sweep(config, seeds, parse_lambdas(lambdas_text),
                                 pool, ds),
                opts);
    return 0;
  }
  if (command == "gradcheck") {
    const GradCheckReport report = run_gradcheck(gradcheck_seed, gradcheck_trials);
    std::cout << report.summary();
    if (!opts.out_path.empty()) {
      std::ofstream out(opts.out_path, std::ios::binary);
      if (!out) throw IoError("gradcheck: cannot open " + opts.out_path);
      out << report.summary();
    }
    return report.passed() ? 0 : 2;
  }
  throw ConfigError("unknown command " + command);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Text-guided domain generalization on synthetic multi-domain benchmarks"};
  app.set_version_flag("--version", std::string(tdg::kVersion));
  app.require_subcommand(1);

  CommonOptions opts;
  int gradcheck_trials = 20;
  std::uint64_t gradcheck_seed = 0;
  std::string lambdas_text = "0,0.1,0.3,1.0";
  int eval_domain = 0;
  bool eval_live = false;
  std::string ckpt_path;
  std::string seed_override;

  const auto add_common = [&](CLI::App* cmd, bool with_protocol_flags) {
    cmd->add_option("--config", opts.config_path, "config file (key = value)");
    cmd->add_option("--word-pool", opts.word_pool_path,
                    "word pool file; bundled 20-word pool when absent");
    if (with_protocol_flags) {
      cmd->add_option("--seeds", opts.seeds_text, "comma-separated run seeds");
      cmd->add_option("--format", opts.format, "csv or json");
      cmd->add_option("--data", opts.data_path,
                      "dataset file; generated from config when absent");
    }
    cmd->add_option("--out", opts.out_path, "output path");
  };

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic benchmark");
  gen->add_option("--spec,--config", opts.config_path, "config file");
  gen->add_option("--out", opts.out_path, "dataset output path")->required();
  gen->add_option("--seed", seed_override, "override the config seeds");

  auto* train_cmd = app.add_subcommand("train", "train one model");
  add_common(train_cmd, false);
  train_cmd->add_option("--data", opts.data_path, "dataset file")->required();
  train_cmd->add_option("--seed", seed_override, "override the config seeds");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on one domain");
  eval_cmd->add_option("--ckpt", ckpt_path, "checkpoint path")->required();
  eval_cmd->add_option("--data", opts.data_path, "dataset file")->required();
  eval_cmd->add_option("--domain", eval_domain, "domain id")->required();
  eval_cmd->add_flag("--live", eval_live, "use live weights instead of EMA");

  auto* lodo = app.add_subcommand("lodo", "leave-one-domain-out protocol");
  add_common(lodo, true);
  lodo->add_option("--arms", opts.arms_text, "comma-separated arms");

  auto* ss = app.add_subcommand("single-source", "single-source generalization");
  add_common(ss, true);
  ss->add_option("--arms", opts.arms_text, "comma-separated arms");

  auto* ablate = app.add_subcommand("ablate-losses", "prompt objective ablation");
  add_common(ablate, true);

  auto* sweep = app.add_subcommand("sweep-lambda", "similarity-weight sweep");
  add_common(sweep, true);
  sweep->add_option("--lambdas", lambdas_text, "comma-separated weights");

  auto* gradcheck = app.add_subcommand("gradcheck", "verify analytic gradients");
  gradcheck->add_option("--trials", gradcheck_trials, "number of trials");
  gradcheck->add_option("--seed", gradcheck_seed, "base seed");
  gradcheck->add_option("--out", opts.out_path, "write report here too");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;  // usage errors map to exit code 1
  }

  try {
    const std::string command = app.get_subcommands().front()->get_name();
    return dispatch(command, opts, gradcheck_trials, gradcheck_seed,
                    lambdas_text, eval_domain, eval_live, ckpt_path,
                    seed_override);
  } catch (const tdg::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const tdg::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const tdg::EncodingError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const tdg::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const tdg::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
