#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tdg/rng.hpp"
#include "tdg/vec.hpp"
#include "tdg/word_pool.hpp"

namespace tdg {

// Generator parameters for a synthetic multi-domain benchmark. Per-domain
// affine distortions of shared class prototypes stand in for real
// photo/sketch/cartoon style shifts; domain_transform_scale controls the
// severity. Defaults are calibrated against separability_probe so the
// benchmark is neither trivial nor impossible.
struct BenchmarkSpec {
  int n_categories = 5;
  int n_domains = 4;
  int samples_per_class_per_domain = 60;
  int latent_dim = 8;
  int raw_dim = 24;
  int token_dim = 32;
  double domain_transform_scale = 0.75;
  double noise_std = 0.25;
  double alignment_noise_std = 0.05;
  std::uint64_t seed = 0;

  bool operator==(const BenchmarkSpec&) const = default;
};

struct Sample {
  Vec x;  // raw feature, length raw_dim
  int label = 0;
  int domain = 0;

  bool operator==(const Sample&) const = default;
};

// Token space shared by category words and domain words. Category tokens
// are linear images of the class prototypes plus noise, simulating encoders
// pretrained to place matching text and images near each other; domain-word
// tokens are class-independent and derived purely from the word string.
struct Vocabulary {
  std::vector<Vec> category_tokens;
  std::uint64_t word_seed = 0;
  int token_dim = 0;

  Vec domain_word_token(const std::string& word) const;

  bool operator==(const Vocabulary&) const = default;
};

struct DomainParams {
  Mat transform;  // raw_dim x latent_dim
  Vec bias;       // raw_dim

  bool operator==(const DomainParams&) const = default;
};

struct MultiDomainDataset {
  BenchmarkSpec spec;
  std::vector<Sample> samples;
  Mat class_prototypes;  // n_categories x latent_dim, unit rows
  Mat base_map;          // raw_dim x latent_dim, shared across domains
  std::vector<DomainParams> domain_params;
  Vocabulary vocabulary;

  bool operator==(const MultiDomainDataset&) const = default;
};

MultiDomainDataset generate_benchmark(const BenchmarkSpec& spec);

// Fills pool.token_embeddings from the dataset vocabulary.
void assign_pool_tokens(DomainWordPool& pool, const Vocabulary& vocab);

// Pooled train/val indices over the given source domains. target_domain is
// -1 unless the caller runs a leave-one-domain-out protocol.
struct SplitPlan {
  std::vector<int> train_indices;
  std::vector<int> val_indices;
  std::vector<int> source_domains;
  int target_domain = -1;
};

// Per-domain shuffled 90/10 split (validation share rounded down, at least
// one sample). Deterministic in seed.
SplitPlan split_train_val(const MultiDomainDataset& ds,
                          const std::vector<int>& sources, std::uint64_t seed);

// All domains except target as sources.
std::pair<std::vector<int>, int> leave_one_domain_out(
    const MultiDomainDataset& ds, int target);

// Accuracy of a closed-form ridge least-squares one-vs-rest probe on raw
// features, trained on the source training splits and evaluated on every
// held-out domain. Sanity oracle for benchmark difficulty.
double separability_probe(const MultiDomainDataset& ds,
                          const std::vector<int>& sources);

// Self-describing text format; full decimal precision, byte-stable
// round trip.
void save_dataset(const MultiDomainDataset& ds, std::ostream& out);
void save_dataset_file(const MultiDomainDataset& ds, const std::string& path);
MultiDomainDataset load_dataset(std::istream& in);
MultiDomainDataset load_dataset_file(const std::string& path);

}  // namespace tdg
