#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <sstream>

#include "tdg/rng.hpp"
#include "tdg/synthetic.hpp"

using namespace tdg;

namespace {

BenchmarkSpec tiny_spec() {
  BenchmarkSpec spec;
  spec.n_categories = 2;
  spec.n_domains = 2;
  spec.samples_per_class_per_domain = 10;
  spec.latent_dim = 4;
  spec.raw_dim = 6;
  spec.token_dim = 8;
  spec.seed = 3;
  return spec;
}

}  // namespace

TEST_CASE("generation produces exact per-cell counts") {
  const MultiDomainDataset ds = generate_benchmark(tiny_spec());
  CHECK(ds.samples.size() == 40);
  std::map<std::pair<int, int>, int> counts;
  for (const Sample& s : ds.samples) {
    counts[{s.domain, s.label}] += 1;
    CHECK(s.domain >= 0);
    CHECK(s.domain < 2);
    CHECK(s.label >= 0);
    CHECK(s.label < 2);
    CHECK(s.x.size() == 6);
  }
  CHECK(counts.size() == 4);
  for (const auto& [key, count] : counts) {
    CHECK(count == 10);
  }
}

TEST_CASE("generation is deterministic in (spec, seed)") {
  const MultiDomainDataset a = generate_benchmark(tiny_spec());
  const MultiDomainDataset b = generate_benchmark(tiny_spec());
  CHECK(a == b);

  BenchmarkSpec other = tiny_spec();
  other.seed = 4;
  CHECK_FALSE(generate_benchmark(other) == a);
}

TEST_CASE("zero shift and zero noise collapse all domains") {
  BenchmarkSpec spec = tiny_spec();
  spec.domain_transform_scale = 0.0;
  spec.noise_std = 0.0;
  const MultiDomainDataset ds = generate_benchmark(spec);
  // per class, every domain produces the identical sample set
  for (int cls = 0; cls < spec.n_categories; ++cls) {
    std::vector<Vec> per_domain[2];
    for (const Sample& s : ds.samples) {
      if (s.label == cls) per_domain[s.domain].push_back(s.x);
    }
    CHECK(per_domain[0] == per_domain[1]);
  }
}

TEST_CASE("prototype rejection sampling errors when classes cannot fit") {
  BenchmarkSpec spec = tiny_spec();
  spec.n_categories = 50;
  spec.latent_dim = 1;  // only two unit vectors exist
  CHECK_THROWS_AS(generate_benchmark(spec), ValidationError);
}

TEST_CASE("invalid specs are rejected") {
  BenchmarkSpec spec = tiny_spec();
  spec.n_categories = 1;
  CHECK_THROWS_AS(generate_benchmark(spec), ValidationError);
  spec = tiny_spec();
  spec.noise_std = -0.5;
  CHECK_THROWS_AS(generate_benchmark(spec), ValidationError);
}

TEST_CASE("category tokens correlate with class structure") {
  SUBCASE("exact argmax at zero alignment noise") {
    BenchmarkSpec spec = tiny_spec();
    spec.n_categories = 4;
    spec.latent_dim = 6;
    spec.alignment_noise_std = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      spec.seed = seed;
      const MultiDomainDataset ds = generate_benchmark(spec);
      // reconstruct what the class-c token would be for prototype c'
      RngStream align_rng(spec.seed, "align-map");
      const Mat align_map = align_rng.gaussian_mat(
          static_cast<std::size_t>(spec.token_dim),
          static_cast<std::size_t>(spec.latent_dim),
          1.0 / std::sqrt(static_cast<double>(spec.token_dim)));
      for (int c = 0; c < spec.n_categories; ++c) {
        const Vec& token = ds.vocabulary.category_tokens[static_cast<std::size_t>(c)];
        for (int cp = 0; cp < spec.n_categories; ++cp) {
          if (cp == c) continue;
          const Vec other = matvec(
              align_map, ds.class_prototypes.row_vec(static_cast<std::size_t>(cp)));
          CHECK(cosine(token, other) < cosine(token, token));
        }
      }
    }
  }
  SUBCASE("statistical argmax at the default noise") {
    BenchmarkSpec spec;  // defaults
    int correct = 0;
    int total = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      spec.seed = seed;
      const MultiDomainDataset ds = generate_benchmark(spec);
      RngStream align_rng(spec.seed, "align-map");
      const Mat align_map = align_rng.gaussian_mat(
          static_cast<std::size_t>(spec.token_dim),
          static_cast<std::size_t>(spec.latent_dim),
          1.0 / std::sqrt(static_cast<double>(spec.token_dim)));
      for (int c = 0; c < spec.n_categories; ++c) {
        const Vec& token =
            ds.vocabulary.category_tokens[static_cast<std::size_t>(c)];
        int best = -1;
        double best_cos = -2.0;
        for (int cp = 0; cp < spec.n_categories; ++cp) {
          const Vec clean = matvec(
              align_map, ds.class_prototypes.row_vec(static_cast<std::size_t>(cp)));
          const double cs = cosine(token, clean);
          if (cs > best_cos) {
            best_cos = cs;
            best = cp;
          }
        }
        correct += (best == c) ? 1 : 0;
        ++total;
      }
    }
    CHECK(correct == total);  // measured: exact at the default noise level
  }
}

TEST_CASE("domain word tokens are pure functions of (seed, word)") {
  const MultiDomainDataset ds = generate_benchmark(tiny_spec());
  CHECK(ds.vocabulary.domain_word_token("photo") ==
        ds.vocabulary.domain_word_token("photo"));
  CHECK_FALSE(ds.vocabulary.domain_word_token("photo") ==
              ds.vocabulary.domain_word_token("sketch"));

  DomainWordPool pool;
  pool.words = {"photo", "sketch"};
  assign_pool_tokens(pool, ds.vocabulary);
  REQUIRE(pool.token_embeddings.size() == 2);
  CHECK(pool.token_embeddings[0] == ds.vocabulary.domain_word_token("photo"));
}

TEST_CASE("train/val splits") {
  BenchmarkSpec spec = tiny_spec();
  const MultiDomainDataset ds = generate_benchmark(spec);  // 20 per domain

  SUBCASE("90/10 with rounding down") {
    const SplitPlan plan = split_train_val(ds, {0}, 7);
    CHECK(plan.train_indices.size() == 18);
    CHECK(plan.val_indices.size() == 2);
  }

  SUBCASE("validation is at least one sample") {
    BenchmarkSpec small = tiny_spec();
    small.samples_per_class_per_domain = 5;  // 10 per domain
    const MultiDomainDataset ds_small = generate_benchmark(small);
    const SplitPlan plan = split_train_val(ds_small, {1}, 7);
    CHECK(plan.train_indices.size() == 9);
    CHECK(plan.val_indices.size() == 1);
  }

  SUBCASE("deterministic in seed") {
    const SplitPlan a = split_train_val(ds, {0, 1}, 7);
    const SplitPlan b = split_train_val(ds, {0, 1}, 7);
    CHECK(a.train_indices == b.train_indices);
    CHECK(a.val_indices == b.val_indices);
    const SplitPlan c = split_train_val(ds, {0, 1}, 8);
    CHECK_FALSE(a.train_indices == c.train_indices);
  }

  SUBCASE("disjoint and covering") {
    const SplitPlan plan = split_train_val(ds, {0, 1}, 9);
    std::vector<int> all = plan.train_indices;
    all.insert(all.end(), plan.val_indices.begin(), plan.val_indices.end());
    std::sort(all.begin(), all.end());
    CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());
    CHECK(all.size() == ds.samples.size());
  }

  SUBCASE("errors") {
    CHECK_THROWS_AS(split_train_val(ds, {}, 0), DegenerateInputError);
    CHECK_THROWS_AS(split_train_val(ds, {5}, 0), IndexError);
  }
}

TEST_CASE("leave one domain out") {
  BenchmarkSpec spec = tiny_spec();
  spec.n_domains = 4;
  const MultiDomainDataset ds = generate_benchmark(spec);
  const auto [sources, target] = leave_one_domain_out(ds, 2);
  CHECK(sources == std::vector<int>{0, 1, 3});
  CHECK(target == 2);

  // two domains degenerate to single-source
  const MultiDomainDataset two = generate_benchmark(tiny_spec());
  const auto [single, tgt] = leave_one_domain_out(two, 1);
  CHECK(single == std::vector<int>{0});
  CHECK(tgt == 1);

  CHECK_THROWS_AS(leave_one_domain_out(ds, 4), IndexError);
  CHECK_THROWS_AS(leave_one_domain_out(ds, -1), IndexError);
}

TEST_CASE("target domain never appears in split indices") {
  BenchmarkSpec spec = tiny_spec();
  spec.n_domains = 4;
  const MultiDomainDataset ds = generate_benchmark(spec);
  for (int target = 0; target < 4; ++target) {
    const auto [sources, tgt] = leave_one_domain_out(ds, target);
    const SplitPlan plan = split_train_val(ds, sources, 11);
    for (const auto* indices : {&plan.train_indices, &plan.val_indices}) {
      for (int idx : *indices) {
        CHECK(ds.samples[static_cast<std::size_t>(idx)].domain != tgt);
      }
    }
  }
}

TEST_CASE("separability probe anchors") {
  SUBCASE("no shift, no noise: perfectly separable") {
    BenchmarkSpec spec = tiny_spec();
    spec.domain_transform_scale = 0.0;
    spec.noise_std = 0.0;
    const MultiDomainDataset ds = generate_benchmark(spec);
    CHECK(separability_probe(ds, {0}) == 1.0);
  }

  SUBCASE("randomly shuffled labels drop the probe to chance") {
    BenchmarkSpec spec;  // defaults: 5 classes, 4 domains
    spec.seed = 1;
    MultiDomainDataset ds = generate_benchmark(spec);
    std::vector<int> labels;
    for (const Sample& s : ds.samples) labels.push_back(s.label);
    RngStream rng(9, "shuffle-labels");
    rng.shuffle(labels);
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
      ds.samples[i].label = labels[i];
    }
    const double acc = separability_probe(ds, {0, 1, 2});
    const double chance = 1.0 / spec.n_categories;
    const double n_target = static_cast<double>(
        spec.samples_per_class_per_domain * spec.n_categories);
    const double sigma = std::sqrt(chance * (1 - chance) / n_target);
    CHECK(acc <= chance + 5 * sigma);
    CHECK(acc >= chance - 5 * sigma);
  }

  SUBCASE("default benchmark sits between chance+0.1 and 0.95") {
    const BenchmarkSpec spec;  // frozen defaults
    const MultiDomainDataset ds = generate_benchmark(spec);
    for (int target = 0; target < spec.n_domains; ++target) {
      const auto [sources, tgt] = leave_one_domain_out(ds, target);
      const double acc = separability_probe(ds, sources);
      CHECK(acc > 1.0 / spec.n_categories + 0.1);
      CHECK(acc < 0.95);
    }
  }
}

TEST_CASE("dataset save/load round trip") {
  const MultiDomainDataset ds = generate_benchmark(tiny_spec());

  std::ostringstream first;
  save_dataset(ds, first);
  std::istringstream reparse(first.str());
  const MultiDomainDataset loaded = load_dataset(reparse);
  CHECK(loaded == ds);

  std::ostringstream second;
  save_dataset(loaded, second);
  CHECK(second.str() == first.str());
}

TEST_CASE("dataset loader rejects malformed input") {
  CHECK_THROWS_AS(
      [] {
        std::istringstream in("not a dataset\n");
        return load_dataset(in);
      }(),
      ValidationError);
}

TEST_CASE("dataset loader enforces per-cell counts") {
  const MultiDomainDataset ds = generate_benchmark(tiny_spec());
  std::ostringstream out;
  save_dataset(ds, out);
  std::string text = out.str();
  // swap one sample's class label in place: cell counts become unbalanced
  const std::size_t pos = text.find("\n0,0,");
  REQUIRE(pos != std::string::npos);
  text[pos + 3] = '1';
  std::istringstream in(text);
  CHECK_THROWS_AS(load_dataset(in), ValidationError);
}
