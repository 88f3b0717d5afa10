#include "tdg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "tdg/error.hpp"
#include "tdg/textio.hpp"

namespace tdg {

namespace {

void validate_spec(const BenchmarkSpec& spec) {
  if (spec.n_categories < 2) {
    throw ValidationError("benchmark spec: n_categories must be >= 2");
  }
  if (spec.n_domains < 2) {
    throw ValidationError("benchmark spec: n_domains must be >= 2");
  }
  if (spec.samples_per_class_per_domain < 1 || spec.latent_dim < 1 ||
      spec.raw_dim < 1 || spec.token_dim < 1) {
    throw ValidationError("benchmark spec: counts and dimensions must be >= 1");
  }
  if (spec.domain_transform_scale < 0.0 || spec.noise_std < 0.0 ||
      spec.alignment_noise_std < 0.0) {
    throw ValidationError("benchmark spec: noise parameters must be nonnegative");
  }
}

constexpr double kPrototypeCosineCap = 0.7;
constexpr int kPrototypeDrawBudget = 10000;

// Domain words modulate text features far less than category words do, the
// way style words behave in pretrained text encoders; this sets their token
// magnitude relative to category tokens.
constexpr double kDomainWordScale = 0.35;

Mat sample_prototypes(const BenchmarkSpec& spec) {
  RngStream rng(spec.seed, "prototypes");
  const auto k = static_cast<std::size_t>(spec.latent_dim);
  Mat protos(static_cast<std::size_t>(spec.n_categories), k);
  int draws = 0;
  for (std::size_t c = 0; c < protos.rows; ++c) {
    for (;;) {
      if (++draws > kPrototypeDrawBudget) {
        throw ValidationError(
            "benchmark spec: prototype rejection sampling exhausted; classes "
            "too crowded for latent_dim " +
            std::to_string(spec.latent_dim));
      }
      const Vec candidate = normalized(rng.gaussian_vec(k, 1.0));
      bool ok = true;
      for (std::size_t prev = 0; prev < c && ok; ++prev) {
        ok = cosine(candidate, protos.row_vec(prev)) < kPrototypeCosineCap;
      }
      if (ok) {
        std::copy(candidate.begin(), candidate.end(), protos.row(c));
        break;
      }
    }
  }
  return protos;
}

}  // namespace

Vec Vocabulary::domain_word_token(const std::string& word) const {
  RngStream rng(word_seed, "domain-word:" + word);
  return rng.gaussian_vec(
      static_cast<std::size_t>(token_dim),
      kDomainWordScale / std::sqrt(static_cast<double>(token_dim)));
}

MultiDomainDataset generate_benchmark(const BenchmarkSpec& spec) {
  validate_spec(spec);
  const auto k = static_cast<std::size_t>(spec.latent_dim);
  const auto m = static_cast<std::size_t>(spec.raw_dim);
  const auto d_tok = static_cast<std::size_t>(spec.token_dim);
  const double latent_std = 1.0 / std::sqrt(static_cast<double>(k));
  const double raw_std = 1.0 / std::sqrt(static_cast<double>(m));

  MultiDomainDataset ds;
  ds.spec = spec;
  ds.class_prototypes = sample_prototypes(spec);

  // Shared base map plus per-domain distortions:
  //   A_dom = R_dom * P + scale * Delta_dom,  R_dom = gain * (I + scale * S)
  // so scale = 0 collapses every domain onto the shared mapping. Style
  // shifts are dominated by mixing and gain; the additive offset and bias
  // stay comparatively small, the way feature-space style shifts distort
  // direction and magnitude more than they translate.
  constexpr double kDomainOffsetShare = 0.4;
  constexpr double kDomainBiasShare = 0.2;
  ds.base_map = RngStream(spec.seed, "base-map").gaussian_mat(m, k, latent_std);
  const Mat& base_map = ds.base_map;
  for (int dom = 0; dom < spec.n_domains; ++dom) {
    const std::string tag = std::to_string(dom);
    const Mat mix =
        RngStream(spec.seed, "domain-mix:" + tag).gaussian_mat(m, m, raw_std);
    const Mat offset = RngStream(spec.seed, "domain-offset:" + tag)
                           .gaussian_mat(m, k, latent_std);
    const double gain =
        std::exp(0.5 * spec.domain_transform_scale *
                 RngStream(spec.seed, "domain-gain:" + tag).next_gaussian());
    Mat rotation(m, m);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        rotation.at(i, j) = gain * ((i == j ? 1.0 : 0.0) +
                                    spec.domain_transform_scale * mix.at(i, j));
      }
    }
    DomainParams params;
    params.transform = matmul(rotation, base_map);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        params.transform.at(i, j) += kDomainOffsetShare *
                                     spec.domain_transform_scale *
                                     offset.at(i, j);
      }
    }
    params.bias = RngStream(spec.seed, "domain-bias:" + tag)
                      .gaussian_vec(m, raw_std);
    scale_in_place(params.bias,
                   kDomainBiasShare * spec.domain_transform_scale);
    ds.domain_params.push_back(std::move(params));
  }

  for (int dom = 0; dom < spec.n_domains; ++dom) {
    const DomainParams& params = ds.domain_params[static_cast<std::size_t>(dom)];
    for (int cls = 0; cls < spec.n_categories; ++cls) {
      RngStream cell(spec.seed, "cell:" + std::to_string(dom) + ":" +
                                    std::to_string(cls));
      const Vec proto = ds.class_prototypes.row_vec(static_cast<std::size_t>(cls));
      for (int s = 0; s < spec.samples_per_class_per_domain; ++s) {
        Vec latent = proto;
        axpy(1.0, cell.gaussian_vec(k, spec.noise_std), latent);
        Vec x = matvec(params.transform, latent);
        for (std::size_t i = 0; i < m; ++i) x[i] += params.bias[i];
        axpy(1.0, cell.gaussian_vec(m, spec.noise_std), x);
        ds.samples.push_back(Sample{std::move(x), cls, dom});
      }
    }
  }

  // Category-word tokens carry class signal through a fixed map of the
  // prototypes; this is where the simulated text/image pretraining
  // alignment lives.
  const double token_std = 1.0 / std::sqrt(static_cast<double>(d_tok));
  const Mat align_map =
      RngStream(spec.seed, "align-map").gaussian_mat(d_tok, k, token_std);
  ds.vocabulary.token_dim = spec.token_dim;
  ds.vocabulary.word_seed = spec.seed;
  for (int cls = 0; cls < spec.n_categories; ++cls) {
    Vec token = matvec(align_map,
                       ds.class_prototypes.row_vec(static_cast<std::size_t>(cls)));
    axpy(1.0,
         RngStream(spec.seed, "category-token:" + std::to_string(cls))
             .gaussian_vec(d_tok, spec.alignment_noise_std),
         token);
    ds.vocabulary.category_tokens.push_back(std::move(token));
  }
  return ds;
}

void assign_pool_tokens(DomainWordPool& pool, const Vocabulary& vocab) {
  pool.token_embeddings.clear();
  pool.token_embeddings.reserve(pool.size());
  for (const std::string& word : pool.words) {
    pool.token_embeddings.push_back(vocab.domain_word_token(word));
  }
}

SplitPlan split_train_val(const MultiDomainDataset& ds,
                          const std::vector<int>& sources, std::uint64_t seed) {
  if (sources.empty()) {
    throw DegenerateInputError("split: no source domains");
  }
  SplitPlan plan;
  plan.source_domains = sources;
  std::sort(plan.source_domains.begin(), plan.source_domains.end());
  plan.source_domains.erase(
      std::unique(plan.source_domains.begin(), plan.source_domains.end()),
      plan.source_domains.end());
  for (int dom : plan.source_domains) {
    if (dom < 0 || dom >= ds.spec.n_domains) {
      throw IndexError("split: source domain " + std::to_string(dom) +
                       " out of range");
    }
    std::vector<int> indices;
    for (std::size_t idx = 0; idx < ds.samples.size(); ++idx) {
      if (ds.samples[idx].domain == dom) {
        indices.push_back(static_cast<int>(idx));
      }
    }
    if (indices.size() < 2) {
      throw ValidationError("split: domain " + std::to_string(dom) +
                            " has fewer than 2 samples");
    }
    RngStream rng(seed, "split:" + std::to_string(dom));
    rng.shuffle(indices);
    const std::size_t n_val =
        std::max<std::size_t>(1, indices.size() / 10);
    plan.val_indices.insert(plan.val_indices.end(), indices.begin(),
                            indices.begin() + static_cast<std::ptrdiff_t>(n_val));
    plan.train_indices.insert(plan.train_indices.end(),
                              indices.begin() + static_cast<std::ptrdiff_t>(n_val),
                              indices.end());
  }
  return plan;
}

std::pair<std::vector<int>, int> leave_one_domain_out(
    const MultiDomainDataset& ds, int target) {
  if (target < 0 || target >= ds.spec.n_domains) {
    throw IndexError("leave_one_domain_out: target domain " +
                     std::to_string(target) + " out of range");
  }
  std::vector<int> sources;
  for (int dom = 0; dom < ds.spec.n_domains; ++dom) {
    if (dom != target) sources.push_back(dom);
  }
  return {sources, target};
}

double separability_probe(const MultiDomainDataset& ds,
                          const std::vector<int>& sources) {
  const SplitPlan plan = split_train_val(ds, sources, ds.spec.seed);
  const auto m = static_cast<std::size_t>(ds.spec.raw_dim);
  const auto n_c = static_cast<std::size_t>(ds.spec.n_categories);
  const std::size_t dim = m + 1;  // bias column

  Mat gram(dim, dim);
  Mat xty(dim, n_c);
  Vec aug(dim, 1.0);
  for (int idx : plan.train_indices) {
    const Sample& sample = ds.samples[static_cast<std::size_t>(idx)];
    std::copy(sample.x.begin(), sample.x.end(), aug.begin());
    for (std::size_t i = 0; i < dim; ++i) {
      for (std::size_t j = 0; j < dim; ++j) {
        gram.at(i, j) += aug[i] * aug[j];
      }
      xty.at(i, static_cast<std::size_t>(sample.label)) += aug[i];
    }
  }
  for (std::size_t i = 0; i < dim; ++i) {
    gram.at(i, i) += 1e-6;  // ridge keeps the system positive definite
  }
  const Mat weights = solve_spd(std::move(gram), std::move(xty));

  std::vector<bool> is_source(static_cast<std::size_t>(ds.spec.n_domains), false);
  for (int dom : plan.source_domains) {
    is_source[static_cast<std::size_t>(dom)] = true;
  }
  std::size_t correct = 0;
  std::size_t total = 0;
  for (const Sample& sample : ds.samples) {
    if (is_source[static_cast<std::size_t>(sample.domain)]) continue;
    std::copy(sample.x.begin(), sample.x.end(), aug.begin());
    Vec scores(n_c, 0.0);
    for (std::size_t c = 0; c < n_c; ++c) {
      for (std::size_t i = 0; i < dim; ++i) {
        scores[c] += weights.at(i, c) * aug[i];
      }
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < n_c; ++c) {
      if (scores[c] > scores[best]) best = c;
    }
    correct += (static_cast<int>(best) == sample.label) ? 1 : 0;
    ++total;
  }
  if (total == 0) {
    throw DegenerateInputError("probe: no held-out domain samples");
  }
  return static_cast<double>(correct) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------
// Dataset text format

namespace {

constexpr const char* kDatasetHeader = "tdg-dataset v1";

void write_mat(std::ostream& out, const Mat& m) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < m.cols; ++j) {
      if (j) out << ' ';
      out << fmt_g17(m.at(i, j));
    }
    out << '\n';
  }
}

void write_vec(std::ostream& out, const Vec& v) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out << ' ';
    out << fmt_g17(v[i]);
  }
  out << '\n';
}

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::string next(const char* what) {
    std::string line;
    if (!std::getline(in_, line)) {
      throw ValidationError(std::string("dataset: unexpected end of file, expected ") +
                            what);
    }
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  }

  void expect(const std::string& literal) {
    const std::string line = next(literal.c_str());
    if (line != literal) {
      throw ValidationError("dataset: line " + std::to_string(line_no_) +
                            ": expected \"" + literal + "\", got \"" + line +
                            "\"");
    }
  }

 private:
  std::istream& in_;
  int line_no_ = 0;
};

Vec read_vec(LineReader& reader, std::size_t n, const char* what) {
  const std::vector<std::string> parts = split(reader.next(what), ' ');
  if (parts.size() != n) {
    throw ValidationError(std::string("dataset: ") + what + ": expected " +
                          std::to_string(n) + " values, got " +
                          std::to_string(parts.size()));
  }
  Vec v(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = parse_double(parts[i], what);
  }
  return v;
}

Mat read_mat(LineReader& reader, std::size_t rows, std::size_t cols,
             const char* what) {
  Mat m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    const Vec row = read_vec(reader, cols, what);
    std::copy(row.begin(), row.end(), m.row(i));
  }
  return m;
}

std::string kv_value(const std::string& line, const std::string& key) {
  const std::string prefix = key + " = ";
  if (line.rfind(prefix, 0) != 0) {
    throw ValidationError("dataset: expected \"" + key + " = ...\", got \"" +
                          line + "\"");
  }
  return line.substr(prefix.size());
}

}  // namespace

void save_dataset(const MultiDomainDataset& ds, std::ostream& out) {
  const auto& spec = ds.spec;
  out << kDatasetHeader << '\n';
  out << "[spec]\n";
  out << "n_categories = " << spec.n_categories << '\n';
  out << "n_domains = " << spec.n_domains << '\n';
  out << "samples_per_class_per_domain = " << spec.samples_per_class_per_domain
      << '\n';
  out << "latent_dim = " << spec.latent_dim << '\n';
  out << "raw_dim = " << spec.raw_dim << '\n';
  out << "token_dim = " << spec.token_dim << '\n';
  out << "domain_transform_scale = " << fmt_g17(spec.domain_transform_scale)
      << '\n';
  out << "noise_std = " << fmt_g17(spec.noise_std) << '\n';
  out << "alignment_noise_std = " << fmt_g17(spec.alignment_noise_std) << '\n';
  out << "seed = " << spec.seed << '\n';
  out << "[prototypes " << ds.class_prototypes.rows << ' '
      << ds.class_prototypes.cols << "]\n";
  write_mat(out, ds.class_prototypes);
  out << "[base_map " << ds.base_map.rows << ' ' << ds.base_map.cols << "]\n";
  write_mat(out, ds.base_map);
  for (std::size_t dom = 0; dom < ds.domain_params.size(); ++dom) {
    const DomainParams& params = ds.domain_params[dom];
    out << "[domain " << dom << ' ' << params.transform.rows << ' '
        << params.transform.cols << "]\n";
    write_mat(out, params.transform);
    write_vec(out, params.bias);
  }
  out << "[vocabulary " << ds.vocabulary.category_tokens.size() << ' '
      << ds.vocabulary.token_dim << "]\n";
  for (const Vec& token : ds.vocabulary.category_tokens) {
    write_vec(out, token);
  }
  out << "word_seed = " << ds.vocabulary.word_seed << '\n';
  out << "[samples " << ds.samples.size() << "]\n";
  for (const Sample& sample : ds.samples) {
    out << sample.domain << ',' << sample.label;
    for (double v : sample.x) {
      out << ',' << fmt_g17(v);
    }
    out << '\n';
  }
  out << "[end]\n";
  if (!out) {
    throw IoError("dataset: write failure");
  }
}

void save_dataset_file(const MultiDomainDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("dataset: cannot open " + path + " for writing");
  }
  save_dataset(ds, out);
}

MultiDomainDataset load_dataset(std::istream& in) {
  LineReader reader(in);
  reader.expect(kDatasetHeader);
  reader.expect("[spec]");

  MultiDomainDataset ds;
  BenchmarkSpec& spec = ds.spec;
  spec.n_categories = static_cast<int>(
      parse_int(kv_value(reader.next("n_categories"), "n_categories"), "n_categories"));
  spec.n_domains = static_cast<int>(
      parse_int(kv_value(reader.next("n_domains"), "n_domains"), "n_domains"));
  spec.samples_per_class_per_domain = static_cast<int>(parse_int(
      kv_value(reader.next("samples_per_class_per_domain"),
               "samples_per_class_per_domain"),
      "samples_per_class_per_domain"));
  spec.latent_dim = static_cast<int>(
      parse_int(kv_value(reader.next("latent_dim"), "latent_dim"), "latent_dim"));
  spec.raw_dim = static_cast<int>(
      parse_int(kv_value(reader.next("raw_dim"), "raw_dim"), "raw_dim"));
  spec.token_dim = static_cast<int>(
      parse_int(kv_value(reader.next("token_dim"), "token_dim"), "token_dim"));
  spec.domain_transform_scale =
      parse_double(kv_value(reader.next("domain_transform_scale"),
                            "domain_transform_scale"),
                   "domain_transform_scale");
  spec.noise_std =
      parse_double(kv_value(reader.next("noise_std"), "noise_std"), "noise_std");
  spec.alignment_noise_std = parse_double(
      kv_value(reader.next("alignment_noise_std"), "alignment_noise_std"),
      "alignment_noise_std");
  spec.seed = parse_u64(kv_value(reader.next("seed"), "seed"), "seed");
  validate_spec(spec);

  reader.expect("[prototypes " + std::to_string(spec.n_categories) + ' ' +
                std::to_string(spec.latent_dim) + "]");
  ds.class_prototypes =
      read_mat(reader, static_cast<std::size_t>(spec.n_categories),
               static_cast<std::size_t>(spec.latent_dim), "prototypes");

  reader.expect("[base_map " + std::to_string(spec.raw_dim) + ' ' +
                std::to_string(spec.latent_dim) + "]");
  ds.base_map = read_mat(reader, static_cast<std::size_t>(spec.raw_dim),
                         static_cast<std::size_t>(spec.latent_dim), "base map");

  for (int dom = 0; dom < spec.n_domains; ++dom) {
    reader.expect("[domain " + std::to_string(dom) + ' ' +
                  std::to_string(spec.raw_dim) + ' ' +
                  std::to_string(spec.latent_dim) + "]");
    DomainParams params;
    params.transform =
        read_mat(reader, static_cast<std::size_t>(spec.raw_dim),
                 static_cast<std::size_t>(spec.latent_dim), "domain transform");
    params.bias =
        read_vec(reader, static_cast<std::size_t>(spec.raw_dim), "domain bias");
    ds.domain_params.push_back(std::move(params));
  }

  reader.expect("[vocabulary " + std::to_string(spec.n_categories) + ' ' +
                std::to_string(spec.token_dim) + "]");
  ds.vocabulary.token_dim = spec.token_dim;
  for (int cls = 0; cls < spec.n_categories; ++cls) {
    ds.vocabulary.category_tokens.push_back(read_vec(
        reader, static_cast<std::size_t>(spec.token_dim), "category token"));
  }
  ds.vocabulary.word_seed =
      parse_u64(kv_value(reader.next("word_seed"), "word_seed"), "word_seed");

  const std::string samples_header = reader.next("[samples N]");
  std::size_t n_samples = 0;
  {
    if (samples_header.rfind("[samples ", 0) != 0 ||
        samples_header.back() != ']') {
      throw ValidationError("dataset: malformed samples header \"" +
                            samples_header + "\"");
    }
    n_samples = static_cast<std::size_t>(parse_int(
        samples_header.substr(9, samples_header.size() - 10), "sample count"));
  }
  std::vector<int> cell_counts(
      static_cast<std::size_t>(spec.n_domains * spec.n_categories), 0);
  for (std::size_t n = 0; n < n_samples; ++n) {
    const std::vector<std::string> parts = split(reader.next("sample row"), ',');
    if (parts.size() != 2 + static_cast<std::size_t>(spec.raw_dim)) {
      throw ValidationError("dataset: sample row " + std::to_string(n) +
                            " has wrong field count");
    }
    Sample sample;
    sample.domain = static_cast<int>(parse_int(parts[0], "sample domain"));
    sample.label = static_cast<int>(parse_int(parts[1], "sample label"));
    if (sample.domain < 0 || sample.domain >= spec.n_domains ||
        sample.label < 0 || sample.label >= spec.n_categories) {
      throw ValidationError("dataset: sample row " + std::to_string(n) +
                            " out of range");
    }
    cell_counts[static_cast<std::size_t>(sample.domain * spec.n_categories +
                                         sample.label)] += 1;
    sample.x.resize(static_cast<std::size_t>(spec.raw_dim));
    for (int i = 0; i < spec.raw_dim; ++i) {
      sample.x[static_cast<std::size_t>(i)] =
          parse_double(parts[static_cast<std::size_t>(i) + 2], "sample value");
    }
    ds.samples.push_back(std::move(sample));
  }
  reader.expect("[end]");
  for (int count : cell_counts) {
    if (count != spec.samples_per_class_per_domain) {
      throw ValidationError(
          "dataset: per-cell sample counts do not match the spec");
    }
  }
  return ds;
}

MultiDomainDataset load_dataset_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("dataset: cannot open " + path);
  }
  return load_dataset(in);
}

}  // namespace tdg
