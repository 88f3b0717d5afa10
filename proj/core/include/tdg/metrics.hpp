#pragma once

#include <string>
#include <vector>

#include "tdg/vec.hpp"

namespace tdg {

// One result row. `seed` is the decimal run seed for raw rows, or one of
// "mean" / "std" / "gain" for aggregate rows. `source`/`target` are domain
// ids, "rest" (pooled leave-one-out sources) or "all" (overall aggregates).
struct MetricRow {
  std::string arm;
  std::string protocol;
  std::string source;
  std::string target;
  std::string seed;
  double accuracy = 0.0;

  bool operator==(const MetricRow&) const = default;
};

struct MetricsTable {
  std::vector<std::string> comments;  // emitted verbatim as leading '#' lines
  std::vector<MetricRow> rows;        // raw rows first, then aggregates

  void add_comment(const std::string& key, const std::string& value);
};

bool is_aggregate_seed(const std::string& seed);

// Sorts raw rows canonically and appends mean/std rows per (arm, protocol,
// source, target) group plus per-arm overall rows (source/target = "all").
// When a group shares its (protocol, source, target) with an ERM group,
// also appends "gain" rows (difference of means against ERM).
void finalize_table(MetricsTable& table);

// CSV with exactly the columns arm,protocol,source,target,seed,accuracy;
// accuracies printed with six fractional digits; trailing newline.
// parse/emit round-trips byte-identically.
std::string to_csv(const MetricsTable& table);
MetricsTable parse_csv(const std::string& text);

// JSON mirror of the same schema.
std::string to_json(const MetricsTable& table);

// Writes in the requested format ("csv" or "json"); returns bytes written.
std::size_t emit_table_file(const MetricsTable& table, const std::string& format,
                            const std::string& path);

}  // namespace tdg
