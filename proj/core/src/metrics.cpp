#include "tdg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "tdg/error.hpp"
#include "tdg/textio.hpp"

namespace tdg {

namespace {

constexpr const char* kCsvHeader = "arm,protocol,source,target,seed,accuracy";

int aggregate_rank(const std::string& seed) {
  if (seed == "mean") return 0;
  if (seed == "std") return 1;
  if (seed == "gain") return 2;
  return -1;
}

std::tuple<std::string, std::string, std::string, std::string> group_key(
    const MetricRow& row) {
  return {row.protocol, row.arm, row.source, row.target};
}

}  // namespace

bool is_aggregate_seed(const std::string& seed) {
  return aggregate_rank(seed) >= 0;
}

void MetricsTable::add_comment(const std::string& key, const std::string& value) {
  comments.push_back(key + "=" + value);
}

void finalize_table(MetricsTable& table) {
  std::vector<MetricRow> raw;
  raw.reserve(table.rows.size());
  for (const MetricRow& row : table.rows) {
    if (is_aggregate_seed(row.seed)) continue;
    raw.push_back(row);
  }
  std::sort(raw.begin(), raw.end(), [](const MetricRow& a, const MetricRow& b) {
    const auto ka = std::make_tuple(a.protocol, a.arm, a.source, a.target,
                                    parse_u64(a.seed, "seed"));
    const auto kb = std::make_tuple(b.protocol, b.arm, b.source, b.target,
                                    parse_u64(b.seed, "seed"));
    return ka < kb;
  });

  // Per-(arm, protocol, source, target) groups, plus one overall group per
  // (arm, protocol).
  std::map<std::tuple<std::string, std::string, std::string, std::string>,
           std::vector<double>>
      groups;
  for (const MetricRow& row : raw) {
    groups[group_key(row)].push_back(row.accuracy);
    groups[{row.protocol, row.arm, "all", "all"}].push_back(row.accuracy);
  }

  const auto mean_of = [](const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
  };
  const auto std_of = [&](const std::vector<double>& xs) {
    const double mu = mean_of(xs);
    double s = 0.0;
    for (double x : xs) s += (x - mu) * (x - mu);
    return std::sqrt(s / static_cast<double>(xs.size()));
  };

  std::vector<MetricRow> aggregates;
  for (const auto& [key, values] : groups) {
    const auto& [protocol, arm, source, target] = key;
    aggregates.push_back({arm, protocol, source, target, "mean", mean_of(values)});
    aggregates.push_back({arm, protocol, source, target, "std", std_of(values)});
    const auto erm_it = groups.find({protocol, "ERM", source, target});
    if (erm_it != groups.end()) {
      aggregates.push_back({arm, protocol, source, target, "gain",
                            mean_of(values) - mean_of(erm_it->second)});
    }
  }
  std::sort(aggregates.begin(), aggregates.end(),
            [](const MetricRow& a, const MetricRow& b) {
              const auto ka = std::make_tuple(a.protocol, a.arm, a.source,
                                              a.target, aggregate_rank(a.seed));
              const auto kb = std::make_tuple(b.protocol, b.arm, b.source,
                                              b.target, aggregate_rank(b.seed));
              return ka < kb;
            });

  table.rows = std::move(raw);
  table.rows.insert(table.rows.end(), aggregates.begin(), aggregates.end());
}

std::string to_csv(const MetricsTable& table) {
  std::string out;
  for (const std::string& comment : table.comments) {
    out += "# ";
    out += comment;
    out += '\n';
  }
  out += kCsvHeader;
  out += '\n';
  for (const MetricRow& row : table.rows) {
    out += row.arm;
    out += ',';
    out += row.protocol;
    out += ',';
    out += row.source;
    out += ',';
    out += row.target;
    out += ',';
    out += row.seed;
    out += ',';
    out += fmt_f6(row.accuracy);
    out += '\n';
  }
  return out;
}

MetricsTable parse_csv(const std::string& text) {
  MetricsTable table;
  std::istringstream in(text);
  std::string line;
  bool header_seen = false;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (header_seen) {
        throw ValidationError("metrics csv: comment after header at line " +
                              std::to_string(line_no));
      }
      std::string body = line.substr(1);
      if (!body.empty() && body.front() == ' ') body.erase(0, 1);
      table.comments.push_back(body);
      continue;
    }
    if (!header_seen) {
      if (line != kCsvHeader) {
        throw ValidationError("metrics csv: bad header at line " +
                              std::to_string(line_no));
      }
      header_seen = true;
      continue;
    }
    const std::vector<std::string> parts = split(line, ',');
    if (parts.size() != 6) {
      throw ValidationError("metrics csv: wrong field count at line " +
                            std::to_string(line_no));
    }
    MetricRow row;
    row.arm = parts[0];
    row.protocol = parts[1];
    row.source = parts[2];
    row.target = parts[3];
    row.seed = parts[4];
    row.accuracy = parse_double(parts[5], "accuracy");
    table.rows.push_back(std::move(row));
  }
  if (!header_seen) {
    throw ValidationError("metrics csv: missing header");
  }
  return table;
}

namespace {

std::string json_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '"':
        out += "\\\"";
        break;
      case '\\':
        out += "\\\\";
        break;
      case '\n':
        out += "\\n";
        break;
      default:
        out += c;
    }
  }
  return out;
}

}  // namespace

std::string to_json(const MetricsTable& table) {
  std::string out = "{\n  \"format\": \"tdg-metrics\",\n  \"comments\": [";
  for (std::size_t i = 0; i < table.comments.size(); ++i) {
    if (i) out += ", ";
    out += '"' + json_escape(table.comments[i]) + '"';
  }
  out += "],\n  \"columns\": [\"arm\", \"protocol\", \"source\", \"target\", "
         "\"seed\", \"accuracy\"],\n  \"rows\": [\n";
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const MetricRow& row = table.rows[i];
    out += "    [\"" + json_escape(row.arm) + "\", \"" +
           json_escape(row.protocol) + "\", \"" + json_escape(row.source) +
           "\", \"" + json_escape(row.target) + "\", \"" +
           json_escape(row.seed) + "\", " + fmt_f6(row.accuracy) + "]";
    if (i + 1 < table.rows.size()) out += ',';
    out += '\n';
  }
  out += "  ]\n}\n";
  return out;
}

std::size_t emit_table_file(const MetricsTable& table, const std::string& format,
                            const std::string& path) {
  std::string payload;
  if (format == "csv") {
    payload = to_csv(table);
  } else if (format == "json") {
    payload = to_json(table);
  } else {
    throw ConfigError("emit_table: unknown format \"" + format +
                      "\" (expected csv or json)");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("emit_table: cannot open " + path + " for writing");
  }
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) {
    throw IoError("emit_table: write failure on " + path);
  }
  return payload.size();
}

}  // namespace tdg
