#include "tdg/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <vector>

#include "tdg/config_file.hpp"
#include "tdg/error.hpp"
#include "tdg/textio.hpp"

namespace tdg {

namespace {

constexpr const char* kHeader = "tdg-checkpoint v1";

void write_block(std::string& out, const std::string& name, std::size_t rows,
                 std::size_t cols, const Vec& data) {
  out += "[tensor " + name + ' ' + std::to_string(rows) + ' ' +
         std::to_string(cols) + "]\n";
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      if (j) out += ' ';
      out += fmt_g17(data[i * cols + j]);
    }
    out += '\n';
  }
}

void write_scalar(std::string& out, const std::string& name, const std::string& value) {
  out += "[scalar " + name + ' ' + value + "]\n";
}

struct Reader {
  std::istringstream in;
  int line_no = 0;

  explicit Reader(const std::string& text) : in(text) {}

  std::string next(const char* what) {
    std::string line;
    if (!std::getline(in, line)) {
      throw ValidationError(std::string("checkpoint: unexpected end, expected ") +
                            what);
    }
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  }

  void expect(const std::string& literal) {
    const std::string line = next(literal.c_str());
    if (line != literal) {
      throw ValidationError("checkpoint: line " + std::to_string(line_no) +
                            ": expected \"" + literal + "\", got \"" + line +
                            "\"");
    }
  }

  std::string read_scalar(const std::string& name) {
    const std::string line = next("scalar");
    const std::string prefix = "[scalar " + name + ' ';
    if (line.rfind(prefix, 0) != 0 || line.back() != ']') {
      throw ValidationError("checkpoint: expected scalar " + name + ", got \"" +
                            line + "\"");
    }
    return line.substr(prefix.size(), line.size() - prefix.size() - 1);
  }
};

}  // namespace

std::string serialize_model(const TrainedModel& model) {
  const TrainConfig& config = model.config;
  std::string out;
  out += kHeader;
  out += '\n';
  out += "[config]\n";
  out += canonical_train_text(config);

  const ModelState& state = model.state;
  write_block(out, "text_encoder.projection", state.text_encoder.projection.rows,
              state.text_encoder.projection.cols,
              state.text_encoder.projection.data);
  write_block(out, "image_encoder.weight", state.image_encoder.weight.rows,
              state.image_encoder.weight.cols, state.image_encoder.weight.data);
  write_block(out, "image_encoder.bias", 1, state.image_encoder.bias.size(),
              state.image_encoder.bias);
  write_block(out, "classifier.heads", state.cls_heads.rows,
              state.cls_heads.cols, state.cls_heads.data);
  write_block(out, "classifier.biases", 1, state.cls_biases.size(),
              state.cls_biases);
  write_scalar(out, "classifier.logit_scale", fmt_g17(state.logit_scale));
  write_block(out, "prompt.ctx1", 1, state.prompt.ctx1.size(), state.prompt.ctx1);
  write_block(out, "prompt.ctx2", 1, state.prompt.ctx2.size(), state.prompt.ctx2);

  const EmaShadows& ema = model.ema;
  write_block(out, "ema.image_encoder.weight", state.image_encoder.weight.rows,
              state.image_encoder.weight.cols, ema.encoder_weight);
  write_block(out, "ema.image_encoder.bias", 1, ema.encoder_bias.size(),
              ema.encoder_bias);
  write_block(out, "ema.classifier.heads", state.cls_heads.rows,
              state.cls_heads.cols, ema.cls_heads);
  write_block(out, "ema.classifier.biases", 1, ema.cls_biases.size(),
              ema.cls_biases);
  write_scalar(out, "ema.decay", fmt_g17(ema.decay));

  write_scalar(out, "selected_step", std::to_string(model.selected_step));
  write_scalar(out, "best_val_accuracy", fmt_g17(model.best_val_accuracy));

  out += "[trace " + std::to_string(model.trace.size()) + "]\n";
  for (const LossTraceRow& row : model.trace) {
    out += std::to_string(row.step);
    out += ',';
    out += fmt_g17(row.image_ce);
    out += ',';
    out += fmt_g17(row.text_ce);
    out += ',';
    out += fmt_g17(row.align);
    out += ',';
    out += fmt_g17(row.sim);
    out += ',';
    out += fmt_g17(row.prompt_total);
    out += '\n';
  }
  out += "[end]\n";
  return out;
}

TrainedModel deserialize_model(const std::string& text) {
  Reader reader(text);
  reader.expect(kHeader);
  reader.expect("[config]");

  std::string config_text;
  for (int i = 0; i < 14; ++i) {
    config_text += reader.next("config line");
    config_text += '\n';
  }
  // The config echo carries no data.* keys; parse against defaults.
  AppConfig parsed = parse_config_text(config_text);

  TrainedModel model;
  model.config = parsed.train;

  ModelState& state = model.state;
  const auto d = static_cast<std::size_t>(model.config.embed_dim);

  // Dimensions come from the block headers themselves; read leniently by
  // scanning the header line of each expected block.
  const auto read_sized = [&](const std::string& name) {
    const std::string header = reader.next("tensor header");
    const std::string prefix = "[tensor " + name + ' ';
    if (header.rfind(prefix, 0) != 0 || header.back() != ']') {
      throw ValidationError("checkpoint: expected tensor " + name + ", got \"" +
                            header + "\"");
    }
    const std::vector<std::string> dims =
        split(header.substr(prefix.size(), header.size() - prefix.size() - 1),
              ' ');
    if (dims.size() != 2) {
      throw ValidationError("checkpoint: malformed tensor header for " + name);
    }
    const auto rows = static_cast<std::size_t>(parse_int(dims[0], "rows"));
    const auto cols = static_cast<std::size_t>(parse_int(dims[1], "cols"));
    Mat m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
      const std::string line = reader.next("tensor row");
      if (cols == 0) {
        if (!line.empty()) {
          throw ValidationError("checkpoint: tensor " + name +
                                ": expected empty row");
        }
        continue;
      }
      const std::vector<std::string> parts = split(line, ' ');
      if (parts.size() != cols) {
        throw ValidationError("checkpoint: tensor " + name + ": wrong row length");
      }
      for (std::size_t j = 0; j < cols; ++j) {
        m.at(i, j) = parse_double(parts[j], name.c_str());
      }
    }
    return m;
  };

  state.text_encoder.projection = read_sized("text_encoder.projection");
  state.image_encoder.weight = read_sized("image_encoder.weight");
  state.image_encoder.bias = read_sized("image_encoder.bias").data;
  state.cls_heads = read_sized("classifier.heads");
  state.cls_biases = read_sized("classifier.biases").data;
  state.logit_scale =
      parse_double(reader.read_scalar("classifier.logit_scale"), "logit_scale");
  state.prompt.ctx1 = read_sized("prompt.ctx1").data;
  state.prompt.ctx2 = read_sized("prompt.ctx2").data;

  EmaShadows& ema = model.ema;
  ema.encoder_weight = read_sized("ema.image_encoder.weight").data;
  ema.encoder_bias = read_sized("ema.image_encoder.bias").data;
  ema.cls_heads = read_sized("ema.classifier.heads").data;
  ema.cls_biases = read_sized("ema.classifier.biases").data;
  ema.decay = parse_double(reader.read_scalar("ema.decay"), "ema.decay");

  model.selected_step = static_cast<int>(
      parse_int(reader.read_scalar("selected_step"), "selected_step"));
  model.best_val_accuracy = parse_double(
      reader.read_scalar("best_val_accuracy"), "best_val_accuracy");

  const std::string trace_header = reader.next("trace header");
  if (trace_header.rfind("[trace ", 0) != 0 || trace_header.back() != ']') {
    throw ValidationError("checkpoint: malformed trace header");
  }
  const auto n_rows = static_cast<std::size_t>(parse_int(
      trace_header.substr(7, trace_header.size() - 8), "trace count"));
  for (std::size_t i = 0; i < n_rows; ++i) {
    const std::vector<std::string> parts = split(reader.next("trace row"), ',');
    if (parts.size() != 6) {
      throw ValidationError("checkpoint: trace row has wrong field count");
    }
    LossTraceRow row;
    row.step = static_cast<int>(parse_int(parts[0], "trace step"));
    row.image_ce = parse_double(parts[1], "trace image_ce");
    row.text_ce = parse_double(parts[2], "trace text_ce");
    row.align = parse_double(parts[3], "trace align");
    row.sim = parse_double(parts[4], "trace sim");
    row.prompt_total = parse_double(parts[5], "trace prompt_total");
    model.trace.push_back(row);
  }
  reader.expect("[end]");

  if (state.image_encoder.weight.rows != d ||
      state.cls_heads.cols != d) {
    throw ValidationError("checkpoint: embed_dim does not match tensors");
  }
  return model;
}

void save_model_file(const TrainedModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("checkpoint: cannot open " + path + " for writing");
  }
  const std::string text = serialize_model(model);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) {
    throw IoError("checkpoint: write failure on " + path);
  }
}

TrainedModel load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("checkpoint: cannot open " + path);
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) {
    throw IoError("checkpoint: read failure on " + path);
  }
  return deserialize_model(buffer.str());
}

}  // namespace tdg
