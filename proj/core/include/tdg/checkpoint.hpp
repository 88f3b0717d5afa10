#pragma once

#include <iosfwd>
#include <string>

#include "tdg/train.hpp"

namespace tdg {

// Self-describing text checkpoint: config echo, named parameter blocks with
// shapes, EMA shadows, loss trace. save(load(x)) is byte-identical to x.
std::string serialize_model(const TrainedModel& model);
TrainedModel deserialize_model(const std::string& text);

void save_model_file(const TrainedModel& model, const std::string& path);
TrainedModel load_model_file(const std::string& path);

}  // namespace tdg
