#pragma once

#include <string>
#include <string_view>

#include "meltgraph/metrics.hpp"
#include "meltgraph/training.hpp"

namespace meltgraph {

/// JSON document holding the model spec, standardizer, loss history and
/// every named tensor. Doubles round-trip bit-exactly.
std::string model_to_json(const TrainedModel& model);
TrainedModel model_from_json(std::string_view text);

std::string model_spec_to_json(const ModelSpec& spec);

std::string report_to_json(const EvalReport& report);

}  // namespace meltgraph
