#pragma once

#include "slat/degradation_sim.hpp"
#include "slat/model.hpp"
#include "slat/training.hpp"

#include <vector>

#include "json.hpp"

namespace slat {

using Json = nlohmann::ordered_json;

struct CorpusConfig {
    std::uint64_t master_seed = 7;
    std::vector<FaultMode> modes{kAllModes.begin(), kAllModes.end()};
    double train_fraction = 0.8;
    SimConfig sim;  // `mode` and `seed` are set per trajectory
    PipelineConfig pipeline;
};

/// Everything a `--config` file can set. Sections: corpus, sim, pipeline,
/// model, train. Unknown keys are rejected.
struct RunConfig {
    CorpusConfig corpus;
    SlatConfig model;
    TrainConfig train;
};

RunConfig parse_run_config(const Json& j);
RunConfig load_run_config(const std::string& path);
Json to_json(const RunConfig& cfg);

Json to_json(const SimConfig& cfg);
SimConfig sim_config_from_json(const Json& j, SimConfig base = {});
Json to_json(const PipelineConfig& cfg);
PipelineConfig pipeline_config_from_json(const Json& j, PipelineConfig base = {});
Json to_json(const SlatConfig& cfg);
SlatConfig slat_config_from_json(const Json& j, SlatConfig base = {});
Json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const Json& j, TrainConfig base = {});
Json to_json(const NormStats& stats);
NormStats norm_stats_from_json(const Json& j);

Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);

}  // namespace slat
