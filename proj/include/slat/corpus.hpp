#pragma once

#include "slat/config.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace slat {

enum class Split { Train, Test };

struct CorpusEntry {
    Trajectory trajectory;
    std::uint64_t seed = 0;
    Split split = Split::Train;
};

/// Simulated run-to-failure trajectories with their train/test split and the
/// normalization statistics fitted on the training split.
struct Corpus {
    std::uint64_t master_seed = 0;
    PipelineConfig pipeline;
    NormStats stats;
    Json sim_config;
    std::vector<CorpusEntry> entries;

    std::vector<Trajectory> trajectories(Split split) const;
    const CorpusEntry* find(const std::string& id) const;
};

/// Per mode: simulate n trajectories from derived seeds, split 80/20 (by
/// default) at trajectory level, then fit normalization on the training
/// trajectories.
Corpus generate_corpus(const CorpusConfig& cfg);

/// manifest.json plus one <id>.csv per trajectory, header
/// t,ch_0..ch_{S-1},rul. Output is byte-deterministic.
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus read_corpus(const std::filesystem::path& dir);

std::string trajectory_csv(const Trajectory& traj, const LabelConfig& labels);
Trajectory parse_trajectory_csv(const std::string& text, const std::string& id, FaultMode mode);

/// Self-contained model file: architecture, every named tensor, and the
/// data-pipeline metadata needed to rebuild input windows.
struct Checkpoint {
    SlatConfig config;
    SlatParams params;
    PipelineConfig pipeline;
    NormStats stats;
};

Json checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const Json& j);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace slat
