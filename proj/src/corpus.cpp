#include "slat/corpus.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace slat {

namespace fs = std::filesystem;

namespace {

constexpr int kFormatVersion = 1;

std::string trajectory_id(FaultMode mode, Index i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s-%03lld", std::string(mode_tag(mode)).c_str(),
                  static_cast<long long>(i));
    return buf;
}

double parse_double(std::string_view field, const std::string& where) {
    double value = 0.0;
    const auto* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, value);
    require(ec == std::errc{} && ptr == end, ErrorCode::InvalidInput,
            where + ": cannot parse number '" + std::string(field) + "'");
    return value;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t begin = 0;
    while (true) {
        const std::size_t comma = line.find(',', begin);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(begin));
            return out;
        }
        out.push_back(line.substr(begin, comma - begin));
        begin = comma + 1;
    }
}

std::string csv_header(Index channels) {
    std::string h = "t";
    for (Index c = 0; c < channels; ++c) h += ",ch_" + std::to_string(c);
    return h + ",rul";
}

}  // namespace

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    require(out.good(), ErrorCode::Io, "write failed for '" + path.string() + "'");
}

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorCode::Io, "cannot open '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<Trajectory> Corpus::trajectories(Split split) const {
    std::vector<Trajectory> out;
    for (const auto& e : entries) {
        if (e.split == split) out.push_back(e.trajectory);
    }
    return out;
}

const CorpusEntry* Corpus::find(const std::string& id) const {
    for (const auto& e : entries) {
        if (e.trajectory.id == id) return &e;
    }
    return nullptr;
}

Corpus generate_corpus(const CorpusConfig& cfg) {
    validate_pipeline(cfg.pipeline);
    require(!cfg.modes.empty(), ErrorCode::Config, "corpus needs at least one fault mode");
    require(cfg.sim.n_trajectories >= 2, ErrorCode::Config,
            "need at least 2 trajectories per mode for a train/test split");
    require(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0, ErrorCode::Config,
            "train_fraction must lie in (0, 1)");
    require(cfg.sim.min_length >= 2 * cfg.pipeline.n_stw, ErrorCode::Config,
            "sim.min_length must be at least twice the window length");

    Corpus corpus;
    corpus.master_seed = cfg.master_seed;
    corpus.pipeline = cfg.pipeline;
    corpus.sim_config = to_json(cfg.sim);

    const Index n = cfg.sim.n_trajectories;
    for (FaultMode mode : cfg.modes) {
        const std::string tag(mode_tag(mode));
        SimConfig sim = cfg.sim;
        sim.mode = mode;
        sim.seed = derive_seed(cfg.master_seed, "mode:" + tag);

        const auto n_test = std::max<Index>(
            1, static_cast<Index>(std::lround(static_cast<double>(n) * (1.0 - cfg.train_fraction))));
        require(n_test < n, ErrorCode::Config, "train split for " + tag + " would be empty");
        std::vector<Index> order(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
        Rng split_rng(derive_seed(cfg.master_seed, "split:" + tag));
        split_rng.shuffle(order);
        std::vector<bool> is_test(static_cast<std::size_t>(n), false);
        for (Index i = 0; i < n_test; ++i) is_test[static_cast<std::size_t>(order[i])] = true;

        for (Index i = 0; i < n; ++i) {
            CorpusEntry entry;
            entry.seed = derive_seed(sim.seed, "trajectory", static_cast<std::uint64_t>(i));
            entry.trajectory = simulate_trajectory(sim, entry.seed);
            entry.trajectory.id = trajectory_id(mode, i);
            entry.split = is_test[static_cast<std::size_t>(i)] ? Split::Test : Split::Train;
            corpus.entries.push_back(std::move(entry));
        }
    }
    const auto train = corpus.trajectories(Split::Train);
    corpus.stats = fit_norm_stats(train, cfg.pipeline.n_stw, cfg.pipeline.stride);
    return corpus;
}

std::string trajectory_csv(const Trajectory& traj, const LabelConfig& labels) {
    const Vector rul = label_rul(traj, labels);
    std::string out = csv_header(traj.channel_count()) + "\n";
    for (Index t = 0; t < traj.length(); ++t) {
        out += std::to_string(t);
        for (Index c = 0; c < traj.channel_count(); ++c) {
            out += ',';
            out += format_double(traj.channels(t, c));
        }
        out += ',';
        out += format_double(rul[t]);
        out += '\n';
    }
    return out;
}

Trajectory parse_trajectory_csv(const std::string& text, const std::string& id, FaultMode mode) {
    std::vector<std::string_view> lines;
    std::string_view rest(text);
    while (!rest.empty()) {
        const std::size_t nl = rest.find('\n');
        lines.push_back(rest.substr(0, nl));
        if (nl == std::string_view::npos) break;
        rest.remove_prefix(nl + 1);
    }
    require(lines.size() >= 3, ErrorCode::InvalidInput, id + ": CSV needs a header and 2 rows");
    const auto header = split_fields(lines.front());
    require(header.size() >= 3 && header.front() == "t" && header.back() == "rul",
            ErrorCode::InvalidInput, id + ": unexpected CSV header");
    const auto channels = static_cast<Index>(header.size()) - 2;
    require(std::string(lines.front()) == csv_header(channels), ErrorCode::InvalidInput,
            id + ": unexpected CSV header");

    Trajectory traj;
    traj.id = id;
    traj.mode = mode;
    traj.channels.resize(static_cast<Index>(lines.size()) - 1, channels);
    for (std::size_t row = 1; row < lines.size(); ++row) {
        const std::string where = id + ":" + std::to_string(row + 1);
        const auto fields = split_fields(lines[row]);
        require(static_cast<Index>(fields.size()) == channels + 2, ErrorCode::InvalidInput,
                where + ": wrong field count");
        const double t = parse_double(fields[0], where);
        require(t == static_cast<double>(row - 1), ErrorCode::InvalidInput,
                where + ": time index out of sequence");
        for (Index c = 0; c < channels; ++c) {
            traj.channels(static_cast<Index>(row) - 1, c) =
                parse_double(fields[static_cast<std::size_t>(c + 1)], where);
        }
    }
    traj.failure_index = traj.length() - 1;
    validate_trajectory(traj);
    return traj;
}

void write_corpus(const Corpus& corpus, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    require(!ec, ErrorCode::Io, "cannot create '" + dir.string() + "': " + ec.message());

    Json trajs = Json::array();
    for (const auto& e : corpus.entries) {
        const std::string file = e.trajectory.id + ".csv";
        write_text_file(dir / file, trajectory_csv(e.trajectory, corpus.pipeline.labels));
        trajs.push_back({{"id", e.trajectory.id},
                         {"mode", std::string(mode_tag(e.trajectory.mode))},
                         {"failure_index", e.trajectory.failure_index},
                         {"seed", e.seed},
                         {"split", e.split == Split::Train ? "train" : "test"},
                         {"file", file}});
    }
    Json channels = Json::array();
    for (auto name : channel_names()) channels.push_back(std::string(name));

    Json manifest = {{"format", "slat-corpus"},
                     {"version", kFormatVersion},
                     {"master_seed", corpus.master_seed},
                     {"pipeline", to_json(corpus.pipeline)},
                     {"channels", channels},
                     {"norm_stats", to_json(corpus.stats)},
                     {"sim", corpus.sim_config},
                     {"trajectories", trajs}};
    write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

Corpus read_corpus(const fs::path& dir) {
    Json manifest;
    try {
        manifest = Json::parse(read_text_file(dir / "manifest.json"));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::InvalidInput, (dir / "manifest.json").string() + ": " + e.what());
    }
    try {
        require(manifest.at("format") == "slat-corpus", ErrorCode::InvalidInput,
                "not a corpus manifest: " + dir.string());
        require(manifest.at("version") == kFormatVersion, ErrorCode::InvalidInput,
                "unsupported corpus version");
        Corpus corpus;
        corpus.master_seed = manifest.at("master_seed").get<std::uint64_t>();
        corpus.pipeline = pipeline_config_from_json(manifest.at("pipeline"));
        corpus.stats = norm_stats_from_json(manifest.at("norm_stats"));
        corpus.sim_config = manifest.at("sim");
        for (const auto& t : manifest.at("trajectories")) {
            const std::string id = t.at("id").get<std::string>();
            const auto mode = parse_mode(t.at("mode").get<std::string>());
            require(mode.has_value(), ErrorCode::InvalidInput, id + ": unknown fault mode");
            const fs::path file = dir / t.at("file").get<std::string>();
            CorpusEntry e;
            e.trajectory = parse_trajectory_csv(read_text_file(file), id, *mode);
            require(e.trajectory.failure_index == t.at("failure_index").get<Index>(),
                    ErrorCode::InvalidInput, id + ": row count disagrees with failure_index");
            require(e.trajectory.channel_count() == corpus.stats.channel_mean.size(),
                    ErrorCode::InvalidInput, id + ": channel count disagrees with manifest");
            e.seed = t.at("seed").get<std::uint64_t>();
            const std::string split = t.at("split").get<std::string>();
            require(split == "train" || split == "test", ErrorCode::InvalidInput,
                    id + ": split must be train or test");
            e.split = split == "train" ? Split::Train : Split::Test;
            corpus.entries.push_back(std::move(e));
        }
        return corpus;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::InvalidInput, (dir / "manifest.json").string() + ": " + e.what());
    }
}

Json checkpoint_to_json(const Checkpoint& ckpt) {
    Json tensors = Json::object();
    for (const auto& t : ckpt.params.tensors()) tensors[t.name] = matrix_to_json(*t.tensor);
    return {{"format", "slat-checkpoint"},
            {"version", kFormatVersion},
            {"config", to_json(ckpt.config)},
            {"pipeline", to_json(ckpt.pipeline)},
            {"norm_stats", to_json(ckpt.stats)},
            {"param_count", ckpt.params.size()},
            {"tensors", tensors}};
}

Checkpoint checkpoint_from_json(const Json& j) {
    try {
        require(j.at("format") == "slat-checkpoint", ErrorCode::InvalidInput,
                "not a checkpoint file");
        require(j.at("version") == kFormatVersion, ErrorCode::InvalidInput,
                "unsupported checkpoint version");
        Checkpoint ckpt;
        ckpt.config = slat_config_from_json(j.at("config"));
        ckpt.pipeline = pipeline_config_from_json(j.at("pipeline"));
        ckpt.stats = norm_stats_from_json(j.at("norm_stats"));
        ckpt.params = zero_params(ckpt.config);
        const Json& tensors = j.at("tensors");
        auto named = ckpt.params.tensors();
        require(tensors.size() == named.size(), ErrorCode::InvalidInput,
                "checkpoint tensor count does not match its config");
        for (auto& t : named) {
            require(tensors.contains(t.name), ErrorCode::InvalidInput,
                    "checkpoint is missing tensor '" + t.name + "'");
            Matrix m = matrix_from_json(tensors.at(t.name));
            require(m.rows() == t.tensor->rows() && m.cols() == t.tensor->cols(),
                    ErrorCode::InvalidInput, "tensor '" + t.name + "' has the wrong shape");
            require(m.allFinite(), ErrorCode::InvalidInput,
                    "tensor '" + t.name + "' holds non-finite values");
            *t.tensor = std::move(m);
        }
        return ckpt;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::InvalidInput, std::string("malformed checkpoint: ") + e.what());
    }
}

void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
    write_text_file(path, checkpoint_to_json(ckpt).dump() + "\n");
}

Checkpoint load_checkpoint(const fs::path& path) {
    Json j;
    try {
        j = Json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::InvalidInput, path.string() + ": " + e.what());
    }
    return checkpoint_from_json(j);
}

}  // namespace slat
