#include "slat/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace slat {

namespace {

/// Reads optional keys from one JSON object and rejects anything unread.
class Fields {
public:
    Fields(const Json& j, std::string section) : j_(j), section_(std::move(section)) {
        require(j_.is_object(), ErrorCode::Config, "config section '" + section_ +
                                                       "' must be an object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        if (!j_.contains(key)) return;
        seen_.insert(key);
        try {
            out = j_.at(key).get<T>();
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::Config, section_ + "." + key + ": " + e.what());
        }
    }

    const Json* sub(const char* key) {
        if (!j_.contains(key)) return nullptr;
        seen_.insert(key);
        return &j_.at(key);
    }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            require(seen_.contains(key), ErrorCode::Config,
                    "unknown config key '" + section_ + "." + key + "'");
        }
    }

    const std::string& section() const { return section_; }

private:
    const Json& j_;
    std::string section_;
    std::set<std::string> seen_;
};

Json bounds_json(const DriftBounds& b) { return Json::array({b.lo, b.hi}); }

DriftBounds bounds_from(const Json& j, const std::string& where) {
    require(j.is_array() && j.size() == 2, ErrorCode::Config, where + " must be [lo, hi]");
    return {j[0].get<double>(), j[1].get<double>()};
}

std::string mask_mode_name(MaskMode m) { return m == MaskMode::Exclude ? "exclude" : "hadamard"; }

}  // namespace

Json matrix_to_json(const Matrix& m) {
    Json data = Json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index k = 0; k < m.cols(); ++k) data.push_back(m(i, k));
    }
    return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix matrix_from_json(const Json& j) {
    try {
        const Index rows = j.at("rows").get<Index>();
        const Index cols = j.at("cols").get<Index>();
        const Json& data = j.at("data");
        require(rows >= 0 && cols >= 0 && data.is_array() &&
                    static_cast<Index>(data.size()) == rows * cols,
                ErrorCode::InvalidInput, "tensor data length does not match its shape");
        Matrix m(rows, cols);
        for (Index i = 0; i < rows; ++i) {
            for (Index k = 0; k < cols; ++k) {
                m(i, k) = data[static_cast<std::size_t>(i * cols + k)].get<double>();
            }
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::InvalidInput, std::string("malformed tensor: ") + e.what());
    }
}

Json to_json(const SimConfig& c) {
    const AmplifierModel& a = c.amplifier;
    Json amp = {{"input_power_dbm", a.input_power_dbm},
                {"stage1_gain_per_mw", a.stage1_gain_per_mw},
                {"stage2_gain_per_mw", a.stage2_gain_per_mw},
                {"pump_efficiency", a.pump_efficiency},
                {"efficiency_spread", a.efficiency_spread},
                {"stage1_target_db", a.stage1_target_db},
                {"target_gain_db", a.target_gain_db},
                {"voa_setting_db", a.voa_setting_db},
                {"passive_loss_db", a.passive_loss_db},
                {"max_current_ma", a.max_current_ma},
                {"case_temperature_c", a.case_temperature_c},
                {"kp", a.kp},
                {"ki", a.ki},
                {"agc_iterations", a.agc_iterations}};
    Json thresholds = {{"pump_current_limit_ma", c.thresholds.pump_current_limit_ma},
                       {"pd_bias_limit_db", c.thresholds.pd_bias_limit_db},
                       {"voa_error_limit_db", c.thresholds.voa_error_limit_db},
                       {"passive_loss_limit_db", c.thresholds.passive_loss_limit_db}};
    return {{"step_period", c.step_period},
            {"amplifier", amp},
            {"pump_tau", bounds_json(c.pump_tau)},
            {"pd_bias_rate", bounds_json(c.pd_bias_rate)},
            {"voa_drift_rate", bounds_json(c.voa_drift_rate)},
            {"passive_loss_rate", bounds_json(c.passive_loss_rate)},
            {"drift_scale", c.drift_scale},
            {"noise_std", c.noise_std},
            {"thresholds", thresholds},
            {"n_trajectories", c.n_trajectories},
            {"max_steps", c.max_steps},
            {"min_length", c.min_length}};
}

SimConfig sim_config_from_json(const Json& j, SimConfig c) {
    Fields f(j, "sim");
    f.get("step_period", c.step_period);
    f.get("drift_scale", c.drift_scale);
    f.get("n_trajectories", c.n_trajectories);
    f.get("max_steps", c.max_steps);
    f.get("min_length", c.min_length);
    for (auto [key, target] : {std::pair{"pump_tau", &c.pump_tau},
                               std::pair{"pd_bias_rate", &c.pd_bias_rate},
                               std::pair{"voa_drift_rate", &c.voa_drift_rate},
                               std::pair{"passive_loss_rate", &c.passive_loss_rate}}) {
        if (const Json* b = f.sub(key)) *target = bounds_from(*b, std::string("sim.") + key);
    }
    if (const Json* n = f.sub("noise_std")) {
        require(n->is_array() && n->size() == kChannelCount, ErrorCode::Config,
                "sim.noise_std must list one value per channel");
        for (std::size_t i = 0; i < kChannelCount; ++i) c.noise_std[i] = (*n)[i].get<double>();
    }
    if (const Json* a = f.sub("amplifier")) {
        Fields af(*a, "sim.amplifier");
        AmplifierModel& m = c.amplifier;
        af.get("input_power_dbm", m.input_power_dbm);
        af.get("stage1_gain_per_mw", m.stage1_gain_per_mw);
        af.get("stage2_gain_per_mw", m.stage2_gain_per_mw);
        af.get("pump_efficiency", m.pump_efficiency);
        af.get("efficiency_spread", m.efficiency_spread);
        af.get("stage1_target_db", m.stage1_target_db);
        af.get("target_gain_db", m.target_gain_db);
        af.get("voa_setting_db", m.voa_setting_db);
        af.get("passive_loss_db", m.passive_loss_db);
        af.get("max_current_ma", m.max_current_ma);
        af.get("case_temperature_c", m.case_temperature_c);
        af.get("kp", m.kp);
        af.get("ki", m.ki);
        af.get("agc_iterations", m.agc_iterations);
        af.finish();
    }
    if (const Json* t = f.sub("thresholds")) {
        Fields tf(*t, "sim.thresholds");
        tf.get("pump_current_limit_ma", c.thresholds.pump_current_limit_ma);
        tf.get("pd_bias_limit_db", c.thresholds.pd_bias_limit_db);
        tf.get("voa_error_limit_db", c.thresholds.voa_error_limit_db);
        tf.get("passive_loss_limit_db", c.thresholds.passive_loss_limit_db);
        tf.finish();
    }
    f.finish();
    return c;
}

Json to_json(const PipelineConfig& c) {
    return {{"n_stw", c.n_stw}, {"stride", c.stride}, {"rul_cap", c.labels.rul_cap}};
}

PipelineConfig pipeline_config_from_json(const Json& j, PipelineConfig c) {
    Fields f(j, "pipeline");
    f.get("n_stw", c.n_stw);
    f.get("stride", c.stride);
    f.get("rul_cap", c.labels.rul_cap);
    f.finish();
    return c;
}

Json to_json(const SlatConfig& c) {
    return {{"d_model", c.d_model},
            {"time_blocks", c.time_blocks},
            {"sensor_blocks", c.sensor_blocks},
            {"decoder_blocks", c.decoder_blocks},
            {"heads", c.heads},
            {"ffn_mult", c.ffn_mult},
            {"rank", c.rank},
            {"low_rank", c.low_rank},
            {"band", c.band},
            {"globals", c.globals},
            {"sensor_band", c.sensor_band},
            {"sensor_globals", c.sensor_globals},
            {"mask_mode", mask_mode_name(c.mask_mode)},
            {"n_stw", c.n_stw},
            {"n_channels", c.n_channels},
            {"dropout", c.dropout},
            {"rul_cap", c.rul_cap},
            {"layer_norm_eps", c.layer_norm_eps}};
}

SlatConfig slat_config_from_json(const Json& j, SlatConfig c) {
    Fields f(j, "model");
    f.get("d_model", c.d_model);
    f.get("time_blocks", c.time_blocks);
    f.get("sensor_blocks", c.sensor_blocks);
    f.get("decoder_blocks", c.decoder_blocks);
    f.get("heads", c.heads);
    f.get("ffn_mult", c.ffn_mult);
    f.get("rank", c.rank);
    f.get("low_rank", c.low_rank);
    f.get("band", c.band);
    f.get("globals", c.globals);
    f.get("sensor_band", c.sensor_band);
    f.get("sensor_globals", c.sensor_globals);
    std::string mode = mask_mode_name(c.mask_mode);
    f.get("mask_mode", mode);
    require(mode == "exclude" || mode == "hadamard", ErrorCode::Config,
            "model.mask_mode must be 'exclude' or 'hadamard'");
    c.mask_mode = mode == "exclude" ? MaskMode::Exclude : MaskMode::Hadamard;
    f.get("n_stw", c.n_stw);
    f.get("n_channels", c.n_channels);
    f.get("dropout", c.dropout);
    f.get("rul_cap", c.rul_cap);
    f.get("layer_norm_eps", c.layer_norm_eps);
    f.finish();
    return c;
}

Json to_json(const TrainConfig& c) {
    return {{"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
            {"epochs", c.epochs},               {"beta1", c.beta1},
            {"beta2", c.beta2},                 {"epsilon", c.epsilon},
            {"seed", c.seed},                   {"validation_fraction", c.validation_fraction},
            {"clip_norm", c.clip_norm}};
}

TrainConfig train_config_from_json(const Json& j, TrainConfig c) {
    Fields f(j, "train");
    f.get("learning_rate", c.learning_rate);
    f.get("batch_size", c.batch_size);
    f.get("epochs", c.epochs);
    f.get("beta1", c.beta1);
    f.get("beta2", c.beta2);
    f.get("epsilon", c.epsilon);
    f.get("seed", c.seed);
    f.get("validation_fraction", c.validation_fraction);
    f.get("clip_norm", c.clip_norm);
    f.finish();
    return c;
}

Json to_json(const NormStats& s) {
    auto vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    return {{"channel_mean", vec(s.channel_mean)},
            {"channel_std", vec(s.channel_std)},
            {"descriptor_mean", vec(s.descriptor_mean)},
            {"descriptor_std", vec(s.descriptor_std)}};
}

NormStats norm_stats_from_json(const Json& j) {
    auto vec = [&](const char* key) {
        require(j.contains(key) && j.at(key).is_array(), ErrorCode::InvalidInput,
                std::string("normalization stats missing '") + key + "'");
        const auto values = j.at(key).get<std::vector<double>>();
        return Vector(Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size())));
    };
    NormStats s;
    s.channel_mean = vec("channel_mean");
    s.channel_std = vec("channel_std");
    s.descriptor_mean = vec("descriptor_mean");
    s.descriptor_std = vec("descriptor_std");
    require(s.channel_mean.size() == s.channel_std.size() &&
                s.descriptor_mean.size() == 2 * s.channel_mean.size() &&
                s.descriptor_std.size() == s.descriptor_mean.size(),
            ErrorCode::InvalidInput, "normalization stats have inconsistent lengths");
    require((s.channel_std.array() > 0.0).all() && (s.descriptor_std.array() > 0.0).all(),
            ErrorCode::InvalidInput, "normalization std entries must be > 0");
    return s;
}

RunConfig parse_run_config(const Json& j) {
    RunConfig cfg;
    Fields f(j, "config");
    if (const Json* c = f.sub("corpus")) {
        Fields cf(*c, "corpus");
        cf.get("master_seed", cfg.corpus.master_seed);
        cf.get("train_fraction", cfg.corpus.train_fraction);
        std::vector<std::string> modes;
        cf.get("modes", modes);
        if (!modes.empty()) {
            cfg.corpus.modes.clear();
            for (const auto& m : modes) {
                auto parsed = parse_mode(m);
                require(parsed.has_value(), ErrorCode::Config, "unknown fault mode '" + m + "'");
                cfg.corpus.modes.push_back(*parsed);
            }
        }
        cf.finish();
    }
    if (const Json* s = f.sub("sim")) cfg.corpus.sim = sim_config_from_json(*s, cfg.corpus.sim);
    if (const Json* p = f.sub("pipeline")) {
        cfg.corpus.pipeline = pipeline_config_from_json(*p, cfg.corpus.pipeline);
    }
    if (const Json* m = f.sub("model")) cfg.model = slat_config_from_json(*m, cfg.model);
    if (const Json* t = f.sub("train")) cfg.train = train_config_from_json(*t, cfg.train);
    f.finish();
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::Io, "cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    Json j;
    try {
        j = Json::parse(buf.str());
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Config, "config file '" + path + "': " + e.what());
    }
    return parse_run_config(j);
}

Json to_json(const RunConfig& cfg) {
    Json modes = Json::array();
    for (FaultMode m : cfg.corpus.modes) modes.push_back(std::string(mode_tag(m)));
    return {{"corpus",
             {{"master_seed", cfg.corpus.master_seed},
              {"train_fraction", cfg.corpus.train_fraction},
              {"modes", modes}}},
            {"sim", to_json(cfg.corpus.sim)},
            {"pipeline", to_json(cfg.corpus.pipeline)},
            {"model", to_json(cfg.model)},
            {"train", to_json(cfg.train)}};
}

}  // namespace slat
