#include "despeckle/config.hpp"

#include "despeckle/errors.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace despeckle {

namespace pt = boost::property_tree;
using nlohmann::json;

std::string_view variant_name(NoiseVariant v) {
    switch (v) {
        case NoiseVariant::PatchAdversarial: return "patch_adversarial";
        case NoiseVariant::GaussianKl: return "gaussian_kl";
    }
    return "unknown";
}

NoiseVariant parse_variant(std::string_view s) {
    if (s == "patch_adversarial") return NoiseVariant::PatchAdversarial;
    if (s == "gaussian_kl") return NoiseVariant::GaussianKl;
    throw ConfigError("unknown noise variant '" + std::string(s) +
                      "' (expected patch_adversarial or gaussian_kl)");
}

void NetworkConfig::validate() const {
    if (base_channels < 1 || residual_blocks < 1 || noise_dim < 1 || mlp_hidden < 1 ||
        mlp_layers < 1 || patchgan_layers < 1) {
        throw ConfigError("network sizes and counts must all be >= 1");
    }
    if (downsample_factor < 1 || (downsample_factor & (downsample_factor - 1)) != 0) {
        throw ConfigError("downsample_factor must be a power of two, got " +
                          std::to_string(downsample_factor));
    }
}

int64_t NetworkConfig::downsample_stages() const {
    int64_t stages = 0;
    for (int64_t f = downsample_factor; f > 1; f >>= 1) ++stages;
    return stages;
}

void LossWeights::validate() const {
    for (double w : {cycle, recon, noise, domain_adv}) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("loss weights must be >= 0");
    }
}

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw ConfigError("train.lr must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ConfigError("Adam betas must lie in [0,1)");
    }
    if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every must be >= 0");
    if (!noise_loss && variant == NoiseVariant::GaussianKl) {
        throw ConfigError(
            "train.noise_loss=off contradicts train.variant=gaussian_kl (the KL term is a noise "
            "loss)");
    }
    weights.validate();
    network.validate();
}

namespace {

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    const auto e = s.find_last_not_of(" \t\r\n");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

int64_t to_int(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const auto out = std::stoll(v, &used);
        if (used == v.size()) return out;
    } catch (const std::logic_error&) {
    }
    throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
}

uint64_t to_uint(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        if (!v.empty() && v.front() != '-') {
            const auto out = std::stoull(v, &used);
            if (used == v.size()) return out;
        }
    } catch (const std::logic_error&) {
    }
    throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + v + "'");
}

double to_double(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const auto out = std::stod(v, &used);
        if (used == v.size() && std::isfinite(out)) return out;
    } catch (const std::logic_error&) {
    }
    throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
    if (v == "off" || v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("key '" + key + "': expected on/off, got '" + v + "'");
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::istringstream is(v);
    std::string tok;
    while (std::getline(is, tok, ',')) out.push_back(to_double(key, trim(tok)));
    if (out.empty()) throw ConfigError("key '" + key + "': expected a comma-separated list");
    return out;
}

std::string fmt_double(double d) {
    std::ostringstream os;
    os.precision(17);
    os << d;
    return os.str();
}

struct KeyDef {
    std::string name;
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

#define INT_KEY(NAME, FIELD)                                                          \
    KeyDef{NAME, [](ExperimentConfig& c, const std::string& v) { c.FIELD = to_int(NAME, v); }, \
           [](const ExperimentConfig& c) { return std::to_string(c.FIELD); }}
#define DOUBLE_KEY(NAME, FIELD)                                                          \
    KeyDef{NAME, [](ExperimentConfig& c, const std::string& v) { c.FIELD = to_double(NAME, v); }, \
           [](const ExperimentConfig& c) { return fmt_double(c.FIELD); }}
#define BOOL_KEY(NAME, FIELD)                                                          \
    KeyDef{NAME, [](ExperimentConfig& c, const std::string& v) { c.FIELD = to_bool(NAME, v); }, \
           [](const ExperimentConfig& c) { return std::string(c.FIELD ? "on" : "off"); }}
#define PATH_KEY(NAME, FIELD)                                                          \
    KeyDef{NAME, [](ExperimentConfig& c, const std::string& v) { c.FIELD = v; },        \
           [](const ExperimentConfig& c) { return c.FIELD.string(); }}

const std::vector<KeyDef>& key_table() {
    static const std::vector<KeyDef> table = {
        KeyDef{"run.seed",
               [](ExperimentConfig& c, const std::string& v) { c.seed = to_uint("run.seed", v); },
               [](const ExperimentConfig& c) { return std::to_string(c.seed); }},
        PATH_KEY("run.output_dir", output_dir),

        INT_KEY("phantom.height", phantom.height),
        INT_KEY("phantom.width", phantom.width),
        KeyDef{"phantom.layer_means",
               [](ExperimentConfig& c, const std::string& v) {
                   c.phantom.layer_means = to_list("phantom.layer_means", v);
               },
               [](const ExperimentConfig& c) {
                   std::string s;
                   for (double d : c.phantom.layer_means) s += (s.empty() ? "" : ",") + fmt_double(d);
                   return s;
               }},
        DOUBLE_KEY("phantom.background_mean", phantom.background_mean),
        DOUBLE_KEY("phantom.looks", phantom.looks),
        INT_KEY("phantom.train_count", phantom_train_count),
        INT_KEY("phantom.test_count", phantom_test_count),

        PATH_KEY("data.noisy_dir", data.noisy_dir),
        PATH_KEY("data.clean_dir", data.clean_dir),
        PATH_KEY("data.boundary_manifest", data.boundary_manifest),
        PATH_KEY("data.patchset_dir", data.patchset_dir),
        PATH_KEY("data.test_dir", data.test_dir),
        PATH_KEY("data.roi_config", data.roi_config),
        PATH_KEY("data.results_dir", data.results_dir),
        PATH_KEY("data.checkpoint", data.checkpoint),

        BOOL_KEY("prepare.crop", prepare.crop),
        INT_KEY("prepare.crop_height", prepare.crop_height),
        INT_KEY("prepare.crop_width", prepare.crop_width),
        INT_KEY("prepare.patch_size", prepare.patch_size),
        INT_KEY("prepare.stride", prepare.stride),
        INT_KEY("prepare.noise_stride", prepare.noise_stride),

        INT_KEY("network.base_channels", train.network.base_channels),
        INT_KEY("network.downsample_factor", train.network.downsample_factor),
        INT_KEY("network.residual_blocks", train.network.residual_blocks),
        INT_KEY("network.noise_dim", train.network.noise_dim),
        INT_KEY("network.mlp_hidden", train.network.mlp_hidden),
        INT_KEY("network.mlp_layers", train.network.mlp_layers),
        INT_KEY("network.patchgan_layers", train.network.patchgan_layers),

        DOUBLE_KEY("train.lr", train.lr),
        DOUBLE_KEY("train.beta1", train.beta1),
        DOUBLE_KEY("train.beta2", train.beta2),
        INT_KEY("train.epochs", train.epochs),
        INT_KEY("train.batch_size", train.batch_size),
        BOOL_KEY("train.noise_loss", train.noise_loss),
        KeyDef{"train.variant",
               [](ExperimentConfig& c, const std::string& v) { c.train.variant = parse_variant(v); },
               [](const ExperimentConfig& c) { return std::string(variant_name(c.train.variant)); }},
        BOOL_KEY("train.center_residuals", train.center_residuals),
        INT_KEY("train.checkpoint_every", train.checkpoint_every),

        DOUBLE_KEY("loss.lambda_cycle", train.weights.cycle),
        DOUBLE_KEY("loss.lambda_recon", train.weights.recon),
        DOUBLE_KEY("loss.lambda_noise", train.weights.noise),
        DOUBLE_KEY("loss.lambda_domain_adv", train.weights.domain_adv),

        INT_KEY("baselines.median_window", baselines.median_window),
        DOUBLE_KEY("baselines.bilateral_sigma_spatial", baselines.bilateral_sigma_spatial),
        DOUBLE_KEY("baselines.bilateral_sigma_range", baselines.bilateral_sigma_range),
    };
    return table;
}

#undef INT_KEY
#undef DOUBLE_KEY
#undef BOOL_KEY
#undef PATH_KEY

void apply(ExperimentConfig& c, const std::string& key, const std::string& value) {
    for (const auto& def : key_table()) {
        if (def.name == key) {
            def.set(c, trim(value));
            return;
        }
    }
    throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& def : key_table()) out.push_back(def.name);
    return out;
}

ExperimentConfig parse_config(const std::string& ini_text,
                              const std::vector<std::string>& overrides) {
    ExperimentConfig cfg;
    pt::ptree tree;
    try {
        std::istringstream is(ini_text);
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    for (const auto& [section, node] : tree) {
        if (node.empty()) {
            if (node.data().empty()) continue;  // empty section
            throw ConfigError("config key '" + section + "' must live in a [section]");
        }
        for (const auto& [key, leaf] : node) apply(cfg, section + "." + key, leaf.data());
    }
    for (const auto& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("override '" + ov + "' is not of the form key=value");
        }
        apply(cfg, trim(ov.substr(0, eq)), ov.substr(eq + 1));
    }
    cfg.train.seed = cfg.seed;
    cfg.phantom.seed = cfg.seed;
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), overrides);
}

std::string ExperimentConfig::to_ini() const {
    std::ostringstream os;
    std::string current;
    for (const auto& def : key_table()) {
        const auto dot = def.name.find('.');
        const auto section = def.name.substr(0, dot);
        if (section != current) {
            os << (current.empty() ? "" : "\n") << '[' << section << "]\n";
            current = section;
        }
        os << def.name.substr(dot + 1) << " = " << def.get(*this) << '\n';
    }
    return os.str();
}

std::string ExperimentConfig::to_json() const {
    json j = json::object();
    for (const auto& def : key_table()) j[def.name] = def.get(*this);
    return j.dump();
}

std::string train_config_to_json(const TrainConfig& c) {
    json j;
    j["lr"] = c.lr;
    j["beta1"] = c.beta1;
    j["beta2"] = c.beta2;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["seed"] = c.seed;
    j["noise_loss"] = c.noise_loss;
    j["variant"] = std::string(variant_name(c.variant));
    j["center_residuals"] = c.center_residuals;
    j["checkpoint_every"] = c.checkpoint_every;
    j["weights"] = {{"cycle", c.weights.cycle},
                    {"recon", c.weights.recon},
                    {"noise", c.weights.noise},
                    {"domain_adv", c.weights.domain_adv}};
    const auto& n = c.network;
    j["network"] = {{"base_channels", n.base_channels},
                    {"downsample_factor", n.downsample_factor},
                    {"residual_blocks", n.residual_blocks},
                    {"noise_dim", n.noise_dim},
                    {"mlp_hidden", n.mlp_hidden},
                    {"mlp_layers", n.mlp_layers},
                    {"patchgan_layers", n.patchgan_layers}};
    return j.dump();
}

TrainConfig train_config_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        TrainConfig c;
        c.lr = j.at("lr").get<double>();
        c.beta1 = j.at("beta1").get<double>();
        c.beta2 = j.at("beta2").get<double>();
        c.epochs = j.at("epochs").get<int64_t>();
        c.batch_size = j.at("batch_size").get<int64_t>();
        c.seed = j.at("seed").get<uint64_t>();
        c.noise_loss = j.at("noise_loss").get<bool>();
        c.variant = parse_variant(j.at("variant").get<std::string>());
        c.center_residuals = j.at("center_residuals").get<bool>();
        c.checkpoint_every = j.at("checkpoint_every").get<int64_t>();
        const auto& w = j.at("weights");
        c.weights = {w.at("cycle").get<double>(), w.at("recon").get<double>(),
                     w.at("noise").get<double>(), w.at("domain_adv").get<double>()};
        const auto& n = j.at("network");
        c.network.base_channels = n.at("base_channels").get<int64_t>();
        c.network.downsample_factor = n.at("downsample_factor").get<int64_t>();
        c.network.residual_blocks = n.at("residual_blocks").get<int64_t>();
        c.network.noise_dim = n.at("noise_dim").get<int64_t>();
        c.network.mlp_hidden = n.at("mlp_hidden").get<int64_t>();
        c.network.mlp_layers = n.at("mlp_layers").get<int64_t>();
        c.network.patchgan_layers = n.at("patchgan_layers").get<int64_t>();
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed train config record: ") + e.what());
    }
}

}  // namespace despeckle
