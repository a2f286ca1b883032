#include "drft/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "drft/errors.hpp"

namespace drft {

namespace {

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "on") return true;
    if (value == "false" || value == "0" || value == "off") return false;
    throw ConfigError("key '" + key + "': expected boolean, got '" + value + "'");
}

int parse_int(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        int v = std::stoi(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected integer, got '" + value + "'");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected number, got '" + value + "'");
    }
}

std::vector<Modality> parse_streams(const std::string& value) {
    std::vector<Modality> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(modality_from_name(item));
    }
    if (out.empty()) throw ConfigError("model.streams: empty stream list");
    std::set<Modality> seen(out.begin(), out.end());
    if (seen.size() != out.size()) throw ConfigError("model.streams: duplicate modality");
    return out;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
    if (key == "data.dir") data_dir = value;
    else if (key == "out.dir") out_dir = value;
    else if (key == "model.c") feature_dim = parse_int(key, value);
    else if (key == "model.heads") heads = parse_int(key, value);
    else if (key == "model.sqa_steps") sqa_steps = parse_int(key, value);
    else if (key == "model.coattn_layers") coattn_layers = parse_int(key, value);
    else if (key == "model.ff_mult") ff_mult = parse_int(key, value);
    else if (key == "model.streams") streams = parse_streams(value);
    else if (key == "fusion.transformer") use_transformer = parse_bool(key, value);
    else if (key == "fusion.share_common_block") share_common_block = parse_bool(key, value);
    else if (key == "fusion.learnable_weights") learnable_weights = parse_bool(key, value);
    else if (key == "fusion.common_modality") common_modality = modality_from_name(value);
    else if (key == "contrastive.enabled") use_contrastive = parse_bool(key, value);
    else if (key == "contrastive.temperature") temperature = parse_double(key, value);
    else if (key == "contrastive.num_positives") num_positives = parse_int(key, value);
    else if (key == "contrastive.num_negatives") num_negatives = parse_int(key, value);
    else if (key == "loss.lambda_dqa") lambda_dqa = parse_double(key, value);
    else if (key == "optim.lr") lr = parse_double(key, value);
    else if (key == "train.epochs") epochs = parse_int(key, value);
    else if (key == "train.batch_size") batch_size = parse_int(key, value);
    else if (key == "train.seed") seed = static_cast<uint64_t>(parse_int(key, value));
    else if (key == "text.oov_policy") {
        if (value == "error") oov_policy = OovPolicy::Error;
        else if (value == "unk") oov_policy = OovPolicy::MapToUnk;
        else throw ConfigError("text.oov_policy: expected 'error' or 'unk', got '" + value + "'");
    }
    else if (key == "eval.split") eval_split = value;
    else if (key == "synth.num_videos") synth.num_videos = parse_int(key, value);
    else if (key == "synth.num_val_videos") synth.num_val_videos = parse_int(key, value);
    else if (key == "synth.segments") synth.segments = parse_int(key, value);
    else if (key == "synth.d_in") {
        synth.dim_rgb = synth.dim_flow = synth.dim_depth = parse_int(key, value);
    }
    else if (key == "synth.dim_rgb") synth.dim_rgb = parse_int(key, value);
    else if (key == "synth.dim_flow") synth.dim_flow = parse_int(key, value);
    else if (key == "synth.dim_depth") synth.dim_depth = parse_int(key, value);
    else if (key == "synth.categories_per_group") {
        synth.categories_per_group = parse_int(key, value);
    }
    else if (key == "synth.strength") synth.signature_strength = parse_double(key, value);
    else if (key == "synth.noise") synth.noise_level = parse_double(key, value);
    else if (key == "synth.seed") synth.seed = static_cast<uint64_t>(parse_int(key, value));
    else throw ConfigError("unknown configuration key '" + key + "'");
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    RunConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        // trim
        const auto b = line.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        const auto e = line.find_last_not_of(" \t");
        line = line.substr(b, e - b + 1);
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
        }
        auto trim = [](std::string s) {
            const auto x = s.find_first_not_of(" \t");
            if (x == std::string::npos) return std::string();
            const auto y = s.find_last_not_of(" \t");
            return s.substr(x, y - x + 1);
        };
        cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    cfg.validate();
    return cfg;
}

void RunConfig::validate() const {
    if (feature_dim < 2 || feature_dim % 2 != 0) {
        throw ConfigError("model.c must be even and >= 2 (bi-directional text encoder)");
    }
    if (use_transformer && streams.size() > 1 && feature_dim % heads != 0) {
        throw ConfigError("model.c must be divisible by model.heads");
    }
    if (sqa_steps < 1) throw ConfigError("model.sqa_steps must be >= 1");
    if (coattn_layers < 1) throw ConfigError("model.coattn_layers must be >= 1");
    if (epochs < 0) throw ConfigError("train.epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (temperature <= 0.0) throw ConfigError("contrastive.temperature must be > 0");
    if (num_positives < 1 || num_negatives < 1) {
        throw ConfigError("contrastive sample counts must be >= 1");
    }
    if (lambda_dqa < 0.0 || lambda_dqa > 1.0) {
        throw ConfigError("loss.lambda_dqa must lie in [0, 1]");
    }
    if (streams.empty()) throw ConfigError("model.streams must list at least one modality");
}

Modality RunConfig::resolved_common() const {
    if (std::find(streams.begin(), streams.end(), common_modality) != streams.end()) {
        return common_modality;
    }
    if (std::find(streams.begin(), streams.end(), Modality::Rgb) != streams.end()) {
        return Modality::Rgb;
    }
    return streams.front();
}

}  // namespace drft
