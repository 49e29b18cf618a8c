#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dsa/core/error.hpp"
#include "dsa/io/tables.hpp"

namespace dsa::io {

// Line-oriented pipeline configuration with one section per module. Unknown
// sections or keys are rejected; values drawn from the documented parameter
// grids are validated against them unless pipeline.allow_off_grid is set.
struct PipelineConfig {
    // [pipeline]
    std::uint64_t seed = 7;
    bool allow_off_grid = false;

    // [synth]
    int synth_patients = 500;
    int synth_min_steps = 50;
    int synth_max_steps = 238;
    double synth_missing_rate = 0.5923;
    std::string synth_items_mode = "desk";  // desk | full

    // [preprocess]
    int preprocess_max_lab_items = 50;
    double preprocess_corr_threshold = 0.7;
    int preprocess_min_steps = 50;
    int preprocess_max_steps = 238;

    // [dssm]
    int dssm_latent_dim = 8;
    double dssm_learning_rate = 0.005;
    int dssm_epochs = 25;
    int dssm_batch_size = 32;
    int dssm_hidden_dim = 64;
    int dssm_lstm_hidden = 64;
    double dssm_dropout_rate = 0.1;
    int dssm_samples_per_step = 1;
    std::string dssm_encoder_direction = "backward";
    double dssm_grad_clip = 10.0;

    // [baselines]
    int baseline_latent_dim = 8;
    double vae_learning_rate = 0.01;
    int vae_epochs = 50;
    bool vae_grid = false;
    double linear_learning_rate = 0.01;
    int linear_epochs = 40;

    // [analyze]
    int umap_neighbors = 15;
    int umap_epochs = 200;
    double umap_downsample = 1.0;
    std::vector<int> k_candidates = {3};
    int top_n = 10;
    int top_n_drug = 20;
    int silhouette_subsample = 10000;
};

namespace config_detail {

inline bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config: boolean expected for " + key + ", got '" + v + "'");
}

inline double parse_double(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config: number expected for " + key + ", got '" + v + "'");
    }
}

inline long parse_long(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const long d = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config: integer expected for " + key + ", got '" + v + "'");
    }
}

inline std::vector<int> parse_int_list(const std::string& v, const std::string& key) {
    std::vector<int> out;
    for (const auto& part : split_on(v, ','))
        out.push_back(static_cast<int>(parse_long(part, key)));
    if (out.empty()) throw ConfigError("config: empty list for " + key);
    return out;
}

template <class T>
void check_grid(T value, const std::vector<T>& grid, const std::string& key, bool allow_off) {
    if (allow_off) return;
    for (const auto& g : grid)
        if (g == value) return;
    std::ostringstream os;
    os << "config: " << key << "=" << value
       << " is outside the documented grid; set pipeline.allow_off_grid=true to override";
    throw ConfigError(os.str());
}

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && (s[a] == ' ' || s[a] == '\t')) ++a;
    while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
    return s.substr(a, b - a);
}

}  // namespace config_detail

inline PipelineConfig parse_config(const std::string& text) {
    using namespace config_detail;
    PipelineConfig c;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.front() == '[' && t.back() == ']') {
            section = t.substr(1, t.size() - 2);
            if (section != "pipeline" && section != "synth" && section != "preprocess" &&
                section != "dssm" && section != "baselines" && section != "analyze")
                throw ConfigError("config: unknown section [" + section + "] at line " +
                                  std::to_string(lineno));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: expected key = value at line " + std::to_string(lineno));
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        const std::string qualified = section + "." + key;

        if (qualified == "pipeline.seed")
            c.seed = static_cast<std::uint64_t>(parse_long(value, qualified));
        else if (qualified == "pipeline.allow_off_grid")
            c.allow_off_grid = parse_bool(value, qualified);
        else if (qualified == "synth.patients")
            c.synth_patients = static_cast<int>(parse_long(value, qualified));
        else if (qualified == "synth.min_steps")
            c.synth_min_steps = static_cast<int>(parse_long(value, qualified));
        else if (qualified == "synth.max_steps")
            c.synth_max_steps = static_cast<int>(parse_long(value, qualified));
        else if (qualified == "synth.target_missing_rate")
            c.synth_missing_rate = parse_double(value, qualified);
        else if (qualified == "synth.items_mode") {
            if (value != "desk" && value != "full")
                throw ConfigError("config: synth.items_mode must be desk or full");
            c.synth_items_mode = value;
        } else if (qualified == "preprocess.max_lab_items")
            c.preprocess_max_lab_items = static_cast<int>(parse_long(value, qualified));
        else if (qualified == "preprocess.corr_threshold")
            c.preprocess_corr_threshold = parse_double(value, qualified);
        else if (qualified == "preprocess.min_steps")
            c.preprocess_min_steps = static_cast<int>(parse_long(value, qualified));
        else if (qualified == "preprocess.max_steps")
            c.preprocess_max_steps = static_cast<int>(parse_long(value, qualified));
        else if (qualified == "dssm.latent_dim")
            c.dssm_latent_dim = static_cast<int>(parse_long(value, qualified));
        else if (qualified == "dssm.learning_rate")
            c.dssm_learning_rate = parse_double(value, qualified);
        else if (qualified == "dssm.epochs")
            c.dssm_epochs = static_cast<int>(parse_long(value, qualified));
        else if (qualified == "dssm.batch_size")
            c.dssm_batch_size = static_cast<int>(parse_long(value, qualified));
        else if (qualified == "dssm.hidden_dim")
            c.dssm_hidden_dim = static_cast<int>(parse_long(value, qualified));
        else if (qualified == "dssm.lstm_hidden")
            c.dssm_lstm_hidden = static_cast<int>(parse_long(value, qualified));
        else if (qualified == "dssm.dropout_rate")
            c.dssm_dropout_rate = parse_double(value, qualified);
        else if (qualified == "dssm.samples_per_step")
            c.dssm_samples_per_step = static_cast<int>(parse_long(value, qualified));
        else if (qualified == "dssm.encoder_direction") {
            if (value != "backward" && value != "forward")
                throw ConfigError("config: dssm.encoder_direction must be backward or forward");
            c.dssm_encoder_direction = value;
        } else if (qualified == "dssm.grad_clip")
            c.dssm_grad_clip = parse_double(value, qualified);
        else if (qualified == "baselines.latent_dim")
            c.baseline_latent_dim = static_cast<int>(parse_long(value, qualified));
        else if (qualified == "baselines.vae_learning_rate")
            c.vae_learning_rate = parse_double(value, qualified);
        else if (qualified == "baselines.vae_epochs")
            c.vae_epochs = static_cast<int>(parse_long(value, qualified));
        else if (qualified == "baselines.vae_grid")
            c.vae_grid = parse_bool(value, qualified);
        else if (qualified == "baselines.linear_learning_rate")
            c.linear_learning_rate = parse_double(value, qualified);
        else if (qualified == "baselines.linear_epochs")
            c.linear_epochs = static_cast<int>(parse_long(value, qualified));
        else if (qualified == "analyze.n_neighbors")
            c.umap_neighbors = static_cast<int>(parse_long(value, qualified));
        else if (qualified == "analyze.umap_epochs")
            c.umap_epochs = static_cast<int>(parse_long(value, qualified));
        else if (qualified == "analyze.umap_downsample")
            c.umap_downsample = parse_double(value, qualified);
        else if (qualified == "analyze.k_candidates")
            c.k_candidates = parse_int_list(value, qualified);
        else if (qualified == "analyze.top_n")
            c.top_n = static_cast<int>(parse_long(value, qualified));
        else if (qualified == "analyze.top_n_drug")
            c.top_n_drug = static_cast<int>(parse_long(value, qualified));
        else if (qualified == "analyze.silhouette_subsample")
            c.silhouette_subsample = static_cast<int>(parse_long(value, qualified));
        else
            throw ConfigError("config: unknown key '" + qualified + "' at line " +
                              std::to_string(lineno));
    }

    config_detail::check_grid(c.dssm_latent_dim, {2, 4, 8, 16}, "dssm.latent_dim",
                              c.allow_off_grid);
    config_detail::check_grid(c.dssm_learning_rate, {0.005, 0.01}, "dssm.learning_rate",
                              c.allow_off_grid);
    config_detail::check_grid(c.umap_neighbors, {15, 30, 50, 100}, "analyze.n_neighbors",
                              c.allow_off_grid);
    config_detail::check_grid(c.vae_learning_rate, {0.001, 0.005, 0.01},
                              "baselines.vae_learning_rate", c.allow_off_grid);
    return c;
}

inline std::string serialize_config(const PipelineConfig& c) {
    std::ostringstream os;
    os << "[pipeline]\n"
       << "seed = " << c.seed << "\n"
       << "allow_off_grid = " << (c.allow_off_grid ? "true" : "false") << "\n"
       << "\n[synth]\n"
       << "patients = " << c.synth_patients << "\n"
       << "min_steps = " << c.synth_min_steps << "\n"
       << "max_steps = " << c.synth_max_steps << "\n"
       << "target_missing_rate = " << format_double(c.synth_missing_rate) << "\n"
       << "items_mode = " << c.synth_items_mode << "\n"
       << "\n[preprocess]\n"
       << "max_lab_items = " << c.preprocess_max_lab_items << "\n"
       << "corr_threshold = " << format_double(c.preprocess_corr_threshold) << "\n"
       << "min_steps = " << c.preprocess_min_steps << "\n"
       << "max_steps = " << c.preprocess_max_steps << "\n"
       << "\n[dssm]\n"
       << "latent_dim = " << c.dssm_latent_dim << "\n"
       << "learning_rate = " << format_double(c.dssm_learning_rate) << "\n"
       << "epochs = " << c.dssm_epochs << "\n"
       << "batch_size = " << c.dssm_batch_size << "\n"
       << "hidden_dim = " << c.dssm_hidden_dim << "\n"
       << "lstm_hidden = " << c.dssm_lstm_hidden << "\n"
       << "dropout_rate = " << format_double(c.dssm_dropout_rate) << "\n"
       << "samples_per_step = " << c.dssm_samples_per_step << "\n"
       << "encoder_direction = " << c.dssm_encoder_direction << "\n"
       << "grad_clip = " << format_double(c.dssm_grad_clip) << "\n"
       << "\n[baselines]\n"
       << "latent_dim = " << c.baseline_latent_dim << "\n"
       << "vae_learning_rate = " << format_double(c.vae_learning_rate) << "\n"
       << "vae_epochs = " << c.vae_epochs << "\n"
       << "vae_grid = " << (c.vae_grid ? "true" : "false") << "\n"
       << "linear_learning_rate = " << format_double(c.linear_learning_rate) << "\n"
       << "linear_epochs = " << c.linear_epochs << "\n"
       << "\n[analyze]\n"
       << "n_neighbors = " << c.umap_neighbors << "\n"
       << "umap_epochs = " << c.umap_epochs << "\n"
       << "umap_downsample = " << format_double(c.umap_downsample) << "\n"
       << "k_candidates = ";
    for (std::size_t i = 0; i < c.k_candidates.size(); ++i)
        os << (i ? "," : "") << c.k_candidates[i];
    os << "\n"
       << "top_n = " << c.top_n << "\n"
       << "top_n_drug = " << c.top_n_drug << "\n"
       << "silhouette_subsample = " << c.silhouette_subsample << "\n";
    return os.str();
}

inline std::uint64_t config_hash(const PipelineConfig& c) {
    const std::string text = serialize_config(c);
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

inline PipelineConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return parse_config(os.str());
}

}  // namespace dsa::io
