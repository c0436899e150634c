#pragma once

#include <cctype>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

namespace retrack {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// All thresholds, weights and budgets of the control layer. Defaults are the
/// shipped operating point; every field can be overridden from a key-value
/// config file (see load_config).
struct Config {
    // Mode classification thresholds.
    double tau_rec = 0.30;      // recovery: top IoU below this
    double tau_app_rec = 0.35;  // recovery: appearance below this
    double tau_unc = 0.55;      // ambiguous: top IoU below this
    double tau_app_unc = 0.50;  // ambiguous: appearance below this
    double tau_mot = 0.35;      // ambiguous: motion score below this
    double tau_geo = 0.50;      // ambiguous: geometry score below this
    double tau_delta = 0.10;    // ambiguous: candidate margin below this

    // Motion scale, as a fraction of the frame diagonal.
    double tau_m = 0.05;

    // Branch score weights; appearance carries the largest auxiliary weight.
    double lambda_a = 2.0;
    double lambda_m = 0.5;
    double lambda_g = 0.5;
    double lambda_e = 1.0;
    double epsilon = 1e-4;

    // Generic reconfirmation.
    int n_win = 3;
    double tau_reconf_app = 0.70;

    // Relaxed (reappearance) reconfirmation.
    int l_miss = 10;
    double tau_rep_iou = 0.50;
    double tau_rep_app = 0.60;
    double tau_rep_delta = 0.05;

    // DRM promotion.
    double tau_drm = 0.80;
    double tau_drm_reappear = 0.60;
    int g_min = 5;
    double r_min = 0.5;
    double r_max = 2.0;
    double r_min_small = 0.25;
    double r_max_small = 4.0;
    int n_drm = 2;

    // Budgets.
    int branch_keep = 3;
    int k_c = 6;
    bool keep_first_cond_frame = true;
    int noncond_capacity = 7;           // selection budget; raw buffer holds 4x
    int median_window = 15;             // W, stable-history window
    int anchor_capacity = 8;            // N_A
    double tau_anchor = 0.85;
    int recovery_reset_frames = 60;     // pool re-spawned beyond this

    // Small-object rule and distractor signal.
    double small_area_fraction = 0.005;
    double tau_dist = 0.5;
    double d_dist = 1.5;  // multiplier on sqrt(median area)

    int noncond_raw_capacity() const { return 4 * noncond_capacity; }

    /// Throws ConfigError naming the first out-of-range field.
    void validate() const;

    bool operator==(const Config&) const = default;
};

namespace detail {

struct ConfigField {
    enum class Type { real, integer, boolean } type;
    std::function<void(Config&, double)> set_real;
    std::function<void(Config&, int)> set_int;
    std::function<void(Config&, bool)> set_bool;
};

inline const std::map<std::string, ConfigField>& config_fields() {
    static const std::map<std::string, ConfigField> fields = [] {
        std::map<std::string, ConfigField> m;
        auto real = [&m](const std::string& key, double Config::*member) {
            ConfigField f;
            f.type = ConfigField::Type::real;
            f.set_real = [member](Config& c, double v) { c.*member = v; };
            m[key] = std::move(f);
        };
        auto integer = [&m](const std::string& key, int Config::*member) {
            ConfigField f;
            f.type = ConfigField::Type::integer;
            f.set_int = [member](Config& c, int v) { c.*member = v; };
            m[key] = std::move(f);
        };
        auto boolean = [&m](const std::string& key, bool Config::*member) {
            ConfigField f;
            f.type = ConfigField::Type::boolean;
            f.set_bool = [member](Config& c, bool v) { c.*member = v; };
            m[key] = std::move(f);
        };
        real("tau_rec", &Config::tau_rec);
        real("tau_app_rec", &Config::tau_app_rec);
        real("tau_unc", &Config::tau_unc);
        real("tau_app_unc", &Config::tau_app_unc);
        real("tau_mot", &Config::tau_mot);
        real("tau_geo", &Config::tau_geo);
        real("tau_delta", &Config::tau_delta);
        real("tau_m", &Config::tau_m);
        real("lambda_a", &Config::lambda_a);
        real("lambda_m", &Config::lambda_m);
        real("lambda_g", &Config::lambda_g);
        real("lambda_e", &Config::lambda_e);
        real("epsilon", &Config::epsilon);
        integer("n_win", &Config::n_win);
        real("tau_reconf_app", &Config::tau_reconf_app);
        integer("l_miss", &Config::l_miss);
        real("tau_rep_iou", &Config::tau_rep_iou);
        real("tau_rep_app", &Config::tau_rep_app);
        real("tau_rep_delta", &Config::tau_rep_delta);
        real("tau_drm", &Config::tau_drm);
        real("tau_drm_reappear", &Config::tau_drm_reappear);
        integer("g_min", &Config::g_min);
        real("r_min", &Config::r_min);
        real("r_max", &Config::r_max);
        real("r_min_small", &Config::r_min_small);
        real("r_max_small", &Config::r_max_small);
        integer("n_drm", &Config::n_drm);
        integer("branch_keep", &Config::branch_keep);
        integer("k_c", &Config::k_c);
        boolean("keep_first_cond_frame", &Config::keep_first_cond_frame);
        integer("noncond_capacity", &Config::noncond_capacity);
        integer("median_window", &Config::median_window);
        integer("anchor_capacity", &Config::anchor_capacity);
        real("tau_anchor", &Config::tau_anchor);
        integer("recovery_reset_frames", &Config::recovery_reset_frames);
        real("small_area_fraction", &Config::small_area_fraction);
        real("tau_dist", &Config::tau_dist);
        real("d_dist", &Config::d_dist);
        return m;
    }();
    return fields;
}

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

}  // namespace detail

inline void Config::validate() const {
    auto unit = [](const char* name, double v) {
        if (!(v >= 0.0 && v <= 1.0))
            throw ConfigError(std::string(name) + " must be in [0,1], got " + std::to_string(v));
    };
    unit("tau_rec", tau_rec);
    unit("tau_app_rec", tau_app_rec);
    unit("tau_unc", tau_unc);
    unit("tau_app_unc", tau_app_unc);
    unit("tau_mot", tau_mot);
    unit("tau_geo", tau_geo);
    unit("tau_delta", tau_delta);
    unit("tau_reconf_app", tau_reconf_app);
    unit("tau_rep_iou", tau_rep_iou);
    unit("tau_rep_app", tau_rep_app);
    unit("tau_rep_delta", tau_rep_delta);
    unit("tau_drm", tau_drm);
    unit("tau_drm_reappear", tau_drm_reappear);
    unit("tau_anchor", tau_anchor);
    unit("tau_dist", tau_dist);
    if (!(tau_m > 0.0)) throw ConfigError("tau_m must be > 0");
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
    if (lambda_a < 0.0 || lambda_m < 0.0 || lambda_g < 0.0 || lambda_e < 0.0)
        throw ConfigError("branch score weights (lambda_*) must be >= 0");
    if (n_win < 1) throw ConfigError("n_win must be >= 1");
    if (l_miss < 1) throw ConfigError("l_miss must be >= 1");
    if (g_min < 0) throw ConfigError("g_min must be >= 0");
    if (!(r_min > 0.0) || !(r_min < r_max))
        throw ConfigError("require 0 < r_min < r_max");
    if (!(r_min_small > 0.0) || !(r_min_small < r_max_small))
        throw ConfigError("require 0 < r_min_small < r_max_small");
    if (n_drm < 1) throw ConfigError("n_drm must be >= 1");
    if (branch_keep < 1) throw ConfigError("branch_keep must be >= 1");
    if (k_c < 1) throw ConfigError("k_c must be >= 1");
    if (noncond_capacity < 1) throw ConfigError("noncond_capacity must be >= 1");
    if (median_window < 1) throw ConfigError("median_window must be >= 1");
    if (anchor_capacity < 1) throw ConfigError("anchor_capacity must be >= 1");
    if (recovery_reset_frames < 1) throw ConfigError("recovery_reset_frames must be >= 1");
    if (!(small_area_fraction > 0.0 && small_area_fraction < 1.0))
        throw ConfigError("small_area_fraction must be in (0,1)");
    if (!(d_dist > 0.0)) throw ConfigError("d_dist must be > 0");
}

/// Parses `key = value` lines ('#' starts a comment). Unknown keys are an
/// error so typos never silently fall back to defaults. Starts from the
/// default Config, applies overrides, then validates.
inline Config parse_config(std::istream& in, const std::string& origin = "<config>") {
    Config cfg;
    const auto& fields = detail::config_fields();
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string text = detail::trim(line);
        if (text.empty()) continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(line_no) +
                              ": expected 'key = value', got '" + text + "'");
        const std::string key = detail::trim(text.substr(0, eq));
        const std::string value = detail::trim(text.substr(eq + 1));
        const auto it = fields.find(key);
        if (it == fields.end())
            throw ConfigError(origin + ":" + std::to_string(line_no) +
                              ": unknown config key '" + key + "'");
        try {
            switch (it->second.type) {
                case detail::ConfigField::Type::real:
                    it->second.set_real(cfg, std::stod(value));
                    break;
                case detail::ConfigField::Type::integer:
                    it->second.set_int(cfg, std::stoi(value));
                    break;
                case detail::ConfigField::Type::boolean: {
                    if (value == "true" || value == "1")
                        it->second.set_bool(cfg, true);
                    else if (value == "false" || value == "0")
                        it->second.set_bool(cfg, false);
                    else
                        throw std::invalid_argument("expected true/false");
                    break;
                }
            }
        } catch (const std::exception& e) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": bad value '" +
                              value + "' for key '" + key + "' (" + e.what() + ")");
        }
    }
    cfg.validate();
    return cfg;
}

inline Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    return parse_config(in, path);
}

}  // namespace retrack
