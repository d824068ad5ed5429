// SPDX-License-Identifier: Apache-2.0
#include "fedmas/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "fedmas/errors.hpp"

namespace fedmas {

std::string method_name(Method m) {
    switch (m) {
        case Method::kFedAvg: return "fedavg";
        case Method::kFedAvgKd: return "fedavg_kd";
        case Method::kFedMas: return "fedmas";
    }
    return "unknown";
}

std::optional<Method> parse_method(const std::string& s) {
    if (s == "fedavg") return Method::kFedAvg;
    if (s == "fedavg_kd") return Method::kFedAvgKd;
    if (s == "fedmas") return Method::kFedMas;
    return std::nullopt;
}

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

bool parse_u64(const std::string& s, std::uint64_t& out) {
    const std::string t = trim(s);
    if (t.empty() || t[0] == '-') return false;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
    return ec == std::errc{} && p == t.data() + t.size();
}

bool parse_double(const std::string& s, double& out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    try {
        std::size_t pos = 0;
        out = std::stod(t, &pos);
        return pos == t.size();
    } catch (const std::exception&) {
        return false;
    }
}

bool parse_bool(const std::string& s, bool& out) {
    const std::string t = trim(s);
    if (t == "true" || t == "1" || t == "yes") {
        out = true;
        return true;
    }
    if (t == "false" || t == "0" || t == "no") {
        out = false;
        return true;
    }
    return false;
}

struct FieldSetter {
    const char* key;
    std::function<bool(ExperimentConfig&, const std::string&)> set;
    const char* expected;
};

template <typename T>
bool set_count(T& field, const std::string& v) {
    std::uint64_t x = 0;
    if (!parse_u64(v, x)) return false;
    field = T(x);
    return true;
}

const std::vector<FieldSetter>& field_setters() {
    static const std::vector<FieldSetter> setters = {
        {"method",
         [](ExperimentConfig& c, const std::string& v) {
             auto m = parse_method(trim(v));
             if (!m) return false;
             c.method = *m;
             return true;
         },
         "one of fedavg | fedavg_kd | fedmas"},
        {"clients", [](ExperimentConfig& c, const std::string& v) { return set_count(c.num_clients, v); },
         "positive integer"},
        {"classes", [](ExperimentConfig& c, const std::string& v) { return set_count(c.num_classes, v); },
         "positive integer"},
        {"rounds", [](ExperimentConfig& c, const std::string& v) { return set_count(c.rounds, v); },
         "positive integer"},
        {"epochs", [](ExperimentConfig& c, const std::string& v) { return set_count(c.epochs, v); },
         "positive integer"},
        {"batch_size", [](ExperimentConfig& c, const std::string& v) { return set_count(c.batch_size, v); },
         "positive integer"},
        {"lr_max", [](ExperimentConfig& c, const std::string& v) { return parse_double(v, c.lr_max); },
         "real number"},
        {"lr_min", [](ExperimentConfig& c, const std::string& v) { return parse_double(v, c.lr_min); },
         "real number"},
        {"lambda_f", [](ExperimentConfig& c, const std::string& v) { return parse_double(v, c.lambda_f); },
         "real number"},
        {"iid", [](ExperimentConfig& c, const std::string& v) { return parse_bool(v, c.iid); },
         "true | false"},
        {"dirichlet_alpha",
         [](ExperimentConfig& c, const std::string& v) { return parse_double(v, c.dirichlet_alpha); },
         "real number"},
        {"imbalance_ratio",
         [](ExperimentConfig& c, const std::string& v) { return parse_double(v, c.imbalance_ratio); },
         "real number"},
        {"n_max", [](ExperimentConfig& c, const std::string& v) { return set_count(c.n_max, v); },
         "positive integer"},
        {"feature_dim", [](ExperimentConfig& c, const std::string& v) { return set_count(c.feature_dim, v); },
         "positive integer"},
        {"embed_dim", [](ExperimentConfig& c, const std::string& v) { return set_count(c.embed_dim, v); },
         "positive integer"},
        {"hidden_width", [](ExperimentConfig& c, const std::string& v) { return set_count(c.hidden_width, v); },
         "positive integer"},
        {"shot_hi", [](ExperimentConfig& c, const std::string& v) { return set_count(c.shot_hi, v); },
         "non-negative integer (0 = auto)"},
        {"shot_lo", [](ExperimentConfig& c, const std::string& v) { return set_count(c.shot_lo, v); },
         "non-negative integer (0 = auto)"},
        {"seed", [](ExperimentConfig& c, const std::string& v) { return set_count(c.seed, v); },
         "non-negative integer"},
        {"eval_every", [](ExperimentConfig& c, const std::string& v) { return set_count(c.eval_every, v); },
         "positive integer"},
        {"output_dir",
         [](ExperimentConfig& c, const std::string& v) {
             c.output_dir = trim(v);
             return !c.output_dir.empty();
         },
         "non-empty path"},
    };
    return setters;
}

}  // namespace

KeyValues read_config_file(const std::string& path, std::vector<std::string>& errors) {
    std::ifstream in(path);
    if (!in) {
        errors.push_back("cannot open config file: " + path);
        return {};
    }
    KeyValues kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            errors.push_back(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
            continue;
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty()) {
            errors.push_back(path + ":" + std::to_string(lineno) + ": empty key");
            continue;
        }
        kv[key] = value;
    }
    return kv;
}

void apply_key_values(ExperimentConfig& cfg, const KeyValues& kv,
                      std::vector<std::string>& errors) {
    for (const auto& [key, value] : kv) {
        bool known = false;
        for (const FieldSetter& f : field_setters()) {
            if (key == f.key) {
                known = true;
                if (!f.set(cfg, value)) {
                    errors.push_back(key + ": expected " + f.expected + ", got '" + value + "'");
                }
                break;
            }
        }
        if (!known) {
            errors.push_back("unknown config key: " + key);
        }
    }
}

void validate(const ExperimentConfig& cfg, std::vector<std::string>& errors) {
    auto require = [&](bool ok, const std::string& msg) {
        if (!ok) errors.push_back(msg);
    };
    require(cfg.num_clients >= 1, "clients: must be >= 1");
    require(cfg.num_classes >= 2, "classes: must be >= 2");
    require(cfg.rounds >= 1, "rounds: must be >= 1");
    require(cfg.epochs >= 1, "epochs: must be >= 1");
    require(cfg.batch_size >= 1, "batch_size: must be >= 1");
    require(cfg.eval_every >= 1, "eval_every: must be >= 1");
    require(std::isfinite(cfg.lr_max) && cfg.lr_max > 0.0, "lr_max: must be positive");
    require(std::isfinite(cfg.lr_min) && cfg.lr_min >= 0.0, "lr_min: must be >= 0");
    if (std::isfinite(cfg.lr_min) && std::isfinite(cfg.lr_max)) {
        require(cfg.lr_min <= cfg.lr_max, "lr_min: must be <= lr_max");
    }
    require(std::isfinite(cfg.lambda_f) && cfg.lambda_f >= 0.0, "lambda_f: must be >= 0");
    require(std::isfinite(cfg.dirichlet_alpha) && cfg.dirichlet_alpha > 0.0,
            "dirichlet_alpha: must be positive");
    require(std::isfinite(cfg.imbalance_ratio) && cfg.imbalance_ratio >= 1.0,
            "imbalance_ratio: must be >= 1");
    require(cfg.n_max >= cfg.num_classes, "n_max: must be >= classes");
    require(cfg.feature_dim >= 1, "feature_dim: must be >= 1");
    require(cfg.embed_dim >= 1, "embed_dim: must be >= 1");
    require(cfg.hidden_width >= 1, "hidden_width: must be >= 1");
    if (cfg.shot_hi != 0 || cfg.shot_lo != 0) {
        require(cfg.shot_hi != 0 && cfg.shot_lo != 0,
                "shot_hi/shot_lo: set both explicitly or leave both 0 for auto");
        if (cfg.shot_hi != 0 && cfg.shot_lo != 0) {
            require(cfg.shot_lo < cfg.shot_hi, "shot_lo: must be < shot_hi");
        }
    }
    require(!cfg.output_dir.empty(), "output_dir: must be non-empty");
}

ExperimentConfig load_config(const std::optional<std::string>& path, const KeyValues& overrides) {
    std::vector<std::string> errors;
    ExperimentConfig cfg;
    if (path) {
        const KeyValues file_kv = read_config_file(*path, errors);
        apply_key_values(cfg, file_kv, errors);
    }
    apply_key_values(cfg, overrides, errors);  // flags win over the file
    validate(cfg, errors);
    if (!errors.empty()) {
        std::ostringstream msg;
        msg << "invalid configuration (" << errors.size() << " problem"
            << (errors.size() == 1 ? "" : "s") << "):";
        for (const std::string& e : errors) msg << "\n  - " << e;
        throw config_error(msg.str());
    }
    return cfg;
}

KeyValues config_to_key_values(const ExperimentConfig& cfg) {
    auto fmt = [](double v) {
        std::ostringstream os;
        os.precision(17);
        os << v;
        return os.str();
    };
    KeyValues kv;
    kv["method"] = method_name(cfg.method);
    kv["clients"] = std::to_string(cfg.num_clients);
    kv["classes"] = std::to_string(cfg.num_classes);
    kv["rounds"] = std::to_string(cfg.rounds);
    kv["epochs"] = std::to_string(cfg.epochs);
    kv["batch_size"] = std::to_string(cfg.batch_size);
    kv["lr_max"] = fmt(cfg.lr_max);
    kv["lr_min"] = fmt(cfg.lr_min);
    kv["lambda_f"] = fmt(cfg.lambda_f);
    kv["iid"] = cfg.iid ? "true" : "false";
    kv["dirichlet_alpha"] = fmt(cfg.dirichlet_alpha);
    kv["imbalance_ratio"] = fmt(cfg.imbalance_ratio);
    kv["n_max"] = std::to_string(cfg.n_max);
    kv["feature_dim"] = std::to_string(cfg.feature_dim);
    kv["embed_dim"] = std::to_string(cfg.embed_dim);
    kv["hidden_width"] = std::to_string(cfg.hidden_width);
    kv["shot_hi"] = std::to_string(cfg.shot_hi);
    kv["shot_lo"] = std::to_string(cfg.shot_lo);
    kv["seed"] = std::to_string(cfg.seed);
    kv["eval_every"] = std::to_string(cfg.eval_every);
    kv["output_dir"] = cfg.output_dir;
    return kv;
}

}  // namespace fedmas
