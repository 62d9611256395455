#include "npe/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "npe/matrix.hpp"

namespace npe {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

double parse_double(const std::string& v, const std::string& key) {
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (v.empty() || end != v.c_str() + v.size()) {
        throw std::invalid_argument("config: bad number for '" + key + "': " + v);
    }
    return x;
}

long long parse_int(const std::string& v, const std::string& key) {
    char* end = nullptr;
    const long long x = std::strtoll(v.c_str(), &end, 10);
    if (v.empty() || end != v.c_str() + v.size()) {
        throw std::invalid_argument("config: bad integer for '" + key + "': " + v);
    }
    return x;
}

std::uint64_t parse_u64(const std::string& v, const std::string& key) {
    char* end = nullptr;
    const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
    if (v.empty() || end != v.c_str() + v.size() || v[0] == '-') {
        throw std::invalid_argument("config: bad unsigned integer for '" + key + "': " + v);
    }
    return x;
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("config: bad boolean for '" + key + "': " + v);
}

// comma-separated ints; empty string = empty list
std::vector<int> parse_int_list(const std::string& v, const std::string& key) {
    std::vector<int> xs;
    if (trim(v).empty()) return xs;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        xs.push_back(static_cast<int>(parse_int(trim(item), key)));
    }
    return xs;
}

std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

std::string fmt_int_list(const std::vector<int>& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(xs[i]);
    }
    return s;
}

void set_key(ExperimentConfig& c, const std::string& key, const std::string& value) {
    if (key == "data") c.data = value;
    else if (key == "data_path") c.data_path = value;
    else if (key == "test_path") c.test_path = value;
    else if (key == "n_max") c.n_max = parse_int(value, key);
    else if (key == "classes") c.classes = static_cast<int>(parse_int(value, key));
    else if (key == "rho") c.rho = parse_double(value, key);
    else if (key == "dim") c.dim = static_cast<int>(parse_int(value, key));
    else if (key == "sep") c.sep = parse_double(value, key);
    else if (key == "noise") c.noise = parse_double(value, key);
    else if (key == "test_per_class") c.test_per_class = parse_int(value, key);
    else if (key == "hidden") c.hidden = parse_int_list(value, key);
    else if (key == "feature_dim") c.feature_dim = static_cast<int>(parse_int(value, key));
    else if (key == "n_pem") c.n_pem = static_cast<int>(parse_int(value, key));
    else if (key == "t") c.t = static_cast<int>(parse_int(value, key));
    else if (key == "init_std") c.init_std = parse_double(value, key);
    else if (key == "alpha") c.alpha = parse_double(value, key);
    else if (key == "lr") c.lr = parse_double(value, key);
    else if (key == "momentum") c.momentum = parse_double(value, key);
    else if (key == "weight_decay") c.weight_decay = parse_double(value, key);
    else if (key == "pem_weight_decay") c.pem_weight_decay = parse_double(value, key);
    else if (key == "batch_size") c.batch_size = parse_int(value, key);
    else if (key == "epochs") c.epochs = static_cast<int>(parse_int(value, key));
    else if (key == "milestones") c.milestones = parse_int_list(value, key);
    else if (key == "lr_decay") c.lr_decay = parse_double(value, key);
    else if (key == "method") c.method = value;
    else if (key == "crt_epochs") c.crt_epochs = static_cast<int>(parse_int(value, key));
    else if (key == "group_hi") c.group_hi = parse_int(value, key);
    else if (key == "group_lo") c.group_lo = parse_int(value, key);
    else if (key == "use_folding") c.use_folding = parse_bool(value, key);
    else if (key == "seed") c.seed = parse_u64(value, key);
    else throw std::invalid_argument("config: unknown key '" + key + "'");
}

}  // namespace

void ExperimentConfig::validate() const {
    require(data == "gaussian" || data == "etf" || data == "file",
            "config: data must be gaussian, etf or file");
    if (data == "file") {
        require(!data_path.empty(), "config: data=file requires data_path");
    } else {
        require(classes >= 2, "config: classes must be >= 2");
        require(n_max >= 1, "config: n_max must be >= 1");
        require(rho >= 1.0, "config: rho must be >= 1");
        require(static_cast<double>(n_max) >= rho, "config: n_max must be >= rho");
        require(dim >= 1, "config: dim must be >= 1");
        require(test_per_class >= 1, "config: test_per_class must be >= 1");
        if (data == "gaussian") {
            require(sep > 0.0, "config: sep must be positive");
            require(noise > 0.0, "config: noise must be positive");
        }
        if (data == "etf") {
            require(dim >= classes - 1, "config: etf data needs dim >= classes-1");
        }
    }
    for (int h : hidden) require(h >= 1, "config: hidden widths must be >= 1");
    require(feature_dim >= 0, "config: feature_dim must be >= 0");
    if (feature_dim == 0) {
        require(hidden.empty(), "config: feature_dim=0 (identity backbone) needs empty hidden");
    }
    require(n_pem >= 0, "config: n_pem must be >= 0");
    require(t == 0 || t == 1, "config: t must be 0 or 1");
    require(init_std > 0.0, "config: init_std must be positive");
    require(alpha >= 0.0, "config: alpha must be >= 0");
    require(lr > 0.0, "config: lr must be positive");
    require(momentum >= 0.0 && momentum < 1.0, "config: momentum must be in [0,1)");
    require(weight_decay >= 0.0, "config: weight_decay must be >= 0");
    require(batch_size >= 1, "config: batch_size must be >= 1");
    require(epochs >= 0, "config: epochs must be >= 0");
    for (std::size_t i = 0; i < milestones.size(); ++i) {
        require(milestones[i] >= 1 && milestones[i] < epochs,
                "config: milestones must lie in [1, epochs)");
        if (i > 0) {
            require(milestones[i] > milestones[i - 1],
                    "config: milestones must be strictly increasing");
        }
    }
    require(lr_decay > 0.0 && lr_decay <= 1.0, "config: lr_decay must be in (0,1]");
    require(method == "ce" || method == "la" || method == "crt" || method == "npe-la",
            "config: method must be ce, la, crt or npe-la");
    require(crt_epochs >= 0, "config: crt_epochs must be >= 0");
    require(group_lo <= group_hi, "config: group_lo must be <= group_hi");
}

void apply_preset(ExperimentConfig& cfg, const std::string& name) {
    if (name == "hp1") {
        cfg.lr = 0.1;
        cfg.weight_decay = 2e-4;
        cfg.batch_size = 124;
        cfg.epochs = 200;
        cfg.milestones = {160, 180};
        cfg.lr_decay = 0.1;
    } else if (name == "hp2") {
        cfg.lr = 0.05;
        cfg.weight_decay = 1e-3;
        cfg.batch_size = 64;
        cfg.epochs = 120;
        cfg.milestones = {100, 110};
        cfg.lr_decay = 0.1;
    } else if (name == "desk") {
        cfg.lr = 0.05;
        cfg.weight_decay = 1e-3;
        cfg.batch_size = 64;
        cfg.epochs = 60;
        cfg.milestones = {45, 55};
        cfg.lr_decay = 0.1;
    } else {
        throw std::invalid_argument("config: unknown preset '" + name + "'");
    }
}

void parse_config_text(ExperimentConfig& cfg, const std::string& text) {
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                        " is not 'key = value'");
        }
        set_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

void parse_config_file(ExperimentConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    parse_config_text(cfg, buf.str());
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw std::invalid_argument("config: override must be key=value, got '" + assignment +
                                    "'");
    }
    set_key(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::string serialize(const ExperimentConfig& c) {
    std::string s;
    s += "data = " + c.data + "\n";
    s += "data_path = " + c.data_path + "\n";
    s += "test_path = " + c.test_path + "\n";
    s += "n_max = " + std::to_string(c.n_max) + "\n";
    s += "classes = " + std::to_string(c.classes) + "\n";
    s += "rho = " + fmt_double(c.rho) + "\n";
    s += "dim = " + std::to_string(c.dim) + "\n";
    s += "sep = " + fmt_double(c.sep) + "\n";
    s += "noise = " + fmt_double(c.noise) + "\n";
    s += "test_per_class = " + std::to_string(c.test_per_class) + "\n";
    s += "hidden = " + fmt_int_list(c.hidden) + "\n";
    s += "feature_dim = " + std::to_string(c.feature_dim) + "\n";
    s += "n_pem = " + std::to_string(c.n_pem) + "\n";
    s += "t = " + std::to_string(c.t) + "\n";
    s += "init_std = " + fmt_double(c.init_std) + "\n";
    s += "alpha = " + fmt_double(c.alpha) + "\n";
    s += "lr = " + fmt_double(c.lr) + "\n";
    s += "momentum = " + fmt_double(c.momentum) + "\n";
    s += "weight_decay = " + fmt_double(c.weight_decay) + "\n";
    s += "pem_weight_decay = " + fmt_double(c.pem_weight_decay) + "\n";
    s += "batch_size = " + std::to_string(c.batch_size) + "\n";
    s += "epochs = " + std::to_string(c.epochs) + "\n";
    s += "milestones = " + fmt_int_list(c.milestones) + "\n";
    s += "lr_decay = " + fmt_double(c.lr_decay) + "\n";
    s += "method = " + c.method + "\n";
    s += "crt_epochs = " + std::to_string(c.crt_epochs) + "\n";
    s += "group_hi = " + std::to_string(c.group_hi) + "\n";
    s += "group_lo = " + std::to_string(c.group_lo) + "\n";
    s += std::string("use_folding = ") + (c.use_folding ? "true" : "false") + "\n";
    s += "seed = " + std::to_string(c.seed) + "\n";
    return s;
}

std::string config_digest(const ExperimentConfig& cfg) {
    const std::string s = serialize(cfg);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace npe
