#include "dmnet/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

#include "dmnet/error.hpp"

namespace dmnet {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

int parse_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        int r = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw SpecError("config key '" + key + "': expected integer, got '" + v + "'");
    }
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw SpecError("config key '" + key + "': expected number, got '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw SpecError("config key '" + key + "': expected boolean, got '" + v + "'");
}

using Setter = std::function<void(Config&, const std::string&, const std::string&)>;

// One registry drives parsing, validation messages and to_string, so the
// three can never drift apart.
struct KeyDef {
    std::string section;
    std::string key;
    Setter set;
    std::function<std::string(const Config&)> get;
};

std::string fmt(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

const std::vector<KeyDef>& registry() {
    static const std::vector<KeyDef> defs = [] {
        std::vector<KeyDef> d;
        auto S = [&](const std::string& sec, const std::string& key, Setter set,
                     std::function<std::string(const Config&)> get) {
            d.push_back({sec, key, std::move(set), std::move(get)});
        };

#define DM_STR(sec, name, field)                                                       \
    S(sec, name, [](Config& c, const std::string&, const std::string& v) { c.field = v; }, \
      [](const Config& c) { return c.field; })
#define DM_INT(sec, name, field)                                                   \
    S(sec, name,                                                                   \
      [](Config& c, const std::string& k, const std::string& v) { c.field = parse_int(k, v); }, \
      [](const Config& c) { return std::to_string(c.field); })
#define DM_DBL(sec, name, field)                                                      \
    S(sec, name,                                                                      \
      [](Config& c, const std::string& k, const std::string& v) { c.field = parse_double(k, v); }, \
      [](const Config& c) { return fmt(c.field); })
#define DM_BOOL(sec, name, field)                                                    \
    S(sec, name,                                                                     \
      [](Config& c, const std::string& k, const std::string& v) { c.field = parse_bool(k, v); }, \
      [](const Config& c) { return c.field ? "true" : "false"; })

        DM_STR("data", "root", data.root);
        DM_STR("data", "fold_file", data.fold_file);
        DM_INT("data", "fold", data.fold);
        DM_INT("data", "image_size", data.image_size);
        DM_INT("data", "n_images", data.n_images);
        DM_INT("data", "classes", data.classes);
        DM_INT("data", "shapes_min", data.shapes_min);
        DM_INT("data", "shapes_max", data.shapes_max);
        DM_DBL("data", "scale_min", data.scale_min);
        DM_DBL("data", "scale_max", data.scale_max);
        DM_INT("data", "seed", data.seed);

        DM_STR("model", "backbone", model.backbone);
        DM_STR("model", "weights", model.weights);
        DM_INT("model", "reduce_dim", model.reduce_dim);
        DM_INT("model", "high_dim", model.high_dim);
        DM_INT("model", "stride", model.stride);
        DM_INT("model", "backbone_seed", model.backbone_seed);
        DM_BOOL("model", "use_cprm", model.use_cprm);
        DM_BOOL("model", "use_csrm", model.use_csrm);
        DM_BOOL("model", "use_kms", model.use_kms);

        DM_INT("cprm", "rank", cprm.rank);
        DM_DBL("cprm", "lambda_fuse", cprm.lambda_fuse);

        DM_DBL("csrm", "mu1", csrm.mu1);
        DM_DBL("csrm", "mu2", csrm.mu2);
        DM_DBL("csrm", "step_mu1", csrm.step_mu1);
        DM_DBL("csrm", "step_mu2", csrm.step_mu2);
        DM_INT("csrm", "cpm_iters", csrm.cpm_iters);
        DM_DBL("csrm", "gamma1", csrm.gamma1);
        DM_DBL("csrm", "gamma2", csrm.gamma2);
        DM_DBL("csrm", "tau", csrm.tau);

        DM_DBL("kms", "rho", kms.rho);
        DM_DBL("kms", "lambda_warm", kms.lambda_warm);

        DM_DBL("train", "lr", train.lr);
        DM_DBL("train", "momentum", train.momentum);
        DM_DBL("train", "weight_decay", train.weight_decay);
        DM_DBL("train", "poly_power", train.poly_power);
        DM_INT("train", "epochs", train.epochs);
        DM_INT("train", "episodes_per_epoch", train.episodes_per_epoch);
        DM_INT("train", "batch", train.batch);
        DM_DBL("train", "eta", train.eta);
        DM_INT("train", "seed", train.seed);

        DM_INT("eval", "k", eval.k);
        DM_INT("eval", "n_pairs", eval.n_pairs);
        DM_INT("eval", "seed", eval.seed);

#undef DM_STR
#undef DM_INT
#undef DM_DBL
#undef DM_BOOL
        return d;
    }();
    return defs;
}

std::string valid_keys_for(const std::string& section) {
    std::string out;
    for (const auto& d : registry())
        if (d.section == section) {
            if (!out.empty()) out += ", ";
            out += d.key;
        }
    return out;
}

std::string valid_sections() {
    std::string out;
    std::string last;
    for (const auto& d : registry())
        if (d.section != last) {
            if (!out.empty()) out += ", ";
            out += d.section;
            last = d.section;
        }
    return out;
}

}  // namespace

std::string Config::to_string() const {
    std::ostringstream os;
    std::string section;
    for (const auto& d : registry()) {
        if (d.section != section) {
            if (!section.empty()) os << "\n";
            os << "[" << d.section << "]\n";
            section = d.section;
        }
        os << d.key << " = " << d.get(*this) << "\n";
    }
    return os.str();
}

Config parse_config_text(const std::string& text, Config base) {
    Config cfg = base;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t hash = line.find_first_of("#;");
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw SpecError("config line " + std::to_string(lineno) + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            bool known = false;
            for (const auto& d : registry()) known = known || d.section == section;
            if (!known)
                throw SpecError("config line " + std::to_string(lineno) + ": unknown section [" +
                                section + "]; valid sections: " + valid_sections());
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw SpecError("config line " + std::to_string(lineno) + ": expected key = value");
        if (section.empty())
            throw SpecError("config line " + std::to_string(lineno) + ": key outside any [section]");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const KeyDef* def = nullptr;
        for (const auto& d : registry())
            if (d.section == section && d.key == key) def = &d;
        if (!def)
            throw SpecError("config line " + std::to_string(lineno) + ": unknown key '" + key +
                            "' in [" + section + "]; valid keys: " + valid_keys_for(section));
        def->set(cfg, section + "." + key, value);
    }
    return cfg;
}

Config load_config(const std::string& path, Config base) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SpecError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), base);
}

}  // namespace dmnet
