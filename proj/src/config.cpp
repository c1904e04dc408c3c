#include "painpair/config.hpp"

#include <fstream>
#include <sstream>

namespace painpair::cfg {

namespace {

const std::map<std::string, std::string>& default_values() {
    static const std::map<std::string, std::string> defaults = {
        {"seed", "1"},
        {"epochs", "70"},
        {"batch", "32"},
        {"lr", "0.001"},
        {"weight_decay", "0.0001"},
        {"dropout", "0.25"},
        {"contrastive", "on"},
        {"contrastive_c", "0.05"},
        {"multitask", "on"},
        {"pairing", "same"},
        {"per_head_gating", "off"},
        {"bn_batch_stats", "on"},
        {"augment", "on"},
        {"crop_pad", "8"},
        {"hflip_p", "0.5"},
        {"elastic_alpha", "20"},
        {"elastic_sigma", "3"},
        {"refs", "5"},
        {"windows", "1,5,20"},
        {"threshold", "2"},
        {"frontal_threshold", "0.5"},
        {"clahe", "off"},
        {"clahe_clip", "2.0"},
        {"clahe_tiles", "8"},
        {"landmarks", ""},
        {"cache_dir", ""},
        {"data", ""},
        {"out", ""},
        {"checkpoint", ""},
        {"trials", ""},
        {"source", "vas"},
        {"ref_dir", ""},
        {"target", ""},
        {"subjects", "8"},
        {"frames", "24"},
        {"bias", "off"},
        {"vas_cut", "5"},
        {"obs_cut", "3"},
        {"ci_level", "0.99"},
    };
    return defaults;
}

std::string valid_keys() {
    std::string s;
    for (const auto& [k, v] : default_values()) {
        if (!s.empty()) s += ", ";
        s += k;
    }
    return s;
}

}  // namespace

const std::string& Config::get(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end()) fail("config: unknown key '" + key + "'");
    return it->second;
}

long Config::get_long(const std::string& key) const {
    return parse_long(get(key), "config key " + key);
}

double Config::get_double(const std::string& key) const {
    return parse_double(get(key), "config key " + key);
}

bool Config::get_bool(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "on" || v == "true" || v == "1") return true;
    if (v == "off" || v == "false" || v == "0") return false;
    fail("config: key '" + key + "' expects on/off, got '" + v + "'");
}

std::vector<double> Config::get_doubles(const std::string& key) const {
    std::vector<double> out;
    for (const auto& part : split(get(key), ','))
        out.push_back(parse_double(trim(part), "config key " + key));
    return out;
}

Config default_config() {
    Config c;
    c.values = default_values();
    return c;
}

void set_value(Config& c, const std::string& key, const std::string& value) {
    if (!default_values().count(key))
        fail("config: unknown key '" + key + "' (valid keys: " + valid_keys() + ")");
    c.values[key] = value;
}

Config parse_config_text(const std::string& text, const std::string& origin) {
    Config c = default_config();
    std::istringstream is(text);
    std::string line;
    long lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            fail("config: " + origin + ":" + std::to_string(lineno) + ": expected key=value");
        set_value(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return c;
}

Config parse_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail("config: cannot open " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_config_text(buf.str(), path);
}

std::string config_echo(const Config& c) {
    std::string out;
    for (const auto& [k, v] : c.values) out += k + "=" + v + "\n";
    return out;
}

train::TrainConfig train_config_from(const Config& c) {
    train::TrainConfig t;
    t.lr = c.get_double("lr");
    t.weight_decay = c.get_double("weight_decay");
    t.epochs = int(c.get_long("epochs"));
    t.batch_size = int(c.get_long("batch"));
    t.dropout_p = c.get_double("dropout");
    t.contrastive_c = c.get_double("contrastive_c");
    t.contrastive_enabled = c.get_bool("contrastive");
    t.multitask_enabled = c.get_bool("multitask");
    t.per_head_gating = c.get_bool("per_head_gating");
    t.bn_batch_stats = c.get_bool("bn_batch_stats");
    t.augment = c.get_bool("augment");
    t.crop_pad = int(c.get_long("crop_pad"));
    t.hflip_p = c.get_double("hflip_p");
    t.elastic_alpha = c.get_double("elastic_alpha");
    t.elastic_sigma = c.get_double("elastic_sigma");
    const std::string& pairing = c.get("pairing");
    if (pairing == "same") t.random_person_pairs = false;
    else if (pairing == "random") t.random_person_pairs = true;
    else fail("config: pairing must be 'same' or 'random', got '" + pairing + "'");
    t.seed = uint64_t(c.get_long("seed"));
    if (t.epochs < 1) fail("config: epochs must be >= 1");
    if (t.batch_size < 1) fail("config: batch must be >= 1");
    return t;
}

}  // namespace painpair::cfg
