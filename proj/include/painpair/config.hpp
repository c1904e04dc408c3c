#pragma once

#include <map>
#include <string>
#include <vector>

#include "painpair/train.hpp"

namespace painpair::cfg {

/// Flat key=value settings. Every key has a default; unknown keys are errors
/// that list the valid set.
struct Config {
    std::map<std::string, std::string> values;

    const std::string& get(const std::string& key) const;
    long get_long(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;  // on/off, true/false, 1/0
    std::vector<double> get_doubles(const std::string& key) const;  // comma list
};

Config default_config();

/// Lines of `key = value`; `#` starts a comment; blank lines skipped.
Config parse_config(const std::string& path);
Config parse_config_text(const std::string& text, const std::string& origin);

void set_value(Config& c, const std::string& key, const std::string& value);

/// Canonical echo: every key as `key=value`, sorted, one per line. Feeding
/// the echo back through parse_config_text reproduces the configuration.
std::string config_echo(const Config& c);

train::TrainConfig train_config_from(const Config& c);

}  // namespace painpair::cfg
