#pragma once

#include <string>

#include <CLI11.hpp>
#include <json.hpp>

namespace mprof::cli {

/// Effective value of every long option of a parsed subcommand: the given
/// value, else the captured default. Options without either are omitted.
inline nlohmann::ordered_json resolved_config(const CLI::App* app) {
    nlohmann::ordered_json j;
    for (const CLI::Option* opt : app->get_options({})) {
        if (opt->get_lnames().empty()) continue;
        const std::string name = opt->get_lnames().front();
        if (name == "help" || name == "config") continue;
        if (opt->count() > 0) {
            const auto& res = opt->results();
            if (opt->get_type_size() == 0) j[name] = opt->as<bool>();
            else if (res.size() == 1) j[name] = res.front();
            else j[name] = res;
        } else if (!opt->get_default_str().empty()) {
            j[name] = opt->get_default_str();
        }
    }
    return j;
}

}  // namespace mprof::cli
