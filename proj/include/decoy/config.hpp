#pragma once

#include "decoy/attributes.hpp"

#include "json.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace decoy {

/// What the anonymizer prompt is conditioned on.
struct AnonConditioning {
    bool ground_truth = true;        // include the "Real ATTRIBUTE" line
    bool adversary_inference = true; // include the "Explanation" line

    bool operator==(const AnonConditioning&) const = default;
};

/// One ablation row as executable configuration.
struct PipelineConfig {
    bool use_target = true;
    AnonConditioning anon_conditioning;
    bool adversary_sees_gt = false;
    bool early_stopping = true;
    int max_iterations = 3;
    int match_top_k = 1; // 1 or 3
    std::uint64_t seed = 0;

    bool operator==(const PipelineConfig&) const = default;

    void validate() const; // throws ConfigError
    nlohmann::json to_json() const;
    static PipelineConfig from_json(const nlohmann::json& j);
    std::string hash() const;

    // Human label for the four ablation axes, e.g. "Target=on Anon=GT+Inf Adv=uncond ES=on".
    std::string axes_label() const;
};

// The six ablation configurations, in table order. Rows share the given seed.
std::vector<PipelineConfig> ablation_rows(std::uint64_t seed);

struct BackendConfig {
    std::string endpoint;    // base URL of an OpenAI-compatible server, e.g. http://127.0.0.1:8000/v1
    std::string model;
    std::string mock_script; // path to a mock script; takes precedence over endpoint
    std::string api_key_env = "DECOY_API_KEY";

    bool is_mock() const { return !mock_script.empty(); }
    bool configured() const { return is_mock() || (!endpoint.empty() && !model.empty()); }
    std::string id() const; // "model@endpoint" or "mock:path"
};

/// Full run configuration: pipeline knobs plus backends and data locations.
struct RunConfig {
    PipelineConfig pipeline;

    BackendConfig anonymizer;
    BackendConfig adversary;
    BackendConfig judge;

    std::string data_dir;         // templates/, demos/, pools/, synonyms.tsv live here
    std::string occupations_file; // defaults under data_dir when empty
    std::string locations_file;
    std::string synonyms_file;

    std::vector<Attribute> attributes; // empty = every attribute present in a record's truth
    bool multi_attribute = false;      // merge attributes into one prompt instead of per-attribute runs

    int age_margin = 10;    // minimum |target - truth| when sampling an age target
    double temperature = 0.1;
    int max_tokens = 1024;
    int retries = 2;
    int backoff_ms = 250;
    int budget_factor = 20; // per-run call ceiling = factor * records * attributes
    int parallelism = 1;

    std::string resolved_data_dir() const;
    std::string resolved_occupations_file() const;
    std::string resolved_locations_file() const;
    std::string resolved_synonyms_file() const;
    std::string template_dir() const;
    std::string demo_dir() const;

    void validate() const;
};

// Parses the key = value config file. Unknown keys raise ConfigError.
RunConfig load_run_config(const std::string& path);

// Applies one "key=value" override (the CLI funnels flags through this).
void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value);

} // namespace decoy
