#include "decoy/config.hpp"

#include "decoy/errors.hpp"
#include "decoy/text_util.hpp"

#include <fstream>

#ifndef DECOY_DEFAULT_DATA_DIR
#define DECOY_DEFAULT_DATA_DIR "data"
#endif

namespace decoy {

namespace {

bool parse_bool(const std::string& key, const std::string& value) {
    std::string v = casefold(trim(value));
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("invalid boolean for " + key + ": " + value);
}

long parse_long(const std::string& key, const std::string& value) {
    auto n = parse_int(value);
    if (!n) throw ConfigError("invalid integer for " + key + ": " + value);
    return *n;
}

AnonConditioning parse_conditioning(const std::string& value) {
    AnonConditioning c;
    c.ground_truth = false;
    c.adversary_inference = false;
    for (const auto& part : split(value, ',')) {
        std::string p = casefold(trim(part));
        if (p.empty() || p == "none") continue;
        if (p == "ground_truth" || p == "gt") {
            c.ground_truth = true;
        } else if (p == "adversary_inference" || p == "inf") {
            c.adversary_inference = true;
        } else {
            throw ConfigError("unknown anon_conditioning element: " + part);
        }
    }
    return c;
}

std::string conditioning_token(const AnonConditioning& c) {
    if (c.ground_truth && c.adversary_inference) return "ground_truth,adversary_inference";
    if (c.ground_truth) return "ground_truth";
    if (c.adversary_inference) return "adversary_inference";
    return "";
}

} // namespace

void PipelineConfig::validate() const {
    if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
    if (match_top_k != 1 && match_top_k != 3) throw ConfigError("match_top_k must be 1 or 3");
}

nlohmann::json PipelineConfig::to_json() const {
    return nlohmann::json{
        {"use_target", use_target},
        {"anon_conditioning", conditioning_token(anon_conditioning)},
        {"adversary_sees_gt", adversary_sees_gt},
        {"early_stopping", early_stopping},
        {"max_iterations", max_iterations},
        {"match_top_k", match_top_k},
        {"seed", seed},
    };
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
    PipelineConfig c;
    c.use_target = j.at("use_target").get<bool>();
    c.anon_conditioning = parse_conditioning(j.at("anon_conditioning").get<std::string>());
    c.adversary_sees_gt = j.at("adversary_sees_gt").get<bool>();
    c.early_stopping = j.at("early_stopping").get<bool>();
    c.max_iterations = j.at("max_iterations").get<int>();
    c.match_top_k = j.at("match_top_k").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.validate();
    return c;
}

std::string PipelineConfig::hash() const {
    return to_hex(fnv1a64(to_json().dump()));
}

std::string PipelineConfig::axes_label() const {
    std::string anon;
    if (anon_conditioning.ground_truth && anon_conditioning.adversary_inference) {
        anon = "GT+Inf";
    } else if (anon_conditioning.ground_truth) {
        anon = "GT";
    } else if (anon_conditioning.adversary_inference) {
        anon = "Inf";
    } else {
        anon = "uncond";
    }
    std::string out = "Target=";
    out += use_target ? "on" : "off";
    out += " Anon=" + anon;
    out += " Adv=";
    out += adversary_sees_gt ? "GT" : "uncond";
    out += " ES=";
    out += early_stopping ? "on" : "off";
    return out;
}

std::vector<PipelineConfig> ablation_rows(std::uint64_t seed) {
    std::vector<PipelineConfig> rows;
    auto make = [&](bool target, bool gt, bool inf, bool adv_gt, bool es) {
        PipelineConfig c;
        c.use_target = target;
        c.anon_conditioning.ground_truth = gt;
        c.anon_conditioning.adversary_inference = inf;
        c.adversary_sees_gt = adv_gt;
        c.early_stopping = es;
        c.seed = seed;
        return c;
    };
    rows.push_back(make(false, false, true, false, false));
    rows.push_back(make(false, false, true, false, true));
    rows.push_back(make(true, false, true, false, true));
    rows.push_back(make(true, true, false, false, true));
    rows.push_back(make(true, true, true, false, true));
    rows.push_back(make(true, true, true, true, true));
    return rows;
}

std::string BackendConfig::id() const {
    if (is_mock()) return "mock:" + mock_script;
    if (endpoint.empty() && model.empty()) return "unconfigured";
    return model + "@" + endpoint;
}

std::string RunConfig::resolved_data_dir() const {
    return data_dir.empty() ? std::string(DECOY_DEFAULT_DATA_DIR) : data_dir;
}

std::string RunConfig::resolved_occupations_file() const {
    return occupations_file.empty() ? resolved_data_dir() + "/pools/occupations.txt" : occupations_file;
}

std::string RunConfig::resolved_locations_file() const {
    return locations_file.empty() ? resolved_data_dir() + "/pools/locations.txt" : locations_file;
}

std::string RunConfig::resolved_synonyms_file() const {
    return synonyms_file.empty() ? resolved_data_dir() + "/synonyms.tsv" : synonyms_file;
}

std::string RunConfig::template_dir() const { return resolved_data_dir() + "/templates"; }
std::string RunConfig::demo_dir() const { return resolved_data_dir() + "/demos"; }

void RunConfig::validate() const {
    pipeline.validate();
    if (age_margin < 1) throw ConfigError("age_margin must be >= 1");
    if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
    if (retries < 0) throw ConfigError("retries must be >= 0");
    if (max_tokens < 1) throw ConfigError("max_tokens must be >= 1");
    if (budget_factor < 1) throw ConfigError("budget_factor must be >= 1");
    if (temperature < 0) throw ConfigError("temperature must be >= 0");
}

void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
    std::string k = casefold(trim(key));
    std::string v = trim(value);

    if (k == "use_target") cfg.pipeline.use_target = parse_bool(k, v);
    else if (k == "anon_conditioning") cfg.pipeline.anon_conditioning = parse_conditioning(v);
    else if (k == "adversary_sees_gt") cfg.pipeline.adversary_sees_gt = parse_bool(k, v);
    else if (k == "early_stopping") cfg.pipeline.early_stopping = parse_bool(k, v);
    else if (k == "max_iterations") cfg.pipeline.max_iterations = static_cast<int>(parse_long(k, v));
    else if (k == "match_top_k") cfg.pipeline.match_top_k = static_cast<int>(parse_long(k, v));
    else if (k == "seed") cfg.pipeline.seed = static_cast<std::uint64_t>(parse_long(k, v));
    else if (k == "endpoint") {
        cfg.anonymizer.endpoint = v;
        cfg.adversary.endpoint = v;
        cfg.judge.endpoint = v;
    } else if (k == "model") {
        cfg.anonymizer.model = v;
        cfg.adversary.model = v;
        cfg.judge.model = v;
    } else if (k == "mock_script") {
        cfg.anonymizer.mock_script = v;
        cfg.adversary.mock_script = v;
        cfg.judge.mock_script = v;
    } else if (k == "api_key_env") {
        cfg.anonymizer.api_key_env = v;
        cfg.adversary.api_key_env = v;
        cfg.judge.api_key_env = v;
    }
    else if (k == "anon_endpoint") cfg.anonymizer.endpoint = v;
    else if (k == "adv_endpoint") cfg.adversary.endpoint = v;
    else if (k == "judge_endpoint") cfg.judge.endpoint = v;
    else if (k == "anon_model") cfg.anonymizer.model = v;
    else if (k == "adv_model") cfg.adversary.model = v;
    else if (k == "judge_model") cfg.judge.model = v;
    else if (k == "anon_mock") cfg.anonymizer.mock_script = v;
    else if (k == "adv_mock") cfg.adversary.mock_script = v;
    else if (k == "judge_mock") cfg.judge.mock_script = v;
    else if (k == "data_dir") cfg.data_dir = v;
    else if (k == "occupations_file") cfg.occupations_file = v;
    else if (k == "locations_file") cfg.locations_file = v;
    else if (k == "synonyms_file") cfg.synonyms_file = v;
    else if (k == "attributes") {
        cfg.attributes.clear();
        for (const auto& part : split(v, ',')) {
            std::string token = trim(part);
            if (token.empty()) continue;
            auto a = attribute_from_token(token);
            if (!a) throw ConfigError("unknown attribute: " + token);
            cfg.attributes.push_back(*a);
        }
    }
    else if (k == "multi_attribute") cfg.multi_attribute = parse_bool(k, v);
    else if (k == "age_margin") cfg.age_margin = static_cast<int>(parse_long(k, v));
    else if (k == "temperature") {
        try {
            cfg.temperature = std::stod(v);
        } catch (const std::exception&) {
            throw ConfigError("invalid number for temperature: " + v);
        }
    }
    else if (k == "max_tokens") cfg.max_tokens = static_cast<int>(parse_long(k, v));
    else if (k == "retries") cfg.retries = static_cast<int>(parse_long(k, v));
    else if (k == "backoff_ms") cfg.backoff_ms = static_cast<int>(parse_long(k, v));
    else if (k == "budget_factor") cfg.budget_factor = static_cast<int>(parse_long(k, v));
    else if (k == "parallelism") cfg.parallelism = static_cast<int>(parse_long(k, v));
    else throw ConfigError("unknown config key: " + key);
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        size_t eq = s.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + " is not key = value: " + line);
        }
        apply_config_entry(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
    return cfg;
}

} // namespace decoy
