#include "decoy/target_pool.hpp"

#include "decoy/errors.hpp"
#include "decoy/text_util.hpp"

#include <fstream>

namespace decoy {

namespace {

std::vector<std::string> load_list_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open pool file: " + path);
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        out.push_back(s);
    }
    if (out.size() < 2) throw ConfigError("pool file has fewer than 2 entries: " + path);
    return out;
}

} // namespace

TargetPools TargetPools::make(std::vector<std::string> occupations,
                              std::vector<std::string> locations,
                              int age_margin) {
    TargetPools p;
    p.age_margin_ = age_margin;
    p.values_[Attribute::gender] = {"male", "female"};
    p.values_[Attribute::income_level] = {"no income", "low", "middle", "high", "very high"};
    p.values_[Attribute::relationship_status] = {"single", "in a relationship", "married", "divorced", "widowed"};
    p.values_[Attribute::education] = {"no degree", "high school", "bachelor's", "master's", "PhD"};
    p.values_[Attribute::occupation] = std::move(occupations);
    p.values_[Attribute::birth_location] = locations;
    p.values_[Attribute::current_location] = std::move(locations);
    return p;
}

TargetPools TargetPools::load(const RunConfig& cfg) {
    return make(load_list_file(cfg.resolved_occupations_file()),
                load_list_file(cfg.resolved_locations_file()),
                cfg.age_margin);
}

const std::vector<std::string>& TargetPools::values(Attribute a) const {
    auto it = values_.find(a);
    if (it == values_.end()) {
        static const std::vector<std::string> empty;
        return empty;
    }
    return it->second;
}

AttributeValue sample_target_value(const TargetPools& pools,
                                   Attribute attribute,
                                   const AttributeValue& true_value,
                                   std::uint64_t rng_seed) {
    if (true_value.attribute != attribute) {
        throw Error("true_value attribute does not match requested attribute");
    }

    if (attribute == Attribute::age) {
        if (!true_value.numeric) {
            throw PoolExhausted("age truth is not numeric; cannot apply the target margin");
        }
        int truth = *true_value.numeric;
        std::vector<int> candidates;
        for (int v = pools.age_min(); v <= pools.age_max(); ++v) {
            if (std::abs(v - truth) >= pools.age_margin()) candidates.push_back(v);
        }
        if (candidates.empty()) {
            throw PoolExhausted("no age candidate at least " + std::to_string(pools.age_margin()) +
                                " years from " + std::to_string(truth));
        }
        int chosen = candidates[splitmix64(rng_seed) % candidates.size()];
        return make_attribute_value(attribute, std::to_string(chosen));
    }

    const auto& pool = pools.values(attribute);
    if (pool.size() < 2) {
        throw PoolExhausted(std::string("candidate pool for ") + std::string(attribute_token(attribute)) +
                            " has fewer than 2 entries");
    }
    std::string truth_norm = normalize_for_match(true_value.value);
    std::vector<const std::string*> candidates;
    for (const auto& v : pool) {
        if (normalize_for_match(v) != truth_norm) candidates.push_back(&v);
    }
    if (candidates.empty()) {
        throw PoolExhausted(std::string("no candidate differs from the truth for ") +
                            std::string(attribute_token(attribute)));
    }
    const std::string& chosen = *candidates[splitmix64(rng_seed) % candidates.size()];
    return make_attribute_value(attribute, chosen);
}

} // namespace decoy
