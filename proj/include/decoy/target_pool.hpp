#pragma once

#include "decoy/attributes.hpp"
#include "decoy/config.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace decoy {

/// Candidate values a wrong target can be drawn from, per attribute.
/// Categorical pools are built in; occupations and locations come from the
/// bundled list files so they stay editable without a rebuild.
class TargetPools {
  public:
    static TargetPools load(const RunConfig& cfg);

    // Builds pools from explicit parts (tests use this directly).
    static TargetPools make(std::vector<std::string> occupations,
                            std::vector<std::string> locations,
                            int age_margin);

    const std::vector<std::string>& values(Attribute a) const;
    int age_min() const { return age_min_; }
    int age_max() const { return age_max_; }
    int age_margin() const { return age_margin_; }

  private:
    std::map<Attribute, std::vector<std::string>> values_;
    int age_min_ = 18;
    int age_max_ = 75;
    int age_margin_ = 10;
};

/// Draws a wrong target value for the attribute: never equal to the truth
/// (for age, at least age_margin years away). Deterministic for a fixed seed.
/// Throws PoolExhausted when no candidate satisfies the constraint.
AttributeValue sample_target_value(const TargetPools& pools,
                                   Attribute attribute,
                                   const AttributeValue& true_value,
                                   std::uint64_t rng_seed);

} // namespace decoy
