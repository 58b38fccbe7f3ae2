#pragma once

#include "decoy/attributes.hpp"
#include "decoy/errors.hpp"
#include "decoy/gateway.hpp"
#include "decoy/prompts.hpp"

#include "json.hpp"

#include <map>
#include <string>

namespace decoy {

struct RewriteResult {
    std::string anonymized_text;
    std::string explanation;
    bool repaired = false; // the format-correction call was needed
    std::string raw;       // verbatim model output, pre-repair
};

// Best-effort recovery of a JSON object from model output: strips code fences,
// then scans for a balanced top-level {...} (string-aware) starting at each
// '{' until one parses. Throws NoJsonFound.
nlohmann::json extract_json_object(const std::string& raw);

/// One rewrite step: render the rewrite prompt, call the model, parse the
/// two-key JSON, with one format-correction call as fallback.
RewriteResult rewrite(const TemplateSet& templates, ChatGateway& gateway,
                      const DecodingParams& params, const std::string& text,
                      const std::map<Attribute, RewriteSlot>& slots, const AnonymizerDemo& demo);

} // namespace decoy
