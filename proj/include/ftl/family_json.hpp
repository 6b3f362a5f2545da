#ifndef FTL_FAMILY_JSON_HPP
#define FTL_FAMILY_JSON_HPP

#include <string>

#include <json.hpp>

#include "ftl/errors.hpp"
#include "ftl/transform.hpp"

namespace ftl {

// Schema:
// {"dofs":[{"name":..., "domain":{"kind":"circle"|"interval"|"sphere",
//           "lo":..., "hi":...}, "block_dim":..., "repetitions":...}],
//  "feature_dim":...}

inline nlohmann::json family_to_json(const TransformFamily& family) {
  nlohmann::json dofs = nlohmann::json::array();
  for (const DofSpec& d : family.dofs) {
    nlohmann::json domain;
    domain["kind"] = domain_name(d.domain);
    if (d.domain == DofDomain::Interval) {
      domain["lo"] = d.lo;
      domain["hi"] = d.hi;
    }
    dofs.push_back({{"name", d.name},
                    {"domain", domain},
                    {"block_dim", d.block_dim},
                    {"repetitions", d.repetitions}});
  }
  return {{"dofs", dofs}, {"feature_dim", family.feature_dim}};
}

inline TransformFamily family_from_json(const nlohmann::json& j) {
  TransformFamily family;
  try {
    family.feature_dim = j.at("feature_dim").get<int>();
    for (const nlohmann::json& jd : j.at("dofs")) {
      DofSpec d;
      d.name = jd.at("name").get<std::string>();
      const nlohmann::json& domain = jd.at("domain");
      const std::string kind = domain.at("kind").get<std::string>();
      if (kind == "circle") {
        d.domain = DofDomain::Circle;
      } else if (kind == "interval") {
        d.domain = DofDomain::Interval;
        d.lo = domain.at("lo").get<double>();
        d.hi = domain.at("hi").get<double>();
      } else if (kind == "sphere") {
        d.domain = DofDomain::Sphere;
      } else {
        throw DataError("family: unknown domain kind '" + kind + "'");
      }
      d.block_dim = jd.at("block_dim").get<int>();
      d.repetitions = jd.at("repetitions").get<int>();
      family.dofs.push_back(std::move(d));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("family: malformed JSON: ") + ex.what());
  }
  try {
    family.validate();
  } catch (const ValueError& ex) {
    throw DataError(std::string("family: ") + ex.what());
  }
  return family;
}

inline TransformFamily family_from_json_text(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw DataError("family: invalid JSON text");
  return family_from_json(j);
}

}  // namespace ftl

#endif  // FTL_FAMILY_JSON_HPP
