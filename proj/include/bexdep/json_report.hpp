// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <json.hpp>

#include "bexdep/beret.hpp"
#include "bexdep/kl.hpp"
#include "bexdep/multifit.hpp"
#include "bexdep/symmetry.hpp"

namespace bexdep {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

inline Json table_json(const Table2x2& t) {
  return Json::array({Json::array({t.a, t.b}), Json::array({t.c, t.d})});
}

/// Margin indices and prefixes rendered 1-based / sign-per-depth for reports.
inline Json cuboid_json(const Cuboid& c) {
  std::string px, py;
  for (std::uint32_t d = 0; d < c.depth_x; ++d) px.push_back((c.prefix_x >> d) & 1 ? '+' : '-');
  for (std::uint32_t d = 0; d < c.depth_y; ++d) py.push_back((c.prefix_y >> d) & 1 ? '+' : '-');
  Json j;
  j["margin_pair"] = Json::array({c.x_margin + 1, c.y_margin + 1});
  j["depth"] = Json::array({c.depth_x, c.depth_y});
  j["prefix"] = {{"x", px}, {"y", py}};
  return j;
}

inline Json cuboid_result_json(const CuboidResult& r) {
  Json j = cuboid_json(r.cuboid);
  j["table"] = table_json(r.table);
  j["p"] = r.p.value;
  j["p_adjusted"] = r.p.adjusted ? Json(*r.p.adjusted) : Json(nullptr);
  return j;
}

inline Json multifit_report_json(const MultiFitReport& rep, bool full = false) {
  Json j;
  j["global_p"] = rep.global_p;
  j["alpha"] = rep.alpha;
  j["mode"] = rep.mode == MultiFitMode::exhaustive ? "exhaustive" : "adaptive";
  j["total_tests"] = rep.total_tests;
  j["performed_tests"] = rep.performed_tests;
  j["rejected"] = rep.rejected;
  j["strongest"] = rep.strongest ? cuboid_result_json(*rep.strongest) : Json(nullptr);
  if (full) {
    Json tests = Json::array();
    for (const auto& t : rep.tests) tests.push_back(cuboid_result_json(t));
    j["tests"] = tests;
  }
  return j;
}

inline Json beret_finding_json(const BeretFinding& f, const BeretReport& rep) {
  Json j;
  const auto& pp = rep.projections.at(f.projection);
  j["projection"] = f.projection;
  j["s"] = pp.s;
  j["t"] = pp.t;
  j["lambda"] = {{"x_mask", mask_to_string(f.lambda.x_mask, rep.d_max)},
                 {"y_mask", mask_to_string(f.lambda.y_mask, rep.d_max)}};
  j["s_bar"] = f.stat.s_bar;
  j["p"] = f.p.value;
  j["p_adjusted"] = f.p.adjusted ? Json(*f.p.adjusted) : Json(nullptr);
  return j;
}

inline Json beret_report_json(const BeretReport& rep, bool full = false) {
  Json j;
  j["global_p"] = rep.global_p;
  j["alpha"] = rep.alpha;
  j["d_max"] = rep.d_max;
  j["total_tests"] = rep.total_tests;
  j["rejected"] = rep.rejected;
  j["strongest"] = rep.strongest ? beret_finding_json(*rep.strongest, rep) : Json(nullptr);
  if (full) {
    Json findings = Json::array();
    for (const auto& f : rep.findings) findings.push_back(beret_finding_json(f, rep));
    j["findings"] = findings;
  }
  return j;
}

inline Json kl_model_json(const KLModel& model) {
  Json j;
  j["k"] = model.k();
  j["lambdas"] = model.lambdas;
  j["energy_fraction"] = model.energy_fraction();
  j["grid_points"] = model.grid.size();
  return j;
}

}  // namespace bexdep
