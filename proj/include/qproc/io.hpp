#pragma once

// JSON and flat-CSV renderings of the reports. Uses nlohmann/json.

#include <qproc/format.hpp>
#include <qproc/limit_stats.hpp>
#include <qproc/offspring_law.hpp>
#include <qproc/progeny_moments.hpp>

#include <json.hpp>

#include <cmath>
#include <ostream>
#include <string>

namespace qproc {

using json = nlohmann::ordered_json;

inline std::string classify(const OffspringLaw& law) {
  if (law.is_critical()) return "critical";
  return law.mean() > 1.0 ? "supercritical" : "subcritical";
}

inline json to_json(const OffspringLaw& law, const SystemParams& sp) {
  json j;
  j["law"] = std::vector<double>(law.probs().begin(), law.probs().end());
  j["m"] = law.mean();
  j["classification"] = classify(law);
  j["q"] = sp.q;
  j["beta"] = sp.beta;
  j["gamma_q"] = sp.gamma_q;
  j["b_q"] = sp.b_q;
  j["alpha"] = sp.alpha;
  j["c_rho"] = sp.c_rho;
  return j;
}

inline json to_json(const ExpansionReport& r) {
  return json{{"lemma", std::string(to_string(r.lemma))},
              {"grid", r.grid},
              {"fitted", r.fitted},
              {"target", r.target},
              {"residuals", r.residuals}};
}

inline json to_json(const RepresentationReport& r) {
  json pts = json::array();
  for (const auto& p : r.points) {
    pts.push_back(json{{"s", p.s},
                       {"x", p.x},
                       {"R_n", p.r.back()},
                       {"residual_n", p.residual.empty() ? 0.0 : p.residual.back()},
                       {"bound_ok", p.bound_ok},
                       {"nonzero", p.nonzero},
                       {"cauchy_ok", p.cauchy_ok}});
  }
  return json{{"n", r.n},
              {"all_bounds_ok", r.all_bounds_ok()},
              {"all_nonzero", r.all_nonzero()},
              {"all_cauchy", r.all_cauchy()},
              {"points", pts}};
}

inline json to_json(const CltReport& r) {
  return json{{"n", r.n},
              {"paths", r.paths},
              {"seed", r.seed},
              {"standardization", {{"mean_used", r.mean_used}, {"scale_used", r.scale_used}}},
              {"ks_distance", r.ks_distance},
              {"sample_mean", r.sample_mean},
              {"sample_variance", r.sample_variance},
              {"variance_ratio_2c_rho", r.variance_ratio}};
}

inline json to_json(const RateReport& r) {
  return json{{"n_grid", r.n_grid},     {"ks", r.ks},
              {"paths", r.paths},       {"seed", r.seed},
              {"slope", r.slope},       {"envelope_c", r.envelope_c},
              {"bound_fraction", r.bound_fraction}};
}

inline json to_json(const LlnReport& r) {
  return json{{"n_grid", r.n_grid},
              {"paths", r.paths},
              {"seed", r.seed},
              {"limit", r.limit},
              {"eps", r.eps},
              {"means", r.means},
              {"std_errors", r.std_errors},
              {"bias", r.bias},
              {"deviation_probs", r.deviation_probs},
              {"degenerate_ks", r.degenerate_ks},
              {"fitted_rate", r.fitted_rate}};
}

inline json to_json(const VarianceDiagnostic& d) {
  return json{{"n_grid", d.n_grid},
              {"ratio", d.ratio},
              {"variance_slope", d.slope},
              {"limit_slope", d.limit_slope},
              {"limit_ratio", d.limit_ratio},
              {"max_successive_change", d.max_successive_change}};
}

// Flat CSV, one row per grid point.

inline void write_csv(std::ostream& os, const CltReport& r) {
  os << "n,paths,seed,mean_used,scale_used,ks_distance,sample_mean,sample_variance,variance_ratio_2c_rho\n"
     << r.n << ',' << r.paths << ',' << r.seed << ',' << format_double(r.mean_used) << ','
     << format_double(r.scale_used) << ',' << format_double(r.ks_distance) << ','
     << format_double(r.sample_mean) << ',' << format_double(r.sample_variance) << ','
     << format_double(r.variance_ratio) << '\n';
}

inline void write_csv(std::ostream& os, const RateReport& r) {
  os << "n,ks\n";
  for (std::size_t i = 0; i < r.n_grid.size(); ++i) os << r.n_grid[i] << ',' << format_double(r.ks[i]) << '\n';
  os << "#slope=" << format_double(r.slope) << '\n';
}

inline void write_csv(std::ostream& os, const LlnReport& r) {
  os << "n,mean,std_error,bias,deviation_prob,degenerate_ks\n";
  for (std::size_t i = 0; i < r.n_grid.size(); ++i)
    os << r.n_grid[i] << ',' << format_double(r.means[i]) << ',' << format_double(r.std_errors[i]) << ','
       << format_double(r.bias[i]) << ',' << format_double(r.deviation_probs[i]) << ','
       << format_double(r.degenerate_ks[i]) << '\n';
}

inline void write_csv(std::ostream& os, const ExpansionReport& r) {
  os << "lemma,index,fitted,target,residual\n";
  for (std::size_t i = 0; i < r.fitted.size(); ++i)
    os << to_string(r.lemma) << ',' << i << ',' << format_double(r.fitted[i]) << ','
       << format_double(r.target[i]) << ',' << format_double(r.residuals[i]) << '\n';
}

}  // namespace qproc
