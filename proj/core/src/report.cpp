#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "affiltest/error.hpp"
#include "affiltest/inference.hpp"

namespace affiltest {

using nlohmann::json;

std::string to_json(const TestReport& r) {
  json j;
  j["grid"] = {{"k", r.intervals},
               {"n", r.bidders},
               {"breakpoints", r.breakpoints},
               {"equispaced", r.equispaced},
               {"cells", r.num_cells},
               {"orbits", r.num_orbits},
               {"t", r.sample_size}};
  j["loglik_unconstrained"] = r.loglik_unconstrained;
  j["loglik_symmetric"] = r.loglik_symmetric;
  j["loglik_affiliated"] = r.loglik_affiliated;
  j["loglik_independent"] = r.loglik_independent;
  j["loglik_center"] = r.loglik_center;
  j["lr_stat"] = r.lr_stat;
  j["lr_stat_unconstrained"] = r.lr_stat_unconstrained;
  j["j"] = r.j;
  j["active_constraints"] = r.active_constraints;
  j["weights"] = r.weights;
  j["weights_computed"] = r.weights_computed;
  j["pi0_evaluated_at"] = "affiliated";
  j["pi0_regularized"] = r.pi0_regularized;
  j["pi0_floored"] = r.pi0_floored;
  j["pvalue"] = r.weights_computed ? json(r.pvalue) : json(nullptr);
  j["sizes"] = r.sizes;
  j["kp_lower"] = r.kp_lower;
  j["kp_upper"] = r.kp_upper;
  json decisions = json::array();
  for (Decision d : r.decision) decisions.push_back(std::string(to_string(d)));
  j["decision"] = decisions;
  j["seed"] = r.seed;
  j["options"] = {{"draws", r.draws},
                  {"constraint_mode", std::string(to_string(r.constraint_mode))},
                  {"tol", r.tol},
                  {"max_iter", r.max_iter},
                  {"epsilon_floor", r.epsilon_floor}};
  j["solver"] = {{"kkt_residual", r.kkt_residual},
                 {"iterations", r.solver_iterations},
                 {"affiliated_orbit_masses", r.affiliated_orbit_masses}};
  return j.dump(2);
}

TestReport report_from_json(std::string_view text) {
  TestReport r;
  try {
    const json j = json::parse(text);
    const json& g = j.at("grid");
    r.intervals = g.at("k").get<int>();
    r.bidders = g.at("n").get<int>();
    r.breakpoints = g.at("breakpoints").get<std::vector<double>>();
    r.equispaced = g.at("equispaced").get<bool>();
    r.num_cells = g.at("cells").get<std::size_t>();
    r.num_orbits = g.at("orbits").get<std::size_t>();
    r.sample_size = g.at("t").get<double>();
    r.loglik_unconstrained = j.at("loglik_unconstrained").get<double>();
    r.loglik_symmetric = j.at("loglik_symmetric").get<double>();
    r.loglik_affiliated = j.at("loglik_affiliated").get<double>();
    r.loglik_independent = j.at("loglik_independent").get<double>();
    r.loglik_center = j.at("loglik_center").get<double>();
    r.lr_stat = j.at("lr_stat").get<double>();
    r.lr_stat_unconstrained = j.at("lr_stat_unconstrained").get<double>();
    r.j = j.at("j").get<std::size_t>();
    r.active_constraints = j.at("active_constraints").get<std::vector<std::size_t>>();
    r.weights = j.at("weights").get<std::vector<double>>();
    r.weights_computed = j.at("weights_computed").get<bool>();
    r.pi0_regularized = j.at("pi0_regularized").get<bool>();
    r.pi0_floored = j.at("pi0_floored").get<bool>();
    r.pvalue = j.at("pvalue").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                         : j.at("pvalue").get<double>();
    r.sizes = j.at("sizes").get<std::vector<double>>();
    r.kp_lower = j.at("kp_lower").get<std::vector<double>>();
    r.kp_upper = j.at("kp_upper").get<std::vector<double>>();
    for (const auto& d : j.at("decision")) r.decision.push_back(parse_decision(d.get<std::string>()));
    r.seed = j.at("seed").get<std::uint64_t>();
    const json& o = j.at("options");
    r.draws = o.at("draws").get<int>();
    r.constraint_mode = parse_constraint_mode(o.at("constraint_mode").get<std::string>());
    r.tol = o.at("tol").get<double>();
    r.max_iter = o.at("max_iter").get<int>();
    r.epsilon_floor = o.at("epsilon_floor").get<double>();
    const json& s = j.at("solver");
    r.kkt_residual = s.at("kkt_residual").get<double>();
    r.solver_iterations = s.at("iterations").get<int>();
    r.affiliated_orbit_masses = s.at("affiliated_orbit_masses").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("malformed report: ") + e.what());
  }
  return r;
}

std::string text_summary(const TestReport& r) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << "Grid: k=" << r.intervals << ", N=" << r.bidders << ", L=" << r.num_cells
     << " cells, M=" << r.num_orbits << " symmetric parameters, T=" << r.sample_size << "\n";
  if (!r.equispaced) {
    os << "Non-equispaced breakpoints:";
    for (double b : r.breakpoints) os << ' ' << b;
    os << "\n  (heights satisfy the volume-weighted adding-up condition; TP2 checks are"
          " unaffected because cell volumes cancel)\n";
  }
  os << "\nMaximum log-likelihood (minus a constant):\n"
     << "  without symmetry          " << r.loglik_unconstrained << "\n"
     << "  under symmetry            " << r.loglik_symmetric << "\n"
     << "  under symmetric TP2       " << r.loglik_affiliated << "\n"
     << "  independence (pooled)     " << r.loglik_independent << "\n"
     << "  center of the simplex     " << r.loglik_center << "\n\n";
  os << "LR statistic (symmetric vs symmetric affiliated): " << r.lr_stat << "\n";
  os << "LR statistic (unrestricted vs symmetric affiliated): " << r.lr_stat_unconstrained
     << "\n";
  os << "Inequality constraints J = " << r.j << " (" << to_string(r.constraint_mode)
     << " minors), binding at the estimate: " << r.active_constraints.size() << "\n";
  if (r.weights_computed) {
    os.precision(4);
    os << "Chi-bar weights (" << r.draws << " draws, seed " << r.seed << "):";
    for (double w : r.weights) os << ' ' << w;
    os << "\np-value: " << r.pvalue << "\n";
    if (r.pi0_regularized) os << "  note: Pi0 was numerically singular and was ridge-regularized\n";
    if (r.pi0_floored) os << "  note: Pi0 evaluated at masses floored at epsilon\n";
  }
  os.precision(4);
  os << "\nsize    KP lower  KP upper  decision\n";
  for (std::size_t s = 0; s < r.sizes.size(); ++s) {
    os << r.sizes[s] << "  " << r.kp_lower[s] << "    " << r.kp_upper[s] << "    "
       << to_string(r.decision[s]) << "\n";
  }
  return os.str();
}

}  // namespace affiltest
