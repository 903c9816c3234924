// qproc: command-line front end for the Q-process library.

#include <qproc/io.hpp>
#include <qproc/qproc.hpp>

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using qproc::json;

struct RunConfig {
  std::string law = "0.25,0,0.75";
  int n = 10;
  std::size_t paths = 100000;
  std::uint64_t seed = 1;
  std::size_t trunc_n = 512;
  std::size_t trunc_m = 512;
  std::size_t j_cap = 512;
  std::size_t l_cap = 4096;
  double eps = 0.0;
  std::string grid;
  std::string format = "auto";
  std::string out;
  std::string engine = "dp";
  std::int64_t i0 = 1;
  bool marginal = false;
  bool n_set = false;
};

std::vector<int> parse_grid(const std::string& text, std::vector<int> fallback) {
  if (text.empty()) return fallback;
  std::vector<int> g;
  for (double v : qproc::parse_law_literal(text)) {
    if (v < 1 || v != static_cast<int>(v))
      throw qproc::Error(qproc::ErrorKind::AssumptionViolated, "grid entries must be positive integers");
    g.push_back(static_cast<int>(v));
  }
  return g;
}

bool want_csv(const RunConfig& c, bool table_default) {
  if (c.format == "auto") return table_default;
  return c.format == "csv";
}

void emit(const json& j, std::ostream& os) { os << j.dump(2) << '\n'; }

qproc::OffspringLaw load_law(const RunConfig& c) { return qproc::OffspringLaw(qproc::parse_law_literal(c.law)); }

void cmd_analyze(const RunConfig& c, std::ostream& os) {
  const auto law = load_law(c);
  if (law.is_critical())
    throw qproc::Error(qproc::ErrorKind::CriticalLawUnsupported, "critical law (m = 1) has no Q-process limit");
  const auto sp = qproc::derive_params(law);
  if (!want_csv(c, false)) return emit(qproc::to_json(law, sp), os);
  os << "key,value\n"
     << "m," << qproc::format_double(law.mean()) << '\n'
     << "classification," << qproc::classify(law) << '\n'
     << "q," << qproc::format_double(sp.q) << '\n'
     << "beta," << qproc::format_double(sp.beta) << '\n'
     << "gamma_q," << qproc::format_double(sp.gamma_q) << '\n'
     << "b_q," << qproc::format_double(sp.b_q) << '\n'
     << "alpha," << qproc::format_double(sp.alpha) << '\n'
     << "c_rho," << qproc::format_double(sp.c_rho) << '\n';
}

void cmd_exact(const RunConfig& c, std::ostream& os) {
  const auto law = load_law(c);
  const auto sp = qproc::derive_params(law);
  std::vector<std::vector<double>> cells;  // j, l, prob
  std::vector<double> marg;
  double leakage = 0.0;
  if (c.engine == "gf") {
    const auto gf = qproc::joint_gf(law, sp, c.n, c.trunc_n, c.trunc_m);
    leakage = gf.leakage();
    if (c.marginal) marg = qproc::marginal_S(gf);
    for (std::size_t j = 0; j <= gf.trunc_s(); ++j)
      for (std::size_t l = 0; l <= gf.trunc_x(); ++l)
        if (gf(j, l) != 0.0) cells.push_back({double(j), double(l), gf(j, l)});
  } else {
    const auto t = qproc::dp_joint_distribution(sp, law, c.n, c.j_cap, c.l_cap);
    leakage = t.leakage();
    if (c.marginal) marg = t.marginal_S();
    for (std::size_t j = 0; j <= t.j_cap(); ++j)
      for (std::size_t l = 0; l <= t.l_cap(); ++l)
        if (t.prob(j, l) != 0.0) cells.push_back({double(j), double(l), t.prob(j, l)});
  }

  if (want_csv(c, true)) {
    if (c.marginal) {
      for (std::size_t l = 0; l < marg.size(); ++l)
        if (marg[l] != 0.0) os << l << ',' << qproc::format_double(marg[l]) << '\n';
    } else {
      for (const auto& r : cells)
        os << static_cast<std::size_t>(r[0]) << ',' << static_cast<std::size_t>(r[1]) << ','
           << qproc::format_double(r[2]) << '\n';
    }
    os << "#leakage=" << qproc::format_double(leakage) << '\n';
    return;
  }
  json j{{"n", c.n}, {"engine", c.engine}, {"leakage", leakage}};
  if (c.marginal) {
    json rows = json::array();
    for (std::size_t l = 0; l < marg.size(); ++l)
      if (marg[l] != 0.0) rows.push_back(json::array({l, marg[l]}));
    j["marginal_S"] = rows;
  } else {
    json rows = json::array();
    for (const auto& r : cells)
      rows.push_back(json::array({static_cast<std::size_t>(r[0]), static_cast<std::size_t>(r[1]), r[2]}));
    j["cells"] = rows;
  }
  emit(j, os);
}

void cmd_simulate(const RunConfig& c, std::ostream& os) {
  const auto law = load_law(c);
  const auto sp = qproc::derive_params(law);
  const qproc::SpineSampler sampler(sp, law);
  if (c.paths == 1) {
    qproc::RandomStream rng(c.seed, 0);
    const auto t = qproc::simulate_trajectory(rng, sampler, c.i0, c.n);
    if (want_csv(c, true)) return qproc::write_csv(os, t);
    return emit(json{{"seed", c.seed}, {"n", c.n}, {"states", t.states}, {"S_n", t.total_progeny}}, os);
  }
  const auto set = qproc::simulate_batch(c.seed, sampler, c.i0, c.n, c.paths);
  if (want_csv(c, true)) {
    os << "path,S_n\n";
    for (std::size_t p = 0; p < set.values.size(); ++p) os << p << ',' << set.values[p] << '\n';
    return;
  }
  const auto m = qproc::sample_moments(std::span<const std::int64_t>(set.values));
  emit(json{{"n", c.n},
            {"paths", c.paths},
            {"seed", c.seed},
            {"initial_state", c.i0},
            {"sample_mean", m.mean},
            {"sample_variance", m.variance()},
            {"std_error", m.std_error()},
            {"expected_mean", c.i0 == 1 ? json(qproc::expected_Sn(sp, c.n)) : json(nullptr)}},
       os);
}

void cmd_clt(const RunConfig& c, std::ostream& os) {
  const auto r = qproc::clt_check(load_law(c), c.n, c.paths, c.seed);
  if (want_csv(c, false)) return qproc::write_csv(os, r);
  emit(qproc::to_json(r), os);
}

void cmd_rate(const RunConfig& c, std::ostream& os) {
  const auto grid = parse_grid(c.grid, {50, 100, 200, 400, 800});
  if (grid.size() < 4) throw qproc::Error(qproc::ErrorKind::AssumptionViolated, "rate grid needs >= 4 points");
  const auto r = qproc::rate_probe_clt(load_law(c), grid, c.paths, c.seed);
  if (want_csv(c, false)) return qproc::write_csv(os, r);
  emit(qproc::to_json(r), os);
}

void cmd_lln(const RunConfig& c, std::ostream& os) {
  const auto grid = parse_grid(c.grid, {100, 200, 400, 800, 1000});
  const auto r = qproc::lln_check(load_law(c), grid, c.paths, c.eps, c.seed);
  if (want_csv(c, false)) return qproc::write_csv(os, r);
  emit(qproc::to_json(r), os);
}

void cmd_variance(const RunConfig& c, std::ostream& os) {
  const auto law = load_law(c);
  const auto d = qproc::variance_diagnostic(qproc::derive_params(law), parse_grid(c.grid, {500, 1000, 2000}));
  if (!want_csv(c, false)) return emit(qproc::to_json(d), os);
  os << "n,var_over_n,ratio_2c_rho\n";
  for (std::size_t i = 0; i < d.n_grid.size(); ++i)
    os << d.n_grid[i] << ',' << qproc::format_double(d.slope[i]) << ',' << qproc::format_double(d.ratio[i])
       << '\n';
  os << "#limit_ratio=" << qproc::format_double(d.limit_ratio) << '\n';
}

void cmd_lemmas(const RunConfig& c, std::ostream& os) {
  const auto law = load_law(c);
  const int n = c.n_set ? c.n : 20;
  std::vector<qproc::ExpansionReport> reps;
  for (auto id : {qproc::LemmaId::L1, qproc::LemmaId::L2, qproc::LemmaId::L3, qproc::LemmaId::L4,
                  qproc::LemmaId::L5, qproc::LemmaId::L6})
    reps.push_back(qproc::verify_lemma(law, id, {}, n));
  const auto rep = qproc::check_representation(law, std::max(n, 12));
  if (want_csv(c, false)) {
    for (std::size_t i = 0; i < reps.size(); ++i) {
      std::ostringstream block;
      qproc::write_csv(block, reps[i]);
      std::string text = block.str();
      if (i > 0) text.erase(0, text.find('\n') + 1);
      os << text;
    }
    os << "#representation n=" << rep.n << " bounds_ok=" << rep.all_bounds_ok()
       << " nonzero=" << rep.all_nonzero() << " cauchy=" << rep.all_cauchy() << '\n';
    return;
  }
  json arr = json::array();
  for (const auto& r : reps) arr.push_back(qproc::to_json(r));
  emit(json{{"lemmas", arr}, {"representation", qproc::to_json(rep)}}, os);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Galton-Watson Q-process: exact laws, simulation and limit checks"};
  app.set_config("--config", "", "key=value file; explicit flags win");
  app.require_subcommand(1);
  app.fallthrough();

  RunConfig c;
  // A config line "law=0.25,0,0.75" arrives as a list, so both are joined.
  std::vector<std::string> law_items, grid_items;
  app.add_option("--law", law_items, "offspring probabilities p0,p1,... (default 0.25,0,0.75)");
  app.add_option("--n", c.n, "horizon (lemmas: 20)")->check(CLI::NonNegativeNumber)->capture_default_str();
  app.add_option("--paths", c.paths, "Monte-Carlo paths")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--seed", c.seed, "base seed")->capture_default_str();
  app.add_option("--trunc-n", c.trunc_n, "series truncation in s")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--trunc-m", c.trunc_m, "series truncation in x")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--jcap", c.j_cap, "state cap of the DP table")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--lcap", c.l_cap, "progeny cap of the DP table")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--eps", c.eps, "LLN deviation threshold (0 = 10% of the limit)")->capture_default_str();
  app.add_option("--grid", grid_items, "comma list of n values");
  app.add_option("--format", c.format, "json, csv or auto")
      ->check(CLI::IsMember({"auto", "json", "csv"}))
      ->capture_default_str();
  app.add_option("--out", c.out, "output file (default stdout)");
  app.add_option("--engine", c.engine, "exact: dp or gf")->check(CLI::IsMember({"dp", "gf"}))->capture_default_str();
  app.add_option("--i0", c.i0, "initial state for simulate")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_flag("--marginal", c.marginal, "exact: print the S_n marginal only");

  using Cmd = void (*)(const RunConfig&, std::ostream&);
  Cmd chosen = nullptr;
  auto add = [&](const char* name, const char* help, Cmd fn) {
    app.add_subcommand(name, help)->callback([&chosen, fn] { chosen = fn; });
  };
  add("analyze", "derived parameters of the law", cmd_analyze);
  add("exact", "exact joint law of (W(n), S_n)", cmd_exact);
  add("simulate", "simulate paths (one path prints the trajectory)", cmd_simulate);
  add("clt", "KS distance of standardised S_n to N(0,1)", cmd_clt);
  add("rate", "log-log decay of the KS distance along --grid", cmd_rate);
  add("lln", "law of large numbers for S_n / n along --grid", cmd_lln);
  add("variance", "exact Var S_n / (2 C_rho n) along --grid", cmd_variance);
  add("lemmas", "local expansions and the reciprocal representation", cmd_lemmas);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  auto join = [](const std::vector<std::string>& items) {
    std::string s;
    for (const auto& it : items) s += (s.empty() ? "" : ",") + it;
    return s;
  };
  if (!law_items.empty()) c.law = join(law_items);
  c.grid = join(grid_items);
  c.n_set = app.count("--n") > 0;

  try {
    if (c.out.empty()) {
      chosen(c, std::cout);
    } else {
      std::ofstream f(c.out, std::ios::binary);
      if (!f) {
        std::cerr << "error: cannot open " << c.out << '\n';
        return 1;
      }
      chosen(c, f);
    }
  } catch (const qproc::Error& e) {
    std::cerr << "error[" << qproc::to_string(e.kind()) << "]: " << e.what() << '\n';
    return qproc::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
