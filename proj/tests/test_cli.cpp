#include <catch_amalgamated.hpp>

#include <json.hpp>

#include "cli_runner.hpp"

#include <cstdio>
#include <fstream>

using Catch::Approx;

TEST_CASE("cli analyze", "[cli]") {
  const auto r = run_cli("analyze --law 0.25,0,0.75");
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["q"].get<double>() == Approx(1.0 / 3).margin(1e-12));
  CHECK(j["beta"].get<double>() == Approx(0.5).margin(1e-12));
  CHECK(j["gamma_q"].get<double>() == Approx(2.0).margin(1e-12));
  CHECK(j["alpha"].get<double>() == Approx(2.0).margin(1e-12));
  CHECK(j["c_rho"].get<double>() == Approx(7.5).margin(1e-9));
  CHECK(j["classification"] == "supercritical");

  const auto s = run_cli("analyze --law 0.5,0.25,0.25 --format csv");
  REQUIRE(s.code == 0);
  CHECK(s.out.find("q,1.0\n") != std::string::npos);
  CHECK(s.out.find("beta,0.75\n") != std::string::npos);
  CHECK(s.out.find("classification,subcritical\n") != std::string::npos);
}

TEST_CASE("cli exit codes", "[cli]") {
  CHECK(run_cli("analyze --law 0.3,0.7").code == 2);
  CHECK(run_cli("analyze --law 0.5,0.6").code == 2);
  CHECK(run_cli("analyze --law 0.5,0,0.5").code == 2);
  CHECK(run_cli("exact --law 0.25,0,0.75 --n 30 --jcap 8 --lcap 40").code == 3);
  CHECK(run_cli("exact --n 2 --engine gf --trunc-n 5000").code == 3);
  CHECK(run_cli("clt --n 1 --paths 10").code == 5);
  CHECK(run_cli("analyze --format yaml").code != 0);
}

TEST_CASE("cli exact tables", "[cli]") {
  CHECK(run_cli("exact --law 0.25,0,0.75 --n 1").out == "2,1,1.0\n#leakage=0.0\n");
  CHECK(run_cli("exact --n 0").out == "1,0,1.0\n#leakage=0.0\n");

  const auto r = run_cli("exact --law 0.25,0,0.75 --n 2");
  REQUIRE(r.code == 0);
  double p23 = 0, p43 = 0;
  int rows = 0;
  std::size_t pos = 0;
  while (pos < r.out.size()) {
    const std::size_t nl = r.out.find('\n', pos);
    const std::string line = r.out.substr(pos, nl - pos);
    pos = nl + 1;
    if (line[0] == '#') continue;
    ++rows;
    unsigned j, l;
    double p;
    REQUIRE(std::sscanf(line.c_str(), "%u,%u,%lf", &j, &l, &p) == 3);
    if (j == 2 && l == 3) p23 = p;
    if (j == 4 && l == 3) p43 = p;
  }
  CHECK(rows == 2);
  CHECK(p23 == Approx(0.75).margin(1e-15));
  CHECK(p43 == Approx(0.25).margin(1e-15));

  const auto m = run_cli("exact --law 0.5,0.25,0.25 --n 3 --marginal --format json");
  REQUIRE(m.code == 0);
  const auto j = nlohmann::json::parse(m.out);
  double total = 0;
  for (const auto& row : j["marginal_S"]) total += row[1].get<double>();
  CHECK(total == Approx(1.0).margin(1e-12));
}

TEST_CASE("cli config file sits under explicit flags", "[cli]") {
  const std::string path = "qproc_cli_test.ini";
  {
    std::ofstream f(path);
    f << "law=0.5,0.25,0.25\nn=1\n";
  }
  const auto fromfile = run_cli("exact --config " + path);
  CHECK(fromfile.out == "1,1,0.3333333333333333\n2,1,0.6666666666666666\n#leakage=0.0\n");
  const auto marg = run_cli("exact --config " + path + " --marginal");
  CHECK(marg.out == "1,1.0\n#leakage=0.0\n");
  const auto over = run_cli("exact --config " + path + " --law 0.25,0,0.75");
  CHECK(over.out == "2,1,1.0\n#leakage=0.0\n");
  std::remove(path.c_str());
}

TEST_CASE("cli simulate and reports", "[cli]") {
  const auto t = run_cli("simulate --n 5 --paths 1 --seed 3");
  REQUIRE(t.code == 0);
  CHECK(t.out.rfind("step,W\n0,1\n", 0) == 0);

  const auto c = run_cli("clt --n 40 --paths 2000 --seed 7");
  REQUIRE(c.code == 0);
  const auto j = nlohmann::json::parse(c.out);
  CHECK(j.contains("ks_distance"));
  CHECK(j["standardization"]["mean_used"].get<double>() > 0);

  const auto l = run_cli("lemmas --law 0.25,0,0.75");
  REQUIRE(l.code == 0);
  const auto lj = nlohmann::json::parse(l.out);
  REQUIRE(lj["lemmas"].size() == 6);
  const auto& l1 = lj["lemmas"][0];
  CHECK(l1["target"][0].get<double>() == Approx(2.0));
  CHECK(l1["target"][1].get<double>() == Approx(4.0));
  for (const auto& res : l1["residuals"]) CHECK(std::abs(res.get<double>()) < 1e-3);
  CHECK(lj["representation"]["all_bounds_ok"] == true);
}

TEST_CASE("cli output does not depend on QPROC_WORKERS", "[cli]") {
  for (const std::string args :
       {"simulate --n 30 --paths 3000 --seed 5", "simulate --n 30 --paths 3000 --seed 5 --format json",
        "clt --n 30 --paths 3000 --seed 5", "lln --grid 20,40 --paths 2000 --seed 5 --format csv"}) {
    const auto a = run_cli(args, "QPROC_WORKERS=1");
    const auto b = run_cli(args, "QPROC_WORKERS=4");
    INFO(args);
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);
    CHECK(run_cli(args, "QPROC_WORKERS=1").out == a.out);
  }
}

TEST_CASE("cli writes to --out", "[cli]") {
  const std::string path = "qproc_cli_out.csv";
  REQUIRE(run_cli("exact --n 1 --out " + path).code == 0);
  std::ifstream f(path);
  std::string body((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  CHECK(body == "2,1,1.0\n#leakage=0.0\n");
  std::remove(path.c_str());
}
