#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "support.hpp"

using namespace platoon;
using platoon::testing::Gen;
using json = nlohmann::json;

namespace {

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

std::vector<std::string> cells(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  for (std::string c; std::getline(is, c, ',');) out.push_back(c);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

Trajectory reference_run(long horizon) {
  auto c = reference_scenario();
  c.horizon = horizon;
  return run_simulation(c);
}

}  // namespace

TEST(Fmt, RoundTrips) {
  Gen g(1);
  for (int k = 0; k < 10000; ++k) {
    const double x = g.coin() ? g.real(-1e3, 1e3) : g.log_real(1e-300, 1e300);
    EXPECT_EQ(std::strtod(fmt(x).c_str(), nullptr), x);
  }
  EXPECT_EQ(fmt(0.5), "0.5");
  EXPECT_EQ(fmt(kNaN), "nan");
}

TEST(TraceCsv, HeaderAndShape) {
  const auto tr = reference_run(10);
  const auto ls = lines(to_text(write_trace_csv, tr));
  ASSERT_EQ(ls.size(), 1u + 11u * 5u);
  EXPECT_EQ(ls[0],
            "t,i,s,v,s_hat,v_hat,s_bar,v_bar,s_star,v_star,y_s,y_v,u,rho,lambda,tau,alpha,beta,source,attack_norm,"
            "phi,platoon_phi,k_1,k_2,k_3,k_4,k_5");
  for (std::size_t k = 1; k < ls.size(); ++k) EXPECT_EQ(cells(ls[k]).size(), 27u) << ls[k];
  const auto first = cells(ls[1]);
  EXPECT_EQ(first[0], "0");
  EXPECT_EQ(first[1], "1");
  EXPECT_EQ(first[2], "200");
  EXPECT_EQ(first[3], "10");
}

TEST(TraceCsv, InapplicableFieldsAreNaN) {
  const auto tr = reference_run(5);
  const auto ls = lines(to_text(write_trace_csv, tr));
  for (std::size_t k = 1 + 5; k < ls.size(); ++k) {  // skip t = 0
    const auto c = cells(ls[k]);
    const int i = std::stoi(c[1]);
    const bool interior = i == 3;
    EXPECT_EQ(c[13] == "nan", !interior) << ls[k];  // rho
    EXPECT_EQ(c[14] == "nan", interior) << ls[k];   // lambda
    EXPECT_EQ(c[15] == "nan", interior) << ls[k];   // tau
    for (std::size_t g = 22; g < 27; ++g) EXPECT_EQ(c[g] == "nan", !interior) << ls[k];
    EXPECT_NE(c[16], "nan");
  }
}

TEST(TraceCsv, ValuesMatchTheTrajectory) {
  const auto tr = reference_run(5);
  const auto ls = lines(to_text(write_trace_csv, tr));
  const auto c = cells(ls[1 + 5 * 5 + 2]);  // t = 5, i = 3
  const auto& r = tr.steps[4].at(3);
  EXPECT_EQ(std::strtod(c[4].c_str(), nullptr), r.x_hat(0));
  EXPECT_EQ(std::strtod(c[12].c_str(), nullptr), r.u);
  EXPECT_EQ(std::strtod(c[16].c_str(), nullptr), r.alpha);
  EXPECT_EQ(std::strtod(c[19].c_str(), nullptr), r.attack_norm);
}

TEST(DetectionCsv, HeaderRowsAndSets) {
  const auto tr = reference_run(30);
  const auto ls = lines(to_text(write_detection_csv, tr));
  ASSERT_EQ(ls.size(), 1u + 31u * 5u);
  EXPECT_EQ(ls[0], "t,i,trusted,attacked,suspected,pairwise,innovation,exhaustion,completion");
  for (std::size_t k = 1; k < ls.size(); ++k) EXPECT_EQ(cells(ls[k]).size(), 9u) << ls[k];
  EXPECT_EQ(ls[1], "0,1,,,,0,0,0,0");
  const auto last3 = cells(ls[1 + 30 * 5 + 2]);
  EXPECT_EQ(last3[3], "3");
  EXPECT_EQ(last3[2], "1;2;4;5");
}

TEST(RunSummary, Fields) {
  const auto tr = reference_run(40);
  const auto s = run_summary(tr);
  EXPECT_EQ(s["seed"], tr.scenario.config.seed);
  EXPECT_EQ(s["horizon"], 40);
  EXPECT_EQ(s["phi_initial"].get<double>(), tr.initial.phi);
  EXPECT_EQ(s["phi_final"].get<double>(), tr.steps.back().phi);
  EXPECT_LE(s["max_bound_excess"].get<double>(), 0.0);
  ASSERT_EQ(s["attack_set_identified_at"].size(), 5u);
  for (const auto& at : s["attack_set_identified_at"]) {
    ASSERT_TRUE(at.is_number());
    EXPECT_LE(at.get<long>(), 2 + 2);
  }
}

TEST(RunDirectory, WritesAllFiles) {
  const auto tr = reference_run(15);
  const auto dir = std::filesystem::temp_directory_path() / "platoon_io_test";
  std::filesystem::remove_all(dir);
  write_run_directory(dir, tr);
  for (const char* f : {"scenario.json", "feasibility.json", "trace.csv", "detection.csv", "summary.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  std::ifstream sf(dir / "scenario.json");
  json sj;
  sf >> sj;
  // The written scenario reproduces the run.
  const auto again = run_simulation(config_from_json(sj));
  EXPECT_EQ(to_text(write_trace_csv, again), to_text(write_trace_csv, tr));
  std::filesystem::remove_all(dir);
}

TEST(MonteCarloCsv, Shape) {
  auto c = reference_scenario();
  c.horizon = 10;
  const auto s = monte_carlo(c, 2, 1, 1);
  const auto ls = lines(to_text(write_monte_carlo_csv, s));
  ASSERT_EQ(ls.size(), 1u + 11u * 5u);
  EXPECT_EQ(ls[0], "t,i,eta_s,eta_v,zeta_s,zeta_v,phi,platoon_phi");
  EXPECT_EQ(cells(ls.back())[0], "10");
  EXPECT_EQ(cells(ls.back())[1], "5");
}

// With no attack and b = 1 nothing is ever confirmed, so the sets stay empty
// and the simulated bounds follow the precomputed envelopes exactly.
TEST(Envelopes, MatchAttackFreeRun) {
  for (ThresholdMode mode : {ThresholdMode::adaptive, ThresholdMode::static_beta}) {
    auto c = reference_scenario();
    c.attack.set = {};
    c.horizon = 200;
    c.threshold.mode = mode;
    const auto tr = run_simulation(c);
    const auto env = bound_envelopes(tr.scenario);
    ASSERT_EQ(env.size(), 201u * 5u);
    std::size_t k = 0;
    tr.for_each([&](const StepTrace& s) {
      for (const auto& r : s.v) {
        ASSERT_TRUE(r.sets.trusted.empty() && r.sets.attacked.empty()) << "t=" << s.t;
        const auto& e = env[k++];
        EXPECT_EQ(e.t, s.t);
        EXPECT_NEAR(e.alpha, r.alpha, 1e-9 * r.alpha) << "t=" << s.t << " i=" << e.i;
      }
    });
  }
}

TEST(Envelopes, CsvHeader) {
  auto c = reference_scenario();
  c.horizon = 3;
  const auto ls = lines(to_text(write_envelopes_csv, bound_envelopes(resolve(c))));
  ASSERT_EQ(ls.size(), 1u + 4u * 5u);
  EXPECT_EQ(ls[0], "t,i,rho,lambda,tau,alpha");
  EXPECT_EQ(ls[1], "0,1,nan,300,300,300");
}

TEST(Feasibility, ReferenceReport) {
  const auto j = feasibility_report(resolve(reference_scenario()));
  EXPECT_TRUE(j["feasible"].get<bool>());
  EXPECT_NEAR(j["observer"]["norm_A"].get<double>(), 1.005012499921876, 1e-12);
  EXPECT_TRUE(j["gain_conditions"]["holds"].get<bool>());
  EXPECT_NEAR(j["closed_loop"]["spectral_radius"].get<double>(), 0.9899450911072054, 1e-10);
  EXPECT_LE(j["closed_loop"]["block_spectrum_gap"].get<double>(), 1e-8);
  EXPECT_DOUBLE_EQ(j["threshold"]["omega"].get<double>(), 0.26);
  EXPECT_NEAR(j["threshold"]["beta"].get<double>(), 190.75648812657437, 1e-9);
  EXPECT_GT(j["threshold"]["feasible_grid_points"].get<int>(), 0);
  const auto iv = j["threshold"]["omega_interval"];
  ASSERT_TRUE(iv.is_array());
  EXPECT_LT(iv[0].get<double>(), 0.26);
  EXPECT_GT(iv[1].get<double>(), 0.26);
  ASSERT_TRUE(j["asymptotic"].is_object());
  const auto& ad = j["asymptotic"]["adaptive"];
  const auto& st = j["asymptotic"]["static"];
  EXPECT_EQ(ad["vehicles"].size(), 5u);
  EXPECT_LE(ad["alpha_hat"].get<double>(), st["alpha_hat"].get<double>());
  EXPECT_TRUE(ad["performance_bound"].is_number());
}

TEST(Feasibility, InfeasibleIsReportedNotThrown) {
  auto c = reference_scenario();
  c.b = 3;
  c.attack.set = {};
  EXPECT_THROW(resolve(c), ConfigError);
  const auto j = feasibility_report(resolve(c, false));
  EXPECT_FALSE(j["feasible"].get<bool>());
  EXPECT_FALSE(j["threshold"]["grid_feasible"].get<bool>());
  EXPECT_TRUE(j["threshold"]["beta"].is_null());
  EXPECT_TRUE(j["asymptotic"].is_null());

  c = reference_scenario();
  c.g_v = 500;
  const auto k = feasibility_report(resolve(c, false));
  EXPECT_FALSE(k["feasible"].get<bool>());
  EXPECT_FALSE(k["gain_conditions"]["holds"].get<bool>());
}
