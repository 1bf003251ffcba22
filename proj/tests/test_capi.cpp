// Exercises the shared library through its C interface only; the core
// library is linked for the oracles.
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cornerspace/cornerspace.h"
#include "cornerspace/corner.hpp"
#include "cornerspace/steadystate.hpp"
#include "doctest.h"
#include "json.hpp"

namespace {

const char* kHardcore2x2 = R"({
  "name": "hc22",
  "model": {"hardcore": true, "j": 1, "f": 2, "delta_omega": 5},
  "lattice": {"lx": 2, "ly": 2}, "base": {"lx": 2, "ly": 1},
  "strategy": "schedule", "m_schedule": [16],
  "solver": {"rel_tol": 1e-10}
})";

cs_config* parse(const char* text) {
  cs_config* c = nullptr;
  REQUIRE(cs_config_from_json(text, &c) == CS_OK);
  return c;
}

std::string to_json(const cs_config* c) {
  size_t needed = 0;
  REQUIRE(cs_config_to_json(c, nullptr, 0, &needed) == CS_OK);
  std::string s(needed, '\0');
  REQUIRE(cs_config_to_json(c, s.data(), s.size(), &needed) == CS_OK);
  s.resize(needed - 1);
  return s;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config errors name the offending field") {
  struct Case {
    const char* json;
    const char* needle;
  };
  const Case cases[] = {
      {R"({"model": {"u": 3}, "foo": 1})", "foo"},
      {R"({"model": {"hardcore": true, "u": 3}})", "hard-core"},
      {R"({"model": {"u": "x"}})", "model.u"},
      {R"({"model": {"u": 3}, "trajectories": {"propagator": "euler"}})",
       "trajectories.propagator"},
      {R"({"model": {"u": 3}, "m_schedule": [0, -4]})", "m_schedule"},
      {"{not json", ""},
  };
  for (const Case& k : cases) {
    cs_config* c = nullptr;
    CHECK(cs_config_from_json(k.json, &c) == CS_ERR_CONFIG);
    CHECK(c == nullptr);
    CHECK(std::string(cs_last_error()).find(k.needle) != std::string::npos);
  }
  cs_config* c = nullptr;
  CHECK(cs_config_from_json(nullptr, &c) == CS_ERR_INVALID_ARGUMENT);
  CHECK(cs_config_from_file("/nonexistent/cfg.json", &c) != CS_OK);
}

TEST_CASE("resolved config survives a JSON round trip") {
  cs_config* a = parse(kHardcore2x2);
  const std::string once = to_json(a);
  cs_config* b = parse(once.c_str());
  CHECK(to_json(b) == once);
  CHECK(std::string(cs_config_name(b)) == "hc22");

  // a short buffer is truncated, not overrun
  char small[8];
  size_t needed = 0;
  CHECK(cs_config_to_json(a, small, sizeof small, &needed) == CS_OK);
  CHECK(needed == once.size() + 1);
  CHECK(std::string(small) == once.substr(0, 7));
  cs_config_free(a);
  cs_config_free(b);
}

TEST_CASE("2x2 hard-core run at full M matches the null-space steady state") {
  using namespace cornerspace;
  cs_config* c = parse(kHardcore2x2);
  cs_result* r = nullptr;
  REQUIRE(cs_run(c, 0, &r) == CS_OK);
  CHECK(cs_result_exit_code(r) == 0);
  REQUIRE(cs_result_row_count(r) == 3);  // mean field, 2x1, 2x2

  cs_row mf, root;
  REQUIRE(cs_result_row(r, 0, &mf) == CS_OK);
  CHECK(std::string(mf.solver) == "meanfield");
  REQUIRE(cs_result_row(r, cs_result_row_count(r) - 1, &root) == CS_OK);
  CHECK(root.lx == 2);
  CHECK(root.ly == 2);
  CHECK(root.m == 16);
  CHECK(std::string(root.solver) == "direct");

  ModelParams p;
  p.hardcore = true;
  p.n_max = 1;
  const Geometry g = build_geometry(2, 2, true, true);
  std::vector<std::pair<int, int>> pairs;
  for (const auto& b : g.bonds) pairs.push_back({b.j, b.l});
  Cluster fock = build_base_cluster(g, p, pairs);
  fock.rho = steady_state_nullspace(assemble_hamiltonian(fock.ops, g, p), jump_operators(fock.ops, p));
  fock.eig = diagonalize_rho(*fock.rho);
  const ObservableRecord ref = observe(fock);
  CHECK(std::abs(root.n - ref.n) < 1e-6);
  CHECK(std::abs(root.re_b - ref.re_b) < 1e-6);
  REQUIRE(root.has_g2_nn);
  CHECK(std::abs(root.g2_nn - *ref.g2_nn) < 1e-6);

  cs_meanfield_result m;
  cs_model model;
  cs_model_defaults(&model);
  model.hardcore = 1;
  model.n_max = 1;
  REQUIRE(cs_meanfield(&model, &m) == CS_OK);
  CHECK(m.converged);
  CHECK(m.n == doctest::Approx(mf.n).epsilon(1e-9));

  CHECK(cs_result_spectrum_size(r) == 16);
  double p0 = 0.0, p1 = 0.0;
  int rank = -1;
  REQUIRE(cs_result_spectrum(r, 0, &rank, &p0, nullptr) == CS_OK);
  REQUIRE(cs_result_spectrum(r, 1, nullptr, &p1, nullptr) == CS_OK);
  CHECK(p0 >= p1);
  CHECK(cs_result_spectrum(r, 16, &rank, &p0, nullptr) == CS_ERR_INVALID_ARGUMENT);
  CHECK(cs_result_row(r, 99, &root) == CS_ERR_INVALID_ARGUMENT);
  cs_result_free(r);
  cs_config_free(c);
}

TEST_CASE("reruns write byte-identical files") {
  namespace fs = std::filesystem;
  const fs::path base = fs::temp_directory_path() / "cornerspace_capi_rerun";
  fs::remove_all(base);
  const char* json = R"({
    "model": {"hardcore": true, "j": 1, "f": 2, "delta_omega": 5},
    "lattice": {"lx": 2, "ly": 2}, "base": {"lx": 2, "ly": 1},
    "strategy": "schedule", "m_schedule": [8], "solver": {"direct_cap": 4},
    "trajectories": {"n_trajectories": 8, "t_relax": 2, "t_sample": 4, "batch": 3}
  })";
  std::string first[3];
  for (int pass = 0; pass < 2; ++pass) {
    cs_config* c = parse(json);
    const fs::path dir = base / std::to_string(pass);
    REQUIRE(cs_config_set_output_dir(c, dir.c_str()) == CS_OK);
    cs_result* r = nullptr;
    REQUIRE(cs_run(c, 1, &r) == CS_OK);
    cs_row root;
    REQUIRE(cs_result_row(r, cs_result_row_count(r) - 1, &root) == CS_OK);
    CHECK(std::string(root.solver) == "mcwf");
    CHECK(root.has_errors);
    const std::string files[3] = {"results.csv", "spectrum.csv", "timeseries.csv"};
    for (int k = 0; k < 3; ++k) {
      const std::string disk = slurp(dir / files[k]);
      CHECK(disk == cs_result_csv(r, static_cast<cs_table>(k)));
      if (pass == 0) first[k] = disk;
      else CHECK(disk == first[k]);
    }
    CHECK(fs::exists(dir / "manifest.json"));
    cs_result_free(r);
    cs_config_free(c);
  }
  fs::remove_all(base);
}

TEST_CASE("preset catalog") {
  std::vector<std::string> names;
  for (size_t k = 0; k < cs_preset_count(); ++k) {
    const char* name = nullptr;
    REQUIRE(cs_preset_info(k, &name, nullptr, nullptr) == CS_OK);
    names.push_back(name);
  }
  for (const char* want : {"table1", "table2", "table3", "fig2", "fig3"})
    CHECK(std::find(names.begin(), names.end(), want) != names.end());
  CHECK(cs_preset_info(names.size(), nullptr, nullptr, nullptr) == CS_ERR_INVALID_ARGUMENT);

  cs_config** rows = nullptr;
  size_t count = 0;
  CHECK(cs_preset_load("nope", 0, 0, 0, &rows, &count) == CS_ERR_CONFIG);

  REQUIRE(cs_preset_load("table3", 0, 0, 0, &rows, &count) == CS_OK);
  CHECK(count == 10);
  bool found = false;
  for (size_t k = 0; k < count; ++k) {
    const auto js = nlohmann::json::parse(to_json(rows[k]));
    if (js["lattice"]["lx"] == 16 && js["lattice"]["ly"] == 16) {
      found = true;
      CHECK(js["model"]["u"] == 0.5);
      CHECK(js["m_schedule"] == nlohmann::json::array({400}));
    }
  }
  CHECK(found);
  cs_config_array_free(rows, count);

  REQUIRE(cs_preset_load("table1", 1, 7, 300, &rows, &count) == CS_OK);
  REQUIRE(count == 1);
  const auto t1 = nlohmann::json::parse(to_json(rows[0]));
  CHECK(t1["trajectories"]["seed"] == 7);
  CHECK(t1["m_schedule"] == nlohmann::json::array({20, 50, 100, 200}));
  cs_config_array_free(rows, count);

  REQUIRE(cs_preset_load("fig2", 0, 0, 0, &rows, &count) == CS_OK);
  CHECK(count == 3);
  for (size_t k = 0; k < count; ++k) {
    const auto js = nlohmann::json::parse(to_json(rows[k]));
    CHECK(js["model"]["u"] == 20.0);
    CHECK(js["model"]["j"] == 3.0);
    CHECK(js["solver"]["record_stride"] == 0.1);
  }
  cs_config_array_free(rows, count);
}

TEST_CASE("top pair selection through the C interface") {
  const double pa[] = {0.6, 0.3, 0.1};
  const double pb[] = {0.5, 0.5};
  int ra[4], rb[4];
  double p[4];
  REQUIRE(cs_select_top_pairs(pa, 3, pb, 2, 4, ra, rb, p) == CS_OK);
  CHECK(ra[0] == 0);
  CHECK(rb[0] == 0);
  CHECK(ra[1] == 0);
  CHECK(rb[1] == 1);
  CHECK(ra[2] == 1);
  CHECK(rb[2] == 0);
  CHECK(p[3] == doctest::Approx(0.15));
  CHECK(cs_select_top_pairs(pa, 3, pb, 2, 7, ra, rb, p) != CS_OK);
}
