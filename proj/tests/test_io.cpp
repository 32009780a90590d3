#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "graphflow/error.hpp"
#include "graphflow/io.hpp"
#include "oracles.hpp"

using namespace graphflow;
using doctest::Approx;
using nlohmann::json;

namespace {

std::string read_config(const std::string& name) {
  std::ifstream in(std::string(GRAPHFLOW_CONFIG_DIR) + "/" + name);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidArgument;
}

const char* kTwoPoint = R"({
  "graph": {"points": [0, 1], "weights": [1, 1]},
  "kernels": {"K11": {"preset": "distance"}},
  "initial": {"rho1": [0.75, 0.25], "rho2": [0.5, 0.5]}
})";

}  // namespace

TEST_CASE("scenario files parse and derive q from p") {
  const RunConfig c = parse_config(read_config("s1.json"));
  CHECK(c.p == 2.0);
  const System s = build_system(c);
  CHECK(s.exponents.q() == 2.0);
  CHECK(s.graph.num_vertices() == 2);
  CHECK(energy(initial_state(c, s.graph), s.kernels, s.graph) == Approx(0.1875));
}

TEST_CASE("config round trip") {
  for (const char* name : {"s1.json", "s2.json", "rgg16.json", "refine.json"}) {
    INFO(name);
    const RunConfig c = parse_config(read_config(name));
    const std::string emitted = emit_config(c);
    CHECK(parse_config(emitted) == c);
    CHECK(emit_config(parse_config(emitted)) == emitted);
  }
}

TEST_CASE("q is never read") {
  json j = json::parse(kTwoPoint);
  j["p"] = 3.0;
  j["q"] = 17.0;
  const RunConfig c = parse_config(j.dump());
  CHECK(build_system(c).exponents.q() == Approx(1.5));
}

TEST_CASE("semantic and schema errors") {
  json bad_beta = json::parse(kTwoPoint);
  bad_beta["kernels"]["beta"] = {1.0, -1.0};
  CHECK(code_of([&] { parse_config(bad_beta.dump()); }) == ErrorCode::kSemanticError);

  json bad_p = json::parse(kTwoPoint);
  bad_p["p"] = 1.0;
  CHECK(code_of([&] { parse_config(bad_p.dump()); }) == ErrorCode::kSemanticError);

  json unknown = json::parse(kTwoPoint);
  unknown["bogus"] = 1;
  try {
    parse_config(unknown.dump());
    FAIL("expected SchemaError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kSchemaError);
    CHECK(std::string(e.what()).find("$.bogus") != std::string::npos);
  }

  json cross = json::parse(kTwoPoint);
  cross["kernels"]["K12"] = {{"preset", "distance"}};
  cross["kernels"]["K21"] = {{"preset", "quadratic"}};
  cross["graph"]["points"] = {0.0, 1.0, 3.0};
  cross["graph"]["weights"] = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  cross["initial"] = json::object();
  CHECK(code_of([&] { parse_config(cross.dump()); }) == ErrorCode::kSemanticError);

  CHECK(code_of([] { parse_config("{not json"); }) == ErrorCode::kSchemaError);

  json bad_mass = json::parse(kTwoPoint);
  bad_mass["initial"]["rho1"] = {1.0, 1.0};
  CHECK(code_of([&] { parse_config(bad_mass.dump()); }) == ErrorCode::kMassMismatch);
}

TEST_CASE("generated graphs are reproducible from the seed") {
  const RunConfig c = parse_config(read_config("rgg16.json"));
  const FiniteGraph a = build_graph(c);
  const FiniteGraph b = build_graph(c);
  REQUIRE(a.num_vertices() == 16);
  CHECK(a.dimension() == 2);
  CHECK(a.base().points == b.base().points);
  RunConfig other = c;
  other.seed = 8;
  CHECK(build_graph(other).base().points != a.base().points);
}

TEST_CASE("projection of atoms already on the vertices is the identity") {
  const FiniteGraph g = build_graph({{0.0}, {1.0}, {2.0}}, {0.2, 0.3, 0.5}, eta_presets::constant());
  AtomicSample sample;
  sample.points = {{0.0}, {1.0}, {2.0}};
  sample.base_mass = {0.2, 0.3, 0.5};
  sample.density = {std::vector<double>{2.0, 1.0, 0.6}, std::vector<double>{1.0, 1.0, 1.0}};
  for (ProjectionMode mode : {ProjectionMode::kTransportPlan, ProjectionMode::kNearestVertex}) {
    const Projection p = project_initial(sample, g, mode);
    CHECK(p.mode == mode);
    CHECK(p.state[0][0] == Approx(2.0));
    CHECK(p.state[0][1] == Approx(1.0));
    CHECK(p.state[0][2] == Approx(0.6));
    CHECK(p.state[1][2] == Approx(1.0));
    CHECK(std::abs(p.mass_drift[0]) < 1e-12);
  }
}

TEST_CASE("nearest-vertex projection of an off-vertex atom") {
  const FiniteGraph g = build_graph({{0.0}, {1.0}}, {0.5, 0.5}, eta_presets::constant());
  AtomicSample sample;
  sample.points = {{0.3}};
  sample.base_mass = {1.0};
  sample.density = {std::vector<double>{1.0}, std::vector<double>{1.0}};
  const Projection p = project_initial(sample, g, ProjectionMode::kNearestVertex);
  CHECK(p.state[0][0] == Approx(2.0));
  CHECK(p.state[0][1] == 0.0);

  sample.points = {{0.5}};
  const Projection tie = project_initial(sample, g, ProjectionMode::kNearestVertex);
  CHECK(tie.state[0][0] == Approx(2.0));
}

TEST_CASE("uniform sample onto a uniform grid via the transport plan") {
  std::vector<Point> vertices;
  for (int k = 0; k < 10; ++k) vertices.push_back({(k + 0.5) / 10.0});
  const FiniteGraph g = build_graph(vertices, std::vector<double>(10, 0.1), eta_presets::constant());

  AtomicSample sample;
  for (int a = 0; a < 100; ++a) {
    const double y = (a + 0.5) / 100.0;
    sample.points.push_back({y});
    sample.base_mass.push_back(0.01);
    sample.density[0].push_back(1.0);
    sample.density[1].push_back(2.0 * y);
  }
  const Projection p = project_initial(sample, g);
  CHECK(p.mode == ProjectionMode::kTransportPlan);
  for (int k = 0; k < 10; ++k) {
    // Every atom lies closest to its own cell centre, so the optimal plan is
    // the cell assignment: mass 0.1 per vertex, and 2 x_k for the linear density.
    CHECK(p.state[0][k] * 0.1 == Approx(0.1));
    CHECK(p.state[1][k] == Approx(2.0 * vertices[k][0]));
  }
}

TEST_CASE("projection checks the input mass") {
  const FiniteGraph g = oracle::two_point_graph();
  AtomicSample sample;
  sample.points = {{0.0}, {1.0}};
  sample.base_mass = {0.5, 0.5};
  sample.density = {std::vector<double>{1.0, 1.1}, std::vector<double>{1.0, 1.0}};
  CHECK(code_of([&] { project_initial(sample, g); }) == ErrorCode::kMassMismatch);
}

TEST_CASE("state and trajectory serialization") {
  const RunConfig c = parse_config(read_config("s1.json"));
  const System s = build_system(c);
  const SpeciesPairState rho = oracle::s1_state();
  const SpeciesPairState back = parse_state(emit_state(rho), s.graph);
  CHECK(back[0] == rho[0]);
  CHECK(back[1] == rho[1]);
  const SpeciesPairState defaulted = parse_state(R"({"rho1": [1, 0]})", s.graph);
  CHECK(defaulted[1][0] == Approx(0.5));  // uniform with unit mass

  const Trajectory traj = integrate(initial_state(c, s.graph), 1.0, s, c.integrator);
  const Trajectory reread = parse_trajectory(trajectory_json(traj, s.graph), s);
  REQUIRE(reread.size() == traj.size());
  CHECK(reread.states.back()[0][0] == traj.states.back()[0][0]);
  CHECK(de_giorgi(reread, s).g_t == Approx(de_giorgi(traj, s).g_t).epsilon(1e-12));

  const std::string csv = trajectory_csv(traj);
  CHECK(csv.rfind("t,species,vertex,density\n", 0) == 0);
  const Trajectory from_csv = parse_trajectory_csv(csv, s);
  REQUIRE(from_csv.size() == traj.size());
  CHECK(from_csv.states.back()[0][1] == Approx(traj.states.back()[0][1]).epsilon(1e-15));

  const json summary = json::parse(run_summary_json(c, traj, s));
  CHECK(summary["version"] == version());
  CHECK(parse_config(summary["config"].dump()) == c);
}

TEST_CASE("validation report") {
  const json ok = json::parse(validation_json(parse_config(read_config("s1.json"))));
  CHECK(ok["ok"] == true);
  json j = json::parse(kTwoPoint);
  j["mobility"] = {{"expression", "r^2"}};
  const json bad = json::parse(validation_json(parse_config(j.dump())));
  CHECK(bad["ok"] == false);
}

TEST_CASE("quantile points of the sampling densities") {
  const std::vector<double> g = quantile_points({DensityFamily::kGaussian, 0.0, 1.0}, 4);
  REQUIRE(g.size() == 4);
  CHECK(g[0] == Approx(-g[3]));
  CHECK(g[1] == Approx(-0.31863936396437514).epsilon(1e-9));  // Phi^{-1}(0.375)
  const std::vector<double> u = quantile_points({DensityFamily::kUniform, 2.0, 1.0}, 4);
  CHECK(u[0] == Approx(2.125));
  CHECK(u[3] == Approx(2.875));
}

TEST_CASE("refinement plans") {
  const RefinementPlan plan = parse_plan(read_config("refine_plan.json"));
  CHECK(plan.ladder == std::vector<std::size_t>{8, 16, 32, 64});
  CHECK(code_of([] { parse_plan(R"({"ladder": [8, 8]})"); }) == ErrorCode::kSemanticError);
  CHECK(code_of([] { parse_plan(R"({"ladder": []})"); }) == ErrorCode::kSemanticError);
  CHECK(code_of([] { parse_plan(R"({"ladder": [4], "shape": 1})"); }) == ErrorCode::kSchemaError);
}

TEST_CASE("single-level study has no gaps") {
  const RunConfig c = parse_config(read_config("refine.json"));
  const RefinementPlan plan = parse_plan(R"({"ladder": [8], "horizon": 0.1})");
  const StudyReport r = run_refinement_study(plan, c);
  REQUIRE(r.levels.size() == 1);
  CHECK(r.levels[0].ok);
  CHECK(r.gaps.empty());
  CHECK_FALSE(r.gaps_decreasing());
}

TEST_CASE("failed levels are marked and the study continues") {
  RunConfig c = parse_config(read_config("refine.json"));
  c.integrator.max_steps = 3;
  const RefinementPlan plan = parse_plan(R"({"ladder": [4, 8], "horizon": 0.5})");
  const StudyReport r = run_refinement_study(plan, c);
  REQUIRE(r.levels.size() == 2);
  for (const LevelReport& level : r.levels) {
    CHECK_FALSE(level.ok);
    CHECK(level.error_code == "StepSizeUnderflow");
  }
  REQUIRE(r.gaps.size() == 1);
  CHECK(std::isnan(r.gaps[0]));
  const json j = json::parse(study_json(r, plan, c));
  CHECK(j["levels"][0]["ok"] == false);
}
