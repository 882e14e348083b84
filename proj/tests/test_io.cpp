#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "dfnid/cli.hpp"
#include "dfnid/csv.hpp"
#include "dfnid/io.hpp"

using namespace dfnid;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("dfnid-test-" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

}  // namespace

TEST_CASE("csv splitting handles quotes and escapes") {
  CHECK(csv_split("a,b,c") == std::vector<std::string>{"a", "b", "c"});
  CHECK(csv_split("\"a,b\",c") == std::vector<std::string>{"a,b", "c"});
  CHECK(csv_split("\"he said \"\"hi\"\"\",x") ==
        std::vector<std::string>{"he said \"hi\"", "x"});
  CHECK(csv_split("") == std::vector<std::string>{""});
  CHECK(csv_escape("plain") == "plain");
  CHECK(csv_escape("a,b") == "\"a,b\"");
  CHECK(csv_split(csv_escape("q\"uote") + ",z") ==
        std::vector<std::string>{"q\"uote", "z"});
}

TEST_CASE("doubles round trip through the shortest representation") {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(-1e10, 1e10);
  for (int i = 0; i < 2000; ++i) {
    const double v = u(gen) * std::pow(10.0, int(u(gen)) % 20);
    CHECK(std::stod(fmt_g(v)) == v);
  }
  CHECK(std::stod(fmt_g(1.018e-13)) == 1.018e-13);
}

TEST_CASE("c-rate tags canonicalize") {
  double v = 0;
  CHECK(canonical_c_rate_tag("C/5", &v) == "C/5");
  CHECK(v == doctest::Approx(0.2));
  CHECK(canonical_c_rate_tag("0.2", &v) == "C/5");
  CHECK(canonical_c_rate_tag("1C", &v) == "1C");
  CHECK(canonical_c_rate_tag("2c", &v) == "2C");
  CHECK(canonical_c_rate_tag("0.5C", &v) == fmt_g(0.5));
  CHECK(v == doctest::Approx(0.5));
  CHECK_THROWS(canonical_c_rate_tag("-1", &v));
}

TEST_CASE("discharge csv parses a minimal file") {
  TempDir dir;
  write_text_file(dir.file("d.csv"),
                  "cell_id,cycle,c_rate,soh,t_s,current_A,voltage_V\n"
                  "cellA,3,1C,0.97,0,4.85,4.05\n"
                  "cellA,3,1C,0.97,1,4.85,4.04\n");
  const auto parsed = parse_discharge_csv(dir.file("d.csv"));
  CHECK(parsed.rejected.empty());
  REQUIRE(parsed.curves.size() == 1);
  const auto& c = parsed.curves.front();
  CHECK(c.cell_id == "cellA");
  CHECK(c.cycle == 3);
  CHECK(c.c_rate == doctest::Approx(1.0));
  CHECK(c.soh == doctest::Approx(0.97));
  CHECK(c.t_s == std::vector<double>{0.0, 1.0});
}

TEST_CASE("shuffled rows produce identical curves") {
  TempDir dir;
  const std::string header = "cell_id,cycle,c_rate,soh,t_s,current_A,voltage_V\n";
  std::vector<std::string> rows;
  for (int cyc : {1, 2})
    for (int t = 0; t < 20; ++t)
      rows.push_back("x," + std::to_string(cyc) + ",C/5,0.9," +
                     std::to_string(t) + ",1.0," +
                     std::to_string(3.9 - 0.01 * t) + "\n");
  std::string ordered = header, shuffled = header;
  for (const auto& r : rows) ordered += r;
  std::mt19937_64 gen(7);
  std::shuffle(rows.begin(), rows.end(), gen);
  for (const auto& r : rows) shuffled += r;
  write_text_file(dir.file("a.csv"), ordered);
  write_text_file(dir.file("b.csv"), shuffled);
  const auto pa = parse_discharge_csv(dir.file("a.csv"));
  const auto pb = parse_discharge_csv(dir.file("b.csv"));
  REQUIRE(pa.curves.size() == pb.curves.size());
  for (std::size_t i = 0; i < pa.curves.size(); ++i) {
    CHECK(pa.curves[i].cycle == pb.curves[i].cycle);
    CHECK(pa.curves[i].t_s == pb.curves[i].t_s);
    CHECK(pa.curves[i].voltage_v == pb.curves[i].voltage_v);
  }
}

TEST_CASE("rows outside the sanity window are rejected with line numbers") {
  TempDir dir;
  write_text_file(dir.file("d.csv"),
                  "cell_id,cycle,c_rate,soh,t_s,current_A,voltage_V\n"
                  "a,1,1C,0.9,0,1.0,3.9\n"
                  "a,1,1C,0.9,1,1.0,9.9\n"
                  "a,1,1C,0.9,2,1.0,3.8\n"
                  "a,1,1C,0.9,2,1.0,3.7\n"
                  "a,1,1C,0.9,3,-1.0,3.7\n");
  const auto parsed = parse_discharge_csv(dir.file("d.csv"));
  REQUIRE(parsed.rejected.size() == 3);
  CHECK(parsed.rejected[0].line == 3);
  CHECK(parsed.rejected[0].message.find("sanity window") != std::string::npos);
  // Duplicate timestamp and negative current also rejected.
  bool saw_monotone = false, saw_current = false;
  for (const auto& r : parsed.rejected) {
    if (r.message.find("non-monotone") != std::string::npos) saw_monotone = true;
    if (r.message.find("discharge convention") != std::string::npos)
      saw_current = true;
  }
  CHECK(saw_monotone);
  CHECK(saw_current);
  CHECK(parsed.curves.front().t_s.size() == 2);
}

TEST_CASE("missing columns and empty files are hard errors") {
  TempDir dir;
  write_text_file(dir.file("bad.csv"), "cell_id,cycle\na,1\n");
  CHECK_THROWS(parse_discharge_csv(dir.file("bad.csv")));
  write_text_file(dir.file("empty.csv"), "");
  CHECK_THROWS(parse_discharge_csv(dir.file("empty.csv")));
}

TEST_CASE("discharge csv round trips losslessly") {
  TempDir dir;
  DischargeCurve c;
  c.cell_id = "cell-7";
  c.cycle = 42;
  c.c_rate_tag = "2C";
  c.c_rate = 2.0;
  c.soh = 0.71234567;
  for (int i = 0; i < 50; ++i) {
    c.t_s.push_back(i * 0.5);
    c.current_a.push_back(9.7);
    c.voltage_v.push_back(4.0 - 1e-3 * i + 1e-11 * i * i);
  }
  write_discharge_csv(dir.file("rt.csv"), {c}, json::object());
  const auto parsed = parse_discharge_csv(dir.file("rt.csv"));
  REQUIRE(parsed.curves.size() == 1);
  CHECK(parsed.curves[0].t_s == c.t_s);
  CHECK(parsed.curves[0].voltage_v == c.voltage_v);
  CHECK(parsed.curves[0].soh == c.soh);

  // Re-serialization is byte-identical.
  write_discharge_csv(dir.file("rt2.csv"), parsed.curves, json::object());
  CHECK(read_text_file(dir.file("rt.csv")) == read_text_file(dir.file("rt2.csv")));
}

TEST_CASE("materials documents fall back to defaults and round trip") {
  TempDir dir;
  write_json_doc(dir.file("cell.json"),
                 json{{"anode", {{"porosity", 0.16}}},
                      {"plate_area_m2", 0.05}});
  const Materials mat = load_materials(dir.file("cell.json"));
  CHECK(mat.params.anode.porosity == 0.16);
  CHECK(mat.params.plate_area == 0.05);
  // Everything else at tabulated defaults.
  CHECK(mat.params.cathode.c_s_max == 54422.0);
  CHECK(mat.params.theta.d_s_n == doctest::Approx(1.018e-13));

  const json doc = materials_to_json(mat);
  const Materials back = materials_from_json(doc);
  CHECK(back.params.anode.porosity == 0.16);
  CHECK(back.params.theta.k_p == mat.params.theta.k_p);
}

TEST_CASE("chain files round trip") {
  TempDir dir;
  PosteriorChain chain;
  chain.space = ParameterSpace::defaults();
  chain.space.fixed[2] = true;
  chain.space.prior[0] = GaussianPrior{-15.2, 1.0};
  chain.param_names = chain.space.free_names();
  chain.param_indices = chain.space.free_indices();
  chain.burn_in = 17;
  chain.seed = 99;
  chain.acceptance_rate = 0.31;
  chain.init = {-13.0, -13.0, -11.0};
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-13.5, -12.5);
  for (int i = 0; i < 500; ++i) {
    chain.samples.push_back({u(gen), u(gen), u(gen) + 1.0});
    chain.objective.push_back(u(gen));
    chain.chi2.push_back(-2.0 * chain.objective.back());
    chain.accepted.push_back(i % 3 == 0);
  }
  ChainMeta meta{"cellZ", 120, "C/5", 0.2, 0.83, 0.01};
  write_chain_csv(dir.file("chain.csv"), chain, meta, json{{"x", 1}});
  const auto [back, meta2] = read_chain_csv(dir.file("chain.csv"));
  CHECK(meta2.cell_id == "cellZ");
  CHECK(meta2.cycle == 120);
  CHECK(meta2.c_rate_tag == "C/5");
  CHECK(meta2.soh == 0.83);
  CHECK(back.samples.size() == chain.samples.size());
  CHECK(back.samples[7] == chain.samples[7]);
  CHECK(back.objective[7] == chain.objective[7]);
  CHECK(back.accepted[3] == chain.accepted[3]);
  CHECK(back.space.fixed[2]);
  REQUIRE(back.space.prior[0].has_value());
  CHECK(back.space.prior[0]->mean_log10 == -15.2);
  // Verdicts from the restored chain need no other state.
  const auto v = verdict_for(back, 0);
  CHECK(v.param_name == "D_s_p");
}

TEST_CASE("pipeline smoke: synth, mcmc, classify emit their artifacts") {
  TempDir dir;
  RunConfig synth;
  synth.command = "synth";
  synth.out_dir = dir.file("synth");
  synth.seed = 5;
  synth.soh_grid = {0.9};
  synth.c_rate_filter = "1C";
  synth.noise_v = 0.005;
  REQUIRE(run_command(synth) == 0);
  REQUIRE(fs::exists(dir.file("synth") + "/synth_ladder.csv"));
  REQUIRE(fs::exists(dir.file("synth") + "/synth_ladder_summary.json"));

  RunConfig mcmc;
  mcmc.command = "mcmc";
  mcmc.out_dir = dir.file("mcmc");
  mcmc.data_paths = {dir.file("synth") + "/synth_ladder.csv"};
  mcmc.iterations = 150;
  mcmc.burn_in = 50;
  mcmc.seed = 6;
  REQUIRE(run_command(mcmc) == 0);
  const std::string chain_path = dir.file("mcmc") + "/chain_synth-5_c0_1C.csv";
  REQUIRE(fs::exists(chain_path));
  REQUIRE(fs::exists(dir.file("mcmc") + "/hist_synth-5_c0_1C_D_s_n.csv"));

  RunConfig classify;
  classify.command = "classify";
  classify.out_dir = dir.file("classify");
  classify.data_paths = {chain_path};
  REQUIRE(run_command(classify) == 0);
  const std::string verdicts = dir.file("classify") + "/verdicts.csv";
  REQUIRE(fs::exists(verdicts));
  // One row per free parameter plus header and comments.
  const auto text = read_text_file(verdicts);
  CHECK(std::count(text.begin(), text.end(), '\n') == 2 + 1 + 4);
  CHECK(text.find("c_rate,soh_pct,cycle,param,map_log10") != std::string::npos);
}

TEST_CASE("rerunning a command reproduces artifacts byte for byte") {
  TempDir dir;
  auto run_synth = [&](const std::string& out) {
    RunConfig cfg;
    cfg.command = "synth";
    cfg.out_dir = dir.file(out);
    cfg.seed = 31;
    cfg.soh_grid = {0.8, 0.6};
    cfg.c_rate_filter = "2C";
    REQUIRE(run_command(cfg) == 0);
    return read_text_file(dir.file(out) + "/synth_ladder.csv");
  };
  CHECK(run_synth("a") == run_synth("b"));

  auto run_sim = [&](const std::string& out) {
    RunConfig cfg;
    cfg.command = "simulate";
    cfg.out_dir = dir.file(out);
    cfg.sim_c_rate = 1.0;
    cfg.t_max_s = 120.0;
    REQUIRE(run_command(cfg) == 0);
    return read_text_file(dir.file(out) + "/simulate_1C.csv");
  };
  CHECK(run_sim("s1") == run_sim("s2"));
}

TEST_CASE("failures write a machine-readable error document") {
  TempDir dir;
  RunConfig cfg;
  cfg.command = "classify";
  cfg.out_dir = dir.file("err");
  cfg.data_paths = {};  // nothing to classify
  CHECK(run_command(cfg) == 1);
  const json err = read_json_doc(dir.file("err") + "/error.json");
  CHECK(err.at("command") == "classify");
  CHECK(err.at("error").get<std::string>().size() > 0);
}
