#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "spinqfi/csv.hpp"
#include "spinqfi/harness.hpp"

using namespace spinqfi;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("spinqfi_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("shortest round-trip number formatting") {
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(-0.0) == "0");
    CHECK(format_number(1.0) == "1");
    CHECK(format_number(1e-20) == "1e-20");
    for (double v : {0.1 + 0.2, 1.0 / 3.0, 2.718281828459045, 6.02214076e23})
      CHECK(std::stod(format_number(v)) == v);
    CHECK_THROWS(format_number(std::nan("")));
  }

  TEST_CASE("csv table enforces row width") {
    CsvTable t;
    t.header = {"a", "b"};
    t.add({1.5, std::int64_t{2}});
    CHECK_THROWS(t.add({1.0}));
    CHECK(t.render() == "a,b\n1.5,2\n");
  }

  TEST_CASE("config parsing: defaults, nesting, errors") {
    const RunConfig c = parse_config(R"({"chain": {"N": 8, "h": [0, 0.1]}, "time": {"stop": 2, "count": 5}})",
                                     Experiment::qfi_map);
    CHECK(c.sites == 8);
    CHECK(c.fields == std::vector<double>{0, 0.1});
    CHECK(c.time.points() == std::vector<double>{0, 0.5, 1.0, 1.5, 2.0});
    CHECK(c.outputs == std::vector<int>{8});

    const RunConfig d = parse_config(R"({"experiment": "depletion"})");
    CHECK(d.fields.size() == 8);
    CHECK(d.fields.front() == 0.045);
    CHECK(d.fields.back() == 0.22);
    CHECK(parse_config("{}", Experiment::otoc_map).fields == std::vector<double>{0, 0.05, 0.1, 0.2, 0.5});

    CHECK_THROWS_AS(parse_config(R"({"chain": {"N": 8, "hh": 1}})", Experiment::qfi_map), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"colour": 1})", Experiment::qfi_map), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"time": {"count": 0}})", Experiment::qfi_map), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"time": {"start": 2, "stop": 1}})", Experiment::qfi_map), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"chain": {"h": []}})", Experiment::qfi_map), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"chain": {"N": 99}})", Experiment::qfi_map), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"chain": {"N": "ten"}})", Experiment::qfi_map), ConfigError);
    CHECK_THROWS_AS(parse_config("{not json", Experiment::qfi_map), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"experiment": "otoc_map"})", Experiment::qfi_map), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"chain": {"h": [0.1]}})", Experiment::analytic_check), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"block": {"w": 5, "k": 3}})", Experiment::decode_map), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"block": {"w": [2, 4]}})", Experiment::hierarchy_series), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"time": {"count": 11}})", Experiment::rate_fit), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"optimizer": {"learning_rate": -1}})", Experiment::decode_map), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"seed": -3})", Experiment::decode_map), ConfigError);
  }

  TEST_CASE("config echo round-trips") {
    const RunConfig c = parse_config(
        R"({"chain": {"N": 6, "h": [0.2]}, "block": {"w": 3, "k": 5}, "seed": 18446744073709551615, "optimizer": {"steps": 7}})",
        Experiment::decode_map);
    const RunConfig back = parse_config(config_json(c));
    CHECK(config_json(back) == config_json(c));
    CHECK(back.seed == 18446744073709551615ULL);
    CHECK(back.optimizer.steps == 7);
  }

  TEST_CASE("grid product counts") {
    RunConfig c = parse_config(R"({"chain": {"h": [0, 0.05, 0.1, 0.2, 0.5]}})", Experiment::qfi_map);
    CHECK(grid_product(c).size() == 305);
    RunConfig d = parse_config(R"({"chain": {"h": [0, 0.05, 0.1, 0.2, 0.5]}, "block": {"w": [2, 4]}})",
                               Experiment::decode_map);
    const auto units = grid_product(d);
    CHECK(units.size() == 5 * 61 * 2);
    CHECK(units[1].width == 4);
    CHECK(units[0].seed != units[1].seed);
    CHECK(grid_product(parse_config("{}", Experiment::rate_fit)).size() == 9);
    c.fields.clear();
    CHECK_THROWS_AS(grid_product(c), ConfigError);
    c.fields.assign(20000, 0.0);
    CHECK_THROWS_AS(grid_product(c), ConfigError);
  }

  TEST_CASE("analytic check run: files, schema, tolerance") {
    RunConfig c = parse_config(R"({"chain": {"N": 8}, "time": {"count": 13}})", Experiment::analytic_check);
    c.output = scratch("analytic");
    const RunResult r = run(c);
    CHECK(r.exit_code == 0);
    const std::string text = slurp(c.output / "analytic_check.csv");
    std::istringstream lines(text);
    std::string line;
    std::getline(lines, line);
    CHECK(line == "tJ,max_abs_error");
    int rows = 0;
    while (std::getline(lines, line)) {
      ++rows;
      CHECK(std::stod(line.substr(line.find(',') + 1)) < 1e-9);
    }
    CHECK(rows == 13);
    CHECK(fs::exists(c.output / "manifest.json"));
    CHECK(slurp(c.output / "records.csv").starts_with(
        "experiment,N,J,h,s,tJ,site,block,quantity,value,seed,engine_version\n"));
  }

  TEST_CASE("identical config and seed give byte-identical CSVs") {
    const std::string doc =
        R"({"chain": {"N": 6, "h": [0.0, 0.3]}, "time": {"stop": 2, "count": 3}, "block": {"w": [2, 3]},
            "optimizer": {"steps": 15, "restarts": 1}})";
    RunConfig a = parse_config(doc, Experiment::decode_map), b = a;
    a.output = scratch("det_a");
    b.output = scratch("det_b");
    b.workers = 3;
    REQUIRE(run(a).exit_code == 0);
    REQUIRE(run(b).exit_code == 0);
    for (const char* f : {"decode_map_h0_k6.csv", "decode_map_h0.3_k6.csv", "records.csv"})
      CHECK(slurp(a.output / f) == slurp(b.output / f));
    const std::string header = slurp(a.output / "decode_map_h0_k6.csv").substr(0, 35);
    CHECK(header.starts_with("tJ,w,F_dec,F_block,restart_best_id\n"));
  }

  TEST_CASE("a failing unit does not take its siblings down") {
    RunConfig c = parse_config(R"({"chain": {"N": 6, "h": [0.1]}, "time": {"stop": 1, "count": 5}})", Experiment::qfi_map);
    c.output = scratch("crash");
    c.workers = 2;
    const RunResult r = run(c, [](const WorkUnit& u) {
      if (u.time_index == 2) throw NumericalError("injected");
    });
    CHECK(r.exit_code == 2);
    REQUIRE(r.failures.size() == 1);
    CHECK(r.failures[0].unit.time_index == 2);
    CHECK(r.failures[0].message == "injected");
    const std::string text = slurp(c.output / "qfi_map_h0.1.csv");
    CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 4 * 6);
    CHECK(text.find("\n0.5,") == std::string::npos);
    CHECK(slurp(c.output / "manifest.json").find("injected") != std::string::npos);
  }

  TEST_CASE("map schemas") {
    RunConfig q = parse_config(R"({"chain": {"N": 5, "h": [0.1]}, "time": {"stop": 1, "count": 2}})", Experiment::otoc_map);
    q.output = scratch("otoc");
    REQUIRE(run(q).exit_code == 0);
    const std::string otoc = slurp(q.output / "otoc_map_h0.1.csv");
    REQUIRE(otoc.starts_with("tJ,j,C_x,C_y,C_z,C_sum\n0,1,"));
    std::istringstream row(otoc.substr(otoc.find('\n') + 5));
    std::vector<double> c(4);
    char comma;
    row >> c[0] >> comma >> c[1] >> comma >> c[2] >> comma >> c[3];
    CHECK(c[0] == doctest::Approx(4.0));
    CHECK(std::abs(c[1]) < 1e-20);
    CHECK(c[2] == doctest::Approx(4.0));
    CHECK(c[3] == doctest::Approx(8.0));

    RunConfig h = parse_config(R"({"chain": {"N": 6, "h": [0.2]}, "time": {"stop": 1, "count": 3},
                                   "block": {"w": 3, "k": 6}, "optimizer": {"steps": 10}})",
                               Experiment::hierarchy_series);
    h.output = scratch("hier");
    REQUIRE(run(h).exit_code == 0);
    CHECK(slurp(h.output / "hierarchy_series_h0.2.csv").starts_with("tJ,F_k,F_dec,F_block,C_y\n"));
  }

  TEST_CASE("depletion and rate fit outputs") {
    RunConfig d = parse_config(R"({"chain": {"N": 8, "h": [0.1, 0.2, 0.3]}, "time": {"stop": 1.5, "count": 31}})",
                               Experiment::rate_fit);
    d.output = scratch("rate");
    REQUIRE(run(d).exit_code == 0);
    const std::string text = slurp(d.output / "rate_fit.csv");
    CHECK(text.starts_with("h,gamma_star,window_lo,window_hi,slope_global\n0.1,"));
    CHECK(std::count(text.begin(), text.end(), '\n') == 4);

    d.experiment = Experiment::depletion;
    d.output = scratch("depl");
    REQUIRE(run(d).exit_code == 0);
    const std::string dep = slurp(d.output / "depletion.csv");
    CHECK(dep.starts_with("tJ,h,eta\n0,0.1,0\n"));
    CHECK(slurp(d.output / "manifest.json").find("\"collapse\"") != std::string::npos);
  }
}
