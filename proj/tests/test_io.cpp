#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "helpers.hpp"
#include "rydmis/io.hpp"

using namespace rydmis;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("rydmis_io_" + name);
}

}  // namespace

TEST(GraphJson, RoundTripsFiveHundredGraphs) {
  std::mt19937_64 rng(2);
  std::vector<UnitDiskGraph> graphs;
  for (int k = 0; k < 500; ++k) {
    graphs.push_back(testutil::random_graph(1 + k % 20, rng, 4.0 + 0.01 * k).renamed("g" + std::to_string(k)));
  }
  const auto path = temp_path("graphs.json");
  save_graphs(path, graphs);
  const auto back = load_graphs(path);
  ASSERT_EQ(back.size(), graphs.size());
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    EXPECT_EQ(back[i].sites(), graphs[i].sites());
    EXPECT_EQ(back[i].spacing_um(), graphs[i].spacing_um());
    EXPECT_EQ(back[i].name(), graphs[i].name());
    EXPECT_EQ(back[i].edges(), graphs[i].edges());
  }
  std::filesystem::remove(path);
}

TEST(GraphJson, AcceptsSingleObjectAndBareArray) {
  const auto one = graphs_from_json(graph_to_json(testutil::three_row()));
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].order(), 3u);
  const auto arr = graphs_from_json(json::array({graph_to_json(testutil::three_row()), graph_to_json(testutil::single_site())}));
  EXPECT_EQ(arr.size(), 2u);
}

TEST(GraphJson, MalformedTextReportsLineAndColumn) {
  try {
    parse_json_text("{\n  \"name\": \"x\",\n  \"sites\": [[0, 0],, ]\n}", "bad.json");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    EXPECT_EQ(msg.rfind("bad.json:3:", 0), 0u) << msg;
  }
}

TEST(GraphJson, SchemaErrorsNamePointer) {
  try {
    graphs_from_json(json::parse(R"({"graphs": [{"name": "a", "spacing_um": 5, "sites": [[0, 0], [1]]}]})"));
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("/graphs/0/sites/1"), std::string::npos) << e.what();
  }
  EXPECT_THROW(graphs_from_json(json::parse(R"({"name": "a", "sites": []})")), FormatError);
  EXPECT_THROW(graphs_from_json(json::parse("3")), FormatError);
}

TEST(GraphJson, DuplicateSitesAreDomainErrors) {
  try {
    graphs_from_json(json::parse(R"({"name": "a", "spacing_um": 5, "sites": [[0, 0], [2, 0], [0, 0]]})"));
    FAIL() << "expected DomainError";
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("indices 0 and 2"), std::string::npos) << e.what();
  }
}

TEST(GraphJson, MissingFileIsFormatError) {
  EXPECT_THROW(load_graphs(temp_path("does_not_exist.json")), FormatError);
}

TEST(ScheduleJson, ExportImportRoundTrip) {
  const PhysicalConstants pc;
  const auto g = parse_toy_graph_id("7DE");
  for (int sign : {1, -1}) {
    const auto hw = discretize_for_hardware(cd_schedule({-4.3, 43.0, 4.3}, 4.0, graph_traces(g)), 0.05, pc, sign);
    EXPECT_EQ(hardware_intervals(hw), 80u);
    const auto text = schedule_to_json(hw, pc).dump();
    const auto back = schedule_from_json(json::parse(text), pc);
    for (int k = 0; k <= 400; ++k) {
      const double t = 4.0 * k / 400.0;
      const auto a = hw(t), b = back(t);
      EXPECT_NEAR(a.omega, b.omega, 1e-9);
      EXPECT_NEAR(a.delta, b.delta, 1e-9);
      EXPECT_NEAR(a.phi, b.phi, 1e-9);
    }
  }
}

TEST(ScheduleJson, ExportRefusesContinuousSchedule) {
  EXPECT_THROW(schedule_to_json(lin4_schedule({0.1, 0.1, -40.0, 40.0}, 1.0)), DomainError);
}

TEST(ScheduleJson, ImportRejectsInvalidPrograms) {
  const PhysicalConstants pc;
  const auto hw = discretize_for_hardware(lin4_schedule({0.1, 0.1, -40.0, 40.0}, 1.0), 0.05, pc);
  auto j = schedule_to_json(hw, pc);
  j["omega_mhz"]["values"][3] = 20.0;
  EXPECT_THROW(schedule_from_json(j, pc), FormatError);
  j = schedule_to_json(hw, pc);
  j["phase_sign"] = 2;
  EXPECT_THROW(schedule_from_json(j, pc), FormatError);
  j = schedule_to_json(hw, pc);
  j["duration_us"] = 2.0;
  EXPECT_THROW(schedule_from_json(j, pc), FormatError);
}

TEST(Csv, QuotingRoundTrip) {
  CsvWriter w({"a", "b"});
  w.row(std::string("x,y"), 0.1);
  w.row(std::string("say \"hi\""), 3);
  const auto rows = parse_csv(w.str());
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[1][0], "x,y");
  EXPECT_EQ(parse_double_cell(rows[1][1]), 0.1);
  EXPECT_EQ(rows[2][0], "say \"hi\"");
  EXPECT_THROW(w.row(1), DomainError);
  EXPECT_THROW(parse_csv("\"open"), FormatError);
}

TEST(Csv, DoublesRoundTripExactly) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int k = 0; k < 1000; ++k) {
    const double v = u(rng);
    EXPECT_EQ(parse_double_cell(format_double(v)), v);
  }
  EXPECT_EQ(parse_double_cell("inf"), std::numeric_limits<double>::infinity());
  EXPECT_THROW(parse_double_cell("1.0x"), FormatError);
}
