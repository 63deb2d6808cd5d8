#include <gtest/gtest.h>

#include "probe/report.hpp"
#include "probe/stats.hpp"
#include "probe/svg_chart.hpp"

using namespace probe;

namespace {
std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
  return n;
}

MetricRow row(const std::string& model, double shift) {
  MetricRow r;
  r.record_id = "r";
  r.model_id = model;
  r.rouge1_aut = 0.3;
  r.rouge1_nt = 0.3 + shift;
  r.rougeL_aut = 0.2;
  r.rougeL_nt = 0.2 + shift;
  r.cos_aut = 0.5;
  r.cos_nt = 0.5 - shift;
  r.cos_cross = 0.9;
  return r;
}
}  // namespace

TEST(Svg, BarChartIsWellFormedAndDeterministic) {
  std::vector<svg::Bar> bars{{"m<1>", 0.2}, {"m&2", -0.1}};
  svg::ChartOptions o;
  o.title = "Delta";
  auto a = svg::bar_chart(bars, o);
  EXPECT_EQ(a, svg::bar_chart(bars, o));
  EXPECT_EQ(a.rfind("<svg", 0), 0u);
  EXPECT_NE(a.find("</svg>"), std::string::npos);
  EXPECT_NE(a.find("m&lt;1&gt;"), std::string::npos);
  EXPECT_EQ(a.find("m<1>"), std::string::npos);
  EXPECT_EQ(count(a, "<title>"), 2u);
}

TEST(Svg, EmptyChartStillRenders) {
  auto s = svg::bar_chart({}, {});
  EXPECT_NE(s.find("</svg>"), std::string::npos);
}

TEST(Report, OneChartPerMetricWithOneBarPerModel) {
  std::vector<MetricRow> rows{row("a", 0.1), row("b", -0.05), row("a", 0.2)};
  auto charts = report::metric_charts(rows);
  ASSERT_EQ(charts.size(), stats::metric_names().size());
  for (const auto& [name, text] : charts) {
    EXPECT_NE(name.find(".svg"), std::string::npos);
    EXPECT_EQ(count(text, "<title>"), 2u) << name;
  }
}

TEST(Report, CollapseTableMarksFlaggedModels) {
  std::vector<MetricRow> rows{row("a", 0.1), row("b", 0.0)};
  rows[1].cos_cross = 0.4;
  auto entries = stats::collapse_report(rows);
  auto t = report::collapse_table(entries, stats::kCollapseThreshold);
  auto line_a = t.substr(t.find("| a "));
  line_a = line_a.substr(0, line_a.find('\n'));
  auto line_b = t.substr(t.find("| b "));
  line_b = line_b.substr(0, line_b.find('\n'));
  EXPECT_NE(line_a.find("yes"), std::string::npos) << t;
  EXPECT_EQ(line_b.find("yes"), std::string::npos) << t;
}

TEST(Report, FailureModeTableCountsBothSides) {
  std::vector<RewritePair> pairs(3);
  for (auto& p : pairs) p.model_id = "m";
  pairs[0].record_id = "r0";
  pairs[0].verdict_aut.cls = ComplianceClass::Erasure;
  pairs[1].record_id = "r1";
  pairs[1].verdict_nt.cls = ComplianceClass::Refusal;
  pairs[2].record_id = "r2";
  auto t = report::failure_mode_table(pairs, {});
  EXPECT_NE(t.find("Failure Mode"), std::string::npos);
  EXPECT_NE(t.find("Erasure"), std::string::npos);
}

TEST(Report, TokenDeltaTableListsTokens) {
  std::vector<TokenDelta> d{{"rewritten", 10, 0, 100, 0, 100}, {"here", 5, 1, 50, 10, 40}};
  auto t = report::token_delta_table(d);
  EXPECT_LT(t.find("rewritten"), t.find("here"));
}
