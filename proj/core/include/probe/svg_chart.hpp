#pragma once

#include <string>
#include <vector>

namespace probe::svg {

struct Bar {
  std::string label;
  double value = 0;
};

struct ChartOptions {
  std::string title;
  std::string y_label;
  int width = 640;
  int height = 400;
  int value_decimals = 3;
};

/// Standalone SVG bar chart around a zero baseline; negative values hang
/// below it. Output is deterministic for identical input.
std::string bar_chart(const std::vector<Bar>& bars, const ChartOptions& options);

/// Escapes &, <, >, " and ' for use in SVG text and attributes.
std::string escape(const std::string& text);

}  // namespace probe::svg
