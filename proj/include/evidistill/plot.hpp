#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "evidistill/dataset.hpp"

namespace evidistill {

struct SweepRow {
  std::size_t m = 0;
  std::size_t n = 0;
  double accuracy = 0.0;
};

// Reads the sweep table (columns m, n and accuracy located by header).
std::vector<SweepRow> parse_sweep_tsv(std::string_view tsv);

// Accuracy against total evidence count, one line per visual count n.
std::string plot_sweep_svg(std::span<const SweepRow> rows);

// One bar panel per (m, n) group.
std::string plot_histogram_svg(const Histogram& h);

// Picks the renderer from the table's header. Throws SchemaViolation for
// unrecognized tables.
std::string plot_table_svg(std::string_view tsv);

}  // namespace evidistill
