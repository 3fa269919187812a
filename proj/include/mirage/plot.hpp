#pragma once

// Self-contained SVG charts rendered from the CSV outputs.

#include <filesystem>
#include <string>
#include <string_view>

namespace mirage::plot {

enum class PlotKind {
  /// Miss-count distributions, one curve per group. Accepts the raw template
  /// store (victim_accesses,trial,miss_count) or the covert report
  /// (trial,bit_sent,miss_count,bit_decoded).
  HistogramOverlay,
  /// Mean first spill against bucket count, one curve per load_balanced value.
  /// Accepts the bucket-and-ball sweep CSV.
  LineSweep,
};

PlotKind parse_kind(std::string_view name);

/// Renders CSV text. Lines starting with '#' are ignored. Throws ConfigError
/// on a schema mismatch and ArgumentError when there are no data rows.
std::string render_svg(const std::string& csv_text, PlotKind kind);

/// Reads `csv_input` and writes the chart to `out_svg`. Nothing is written
/// when rendering fails.
void emit_plot(const std::filesystem::path& csv_input, PlotKind kind, const std::filesystem::path& out_svg);

}  // namespace mirage::plot
