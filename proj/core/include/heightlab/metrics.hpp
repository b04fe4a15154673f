#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "heightlab/heightgrid.hpp"

namespace heightlab {

/// Road-height error report for one frame or an aggregate.
struct HeightReport {
  double mae = 0.0;
  double rmse = 0.0;
  std::map<double, double> acc;  // threshold (m) -> fraction with |err| < t
  std::size_t n_cells = 0;
};

std::vector<double> default_thresholds();  // 0.05, 0.1, 0.2 m

/// Per-cell pred - gt over jointly valid cells. Throws InvalidArgument when
/// the grids differ and DataError when no cell is jointly valid.
std::vector<double> height_errors(const HeightMap& pred, const HeightMap& gt);

double mae(const HeightMap& pred, const HeightMap& gt);
double rmse(const HeightMap& pred, const HeightMap& gt);

/// Fraction of jointly valid cells with |pred - gt| < t (strict). Throws
/// InvalidArgument for t <= 0.
double acc_at(const HeightMap& pred, const HeightMap& gt, double t);

HeightReport evaluate(const HeightMap& pred, const HeightMap& gt, std::span<const double> thresholds);

/// Report over an explicit error vector; the per-map functions above are
/// thin wrappers over this, so all routes agree bit for bit.
HeightReport report_from_errors(std::span<const double> errors, std::span<const double> thresholds);

/// Report over all cells of all frames pooled together.
HeightReport pooled_report(std::span<const std::pair<const HeightMap*, const HeightMap*>> frames,
                           std::span<const double> thresholds);

/// Per-metric arithmetic mean of per-frame reports; n_cells is the total.
HeightReport mean_report(std::span<const HeightReport> reports);

/// "mae,rmse,acc@t...,n_cells"
std::string csv_header(std::span<const double> thresholds);
/// Single CSV line with the values in header order.
std::string csv_line(const HeightReport& report);

/// Human-readable table, one row per labelled report.
std::string format_table(std::span<const std::pair<std::string, HeightReport>> rows);

}  // namespace heightlab
