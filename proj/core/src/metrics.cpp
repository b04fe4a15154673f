#include "heightlab/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "heightlab/error.hpp"
#include "heightlab/numeric.hpp"

namespace heightlab {
namespace {

double mae_of(std::span<const double> errors) {
  std::vector<double> a(errors.size());
  for (std::size_t i = 0; i < errors.size(); ++i) a[i] = std::abs(errors[i]);
  return pairwise_sum(a) / static_cast<double>(errors.size());
}

double rmse_of(std::span<const double> errors) {
  std::vector<double> sq(errors.size());
  for (std::size_t i = 0; i < errors.size(); ++i) sq[i] = errors[i] * errors[i];
  return std::sqrt(pairwise_sum(sq) / static_cast<double>(errors.size()));
}

double acc_of(std::span<const double> errors, double t) {
  if (!(t > 0.0)) throw InvalidArgument("acc_at: threshold must be positive");
  std::size_t hits = 0;
  for (double e : errors) hits += std::abs(e) < t ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(errors.size());
}

void require_nonempty(std::span<const double> errors) {
  if (errors.empty()) throw DataError("metrics: no jointly valid cell");
}

}  // namespace

std::vector<double> default_thresholds() { return {0.05, 0.1, 0.2}; }

std::vector<double> height_errors(const HeightMap& pred, const HeightMap& gt) {
  if (!(pred.grid() == gt.grid())) throw InvalidArgument("metrics: prediction and ground truth grids differ");
  std::vector<double> errors;
  errors.reserve(gt.grid().cell_count());
  for (int r = 0; r < gt.rows(); ++r) {
    for (int c = 0; c < gt.cols(); ++c) {
      if (pred.valid(r, c) && gt.valid(r, c)) errors.push_back(pred.at(r, c) - gt.at(r, c));
    }
  }
  require_nonempty(errors);
  return errors;
}

double mae(const HeightMap& pred, const HeightMap& gt) { return mae_of(height_errors(pred, gt)); }

double rmse(const HeightMap& pred, const HeightMap& gt) { return rmse_of(height_errors(pred, gt)); }

double acc_at(const HeightMap& pred, const HeightMap& gt, double t) { return acc_of(height_errors(pred, gt), t); }

HeightReport report_from_errors(std::span<const double> errors, std::span<const double> thresholds) {
  require_nonempty(errors);
  HeightReport rep;
  rep.mae = mae_of(errors);
  rep.rmse = rmse_of(errors);
  for (double t : thresholds) rep.acc[t] = acc_of(errors, t);
  rep.n_cells = errors.size();
  return rep;
}

HeightReport evaluate(const HeightMap& pred, const HeightMap& gt, std::span<const double> thresholds) {
  return report_from_errors(height_errors(pred, gt), thresholds);
}

HeightReport pooled_report(std::span<const std::pair<const HeightMap*, const HeightMap*>> frames,
                           std::span<const double> thresholds) {
  std::vector<double> all;
  for (const auto& [pred, gt] : frames) {
    const auto e = height_errors(*pred, *gt);
    all.insert(all.end(), e.begin(), e.end());
  }
  return report_from_errors(all, thresholds);
}

HeightReport mean_report(std::span<const HeightReport> reports) {
  if (reports.empty()) throw DataError("mean_report: no reports");
  HeightReport out;
  std::vector<double> col(reports.size());
  const auto mean_of = [&](auto getter) {
    for (std::size_t i = 0; i < reports.size(); ++i) col[i] = getter(reports[i]);
    return pairwise_sum(col) / static_cast<double>(reports.size());
  };
  out.mae = mean_of([](const HeightReport& r) { return r.mae; });
  out.rmse = mean_of([](const HeightReport& r) { return r.rmse; });
  for (const auto& [t, unused] : reports.front().acc) {
    out.acc[t] = mean_of([t = t](const HeightReport& r) { return r.acc.at(t); });
  }
  for (const HeightReport& r : reports) out.n_cells += r.n_cells;
  return out;
}

std::string csv_header(std::span<const double> thresholds) {
  std::vector<double> sorted(thresholds.begin(), thresholds.end());
  std::sort(sorted.begin(), sorted.end());
  std::string s = "mae,rmse";
  for (double t : sorted) s += fmt::format(",acc@{}", t);
  s += ",n_cells";
  return s;
}

std::string csv_line(const HeightReport& report) {
  std::string s = fmt::format("{},{}", report.mae, report.rmse);
  for (const auto& [t, a] : report.acc) s += fmt::format(",{}", a);
  s += fmt::format(",{}", report.n_cells);
  return s;
}

std::string format_table(std::span<const std::pair<std::string, HeightReport>> rows) {
  std::string out = fmt::format("{:<12} | {:>8} {:>8} |", "frame", "MAE", "RMSE");
  if (!rows.empty()) {
    for (const auto& [t, a] : rows.front().second.acc) out += fmt::format(" {:>8}", fmt::format("@{}", t));
  }
  out += fmt::format(" | {:>8}\n", "cells");
  out += std::string(out.size() - 1, '-') + "\n";
  for (const auto& [label, rep] : rows) {
    out += fmt::format("{:<12} | {:>8.4f} {:>8.4f} |", label, rep.mae, rep.rmse);
    for (const auto& [t, a] : rep.acc) out += fmt::format(" {:>8.4f}", a);
    out += fmt::format(" | {:>8}\n", rep.n_cells);
  }
  return out;
}

}  // namespace heightlab
