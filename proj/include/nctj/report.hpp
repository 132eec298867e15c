#pragma once

#include <string>
#include <vector>

#include "nctj/trainer.hpp"

namespace nctj::harness {

// Shortest round-trip decimal form ("nan" for missing values).
std::string format_double(double v);

// Frozen column order:
//   epoch,train_err,acc,asr,nc1,nc2_norm_M,nc2_norm_W,nc2_angle_M,
//   nc2_angle_W,nc3,nc4,w_norm_0..w_norm_{K-1}
std::string timeline_csv_header(int num_classes);
void write_timeline_csv(const train::MetricTimeline& tl, int num_classes,
                        const std::string& path);
train::MetricTimeline parse_timeline_csv(const std::string& path, int* num_classes_out = nullptr);

// Plot-rectangle geometry inside the fixed 800x480 viewBox; exported so tests
// can recompute coordinates.
struct SvgLayout {
  double width = 800.0, height = 480.0;
  double left = 70.0, right = 780.0;
  double top = 20.0, bottom = 430.0;
};
double svg_map_x(double epoch, double emin, double emax, const SvgLayout& layout = {});

// One polyline chart per metric column (plus train_err/acc/asr when present),
// each with axes, tick labels, and a dashed marker at tpt_start_epoch.
// Returns the emitted file names (relative to dir).
std::vector<std::string> write_metric_svgs(const train::MetricTimeline& tl, int num_classes,
                                           const std::string& dir);

}  // namespace nctj::harness
