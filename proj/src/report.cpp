#include "nctj/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace nctj::harness {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string timeline_csv_header(int num_classes) {
  std::ostringstream os;
  os << "epoch,train_err,acc,asr,nc1,nc2_norm_M,nc2_norm_W,nc2_angle_M,nc2_angle_W,nc3,nc4";
  for (int k = 0; k < num_classes; ++k) os << ",w_norm_" << k;
  return os.str();
}

void write_timeline_csv(const train::MetricTimeline& tl, int num_classes,
                        const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write '" + path + "'");
  f << timeline_csv_header(num_classes) << '\n';
  for (const auto& row : tl.rows) {
    f << row.epoch << ',' << format_double(row.train_error) << ',' << format_double(row.test_acc)
      << ',' << format_double(row.asr ? *row.asr : std::numeric_limits<double>::quiet_NaN())
      << ',' << format_double(row.nc.nc1) << ',' << format_double(row.nc.nc2_norm_m) << ','
      << format_double(row.nc.nc2_norm_w) << ',' << format_double(row.nc.nc2_angle_m) << ','
      << format_double(row.nc.nc2_angle_w) << ',' << format_double(row.nc.nc3) << ','
      << format_double(row.nc.nc4);
    for (int k = 0; k < num_classes; ++k) {
      f << ',' << format_double(row.nc.w_row_norms[static_cast<size_t>(k)]);
    }
    f << '\n';
  }
  if (!f) throw IoError("write failed for '" + path + "'");
}

train::MetricTimeline parse_timeline_csv(const std::string& path, int* num_classes_out) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read '" + path + "'");
  std::string line;
  if (!std::getline(f, line)) throw FormatError(path + ": empty timeline file");
  // count w_norm_* columns to recover K
  int num_classes = 0;
  {
    std::istringstream hs(line);
    std::string col;
    while (std::getline(hs, col, ',')) {
      if (col.rfind("w_norm_", 0) == 0) ++num_classes;
    }
  }
  std::string expected = timeline_csv_header(num_classes);
  if (line != expected) {
    throw FormatError(path + ": unexpected CSV header (want '" + expected + "')");
  }
  train::MetricTimeline tl;
  size_t line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ls, cell, ',')) {
      if (cell == "nan") {
        vals.push_back(std::numeric_limits<double>::quiet_NaN());
      } else {
        vals.push_back(std::strtod(cell.c_str(), nullptr));
      }
    }
    if (vals.size() != static_cast<size_t>(11 + num_classes)) {
      throw FormatError(path + ": line " + std::to_string(line_no) + " has " +
                        std::to_string(vals.size()) + " columns, expected " +
                        std::to_string(11 + num_classes));
    }
    train::TimelineRow row;
    row.epoch = static_cast<int>(vals[0]);
    row.train_error = vals[1];
    row.test_acc = vals[2];
    if (!std::isnan(vals[3])) row.asr = vals[3];
    row.nc.epoch = row.epoch;
    row.nc.nc1 = vals[4];
    row.nc.nc1_literal = vals[4];
    row.nc.nc1_pinv = vals[4];
    row.nc.nc2_norm_m = vals[5];
    row.nc.nc2_norm_w = vals[6];
    row.nc.nc2_angle_m = vals[7];
    row.nc.nc2_angle_w = vals[8];
    row.nc.nc3 = vals[9];
    row.nc.nc4 = vals[10];
    row.nc.w_row_norms.assign(vals.begin() + 11, vals.end());
    if (!tl.tpt_start_epoch && row.train_error == 0.0) tl.tpt_start_epoch = row.epoch;
    tl.rows.push_back(std::move(row));
  }
  if (num_classes_out) *num_classes_out = num_classes;
  return tl;
}

double svg_map_x(double epoch, double emin, double emax, const SvgLayout& layout) {
  if (emax <= emin) return 0.5 * (layout.left + layout.right);
  return layout.left + (epoch - emin) / (emax - emin) * (layout.right - layout.left);
}

namespace {

struct Point {
  double epoch, value;
};

void write_one_svg(const std::vector<Point>& pts, std::optional<int> tpt,
                   const std::string& metric, const std::string& path) {
  const SvgLayout L;
  double emin = 1e300, emax = -1e300, vmin = 1e300, vmax = -1e300;
  for (const auto& p : pts) {
    emin = std::min(emin, p.epoch);
    emax = std::max(emax, p.epoch);
    vmin = std::min(vmin, p.value);
    vmax = std::max(vmax, p.value);
  }
  if (pts.empty()) {
    emin = 0;
    emax = 1;
    vmin = 0;
    vmax = 1;
  }
  if (emax == emin) {
    emin -= 1;
    emax += 1;
  }
  if (vmax == vmin) {
    double pad = std::max(1e-9, std::abs(vmin) * 0.1);
    vmin -= pad;
    vmax += pad;
  } else {
    double pad = (vmax - vmin) * 0.05;
    vmin -= pad;
    vmax += pad;
  }
  auto map_y = [&](double v) { return L.bottom - (v - vmin) / (vmax - vmin) * (L.bottom - L.top); };

  std::ofstream f(path);
  if (!f) throw IoError("cannot write '" + path + "'");
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 480\">\n";
  f << "<rect width=\"800\" height=\"480\" fill=\"white\"/>\n";
  // axes
  f << "<line x1=\"" << L.left << "\" y1=\"" << L.bottom << "\" x2=\"" << L.right << "\" y2=\""
    << L.bottom << "\" stroke=\"black\"/>\n";
  f << "<line x1=\"" << L.left << "\" y1=\"" << L.top << "\" x2=\"" << L.left << "\" y2=\""
    << L.bottom << "\" stroke=\"black\"/>\n";
  // ticks
  for (int i = 0; i <= 4; ++i) {
    double e = emin + (emax - emin) * i / 4.0;
    double x = svg_map_x(e, emin, emax, L);
    f << "<line x1=\"" << x << "\" y1=\"" << L.bottom << "\" x2=\"" << x << "\" y2=\""
      << L.bottom + 5 << "\" stroke=\"black\"/>\n";
    f << "<text x=\"" << x << "\" y=\"" << L.bottom + 20
      << "\" font-size=\"12\" text-anchor=\"middle\">" << format_double(e) << "</text>\n";
    double v = vmin + (vmax - vmin) * i / 4.0;
    double y = map_y(v);
    f << "<line x1=\"" << L.left - 5 << "\" y1=\"" << y << "\" x2=\"" << L.left << "\" y2=\"" << y
      << "\" stroke=\"black\"/>\n";
    f << "<text x=\"" << L.left - 8 << "\" y=\"" << y + 4
      << "\" font-size=\"12\" text-anchor=\"end\">" << format_double(v) << "</text>\n";
  }
  // axis labels
  f << "<text x=\"" << (L.left + L.right) / 2 << "\" y=\"" << L.bottom + 40
    << "\" font-size=\"14\" text-anchor=\"middle\">epoch</text>\n";
  f << "<text x=\"18\" y=\"" << (L.top + L.bottom) / 2
    << "\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
    << (L.top + L.bottom) / 2 << ")\">" << metric << "</text>\n";
  // terminal-phase marker
  if (tpt) {
    double x = svg_map_x(*tpt, emin, emax, L);
    f << "<line class=\"tpt\" x1=\"" << format_double(x) << "\" y1=\"" << L.top << "\" x2=\""
      << format_double(x) << "\" y2=\"" << L.bottom
      << "\" stroke=\"red\" stroke-dasharray=\"6 4\"/>\n";
  }
  // data
  if (pts.size() >= 2) {
    f << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
    for (const auto& p : pts) {
      f << format_double(svg_map_x(p.epoch, emin, emax, L)) << ',' << format_double(map_y(p.value))
        << ' ';
    }
    f << "\"/>\n";
  }
  for (const auto& p : pts) {
    f << "<circle cx=\"" << format_double(svg_map_x(p.epoch, emin, emax, L)) << "\" cy=\""
      << format_double(map_y(p.value)) << "\" r=\"2.5\" fill=\"steelblue\"/>\n";
  }
  f << "</svg>\n";
  if (!f) throw IoError("write failed for '" + path + "'");
}

}  // namespace

std::vector<std::string> write_metric_svgs(const train::MetricTimeline& tl, int num_classes,
                                           const std::string& dir) {
  if (tl.rows.empty()) throw ArgumentError("write_metric_svgs: empty timeline");
  std::filesystem::create_directories(dir);
  std::vector<std::string> emitted;
  auto emit = [&](const std::string& name, auto getter, bool optional_metric) {
    std::vector<Point> pts;
    for (const auto& row : tl.rows) {
      auto v = getter(row);
      if (v) pts.push_back({static_cast<double>(row.epoch), *v});
    }
    if (pts.empty() && optional_metric) return;
    write_one_svg(pts, tl.tpt_start_epoch, name, dir + "/" + name + ".svg");
    emitted.push_back(name + ".svg");
  };
  using Row = train::TimelineRow;
  auto some = [](double v) { return std::optional<double>(v); };
  emit("train_err", [&](const Row& r) { return some(r.train_error); }, false);
  emit("acc", [&](const Row& r) { return some(r.test_acc); }, false);
  emit("asr", [](const Row& r) { return r.asr; }, true);
  emit("nc1", [&](const Row& r) { return some(r.nc.nc1); }, false);
  emit("nc2_norm_M", [&](const Row& r) { return some(r.nc.nc2_norm_m); }, false);
  emit("nc2_norm_W", [&](const Row& r) { return some(r.nc.nc2_norm_w); }, false);
  emit("nc2_angle_M", [&](const Row& r) { return some(r.nc.nc2_angle_m); }, false);
  emit("nc2_angle_W", [&](const Row& r) { return some(r.nc.nc2_angle_w); }, false);
  emit("nc3", [&](const Row& r) { return some(r.nc.nc3); }, false);
  emit("nc4", [&](const Row& r) { return some(r.nc.nc4); }, false);
  for (int k = 0; k < num_classes; ++k) {
    emit("w_norm_" + std::to_string(k),
         [&, k](const Row& r) { return some(r.nc.w_row_norms[static_cast<size_t>(k)]); }, false);
  }
  return emitted;
}

}  // namespace nctj::harness
