#include "routeopt/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "routeopt/text_io.hpp"

namespace routeopt::report {

namespace {

std::string num_or_na(double v) { return std::isnan(v) ? "NA" : fmt_double(v); }

double parse_num_or_na(const std::string& s) {
  if (s == "NA") return std::numeric_limits<double>::quiet_NaN();
  return parse_double(s);
}

std::string meta_line(const harness::ComparisonBatch& batch) {
  return "# config_hash=" + config::config_hash(batch.context.cfg) +
         " master_seed=" + std::to_string(batch.context.cfg.experiment.master_seed) + "\n";
}

std::string comparison_csv(const std::vector<std::pair<std::string, harness::ScenarioResult>>& rows,
                           const std::string& meta) {
  std::ostringstream out;
  out << meta;
  out << "scenario,obj_value_mean,obj_value_std,flow_diff_mean,flow_diff_std,travel_time_mean,"
         "travel_time_std\n";
  for (const auto& [name, result] : rows) {
    auto obj = result.obj_value();
    auto fd = result.flow_diff();
    auto tt = result.travel_time();
    out << name << ',' << num_or_na(obj.mean) << ',' << num_or_na(obj.stddev) << ','
        << num_or_na(fd.mean) << ',' << num_or_na(fd.stddev) << ',' << num_or_na(tt.mean) << ','
        << num_or_na(tt.stddev) << "\n";
  }
  return out.str();
}

void chart_pair(const std::vector<std::pair<std::string, harness::ScenarioResult>>& rows,
                const std::string& meta, const std::string& out_dir,
                std::vector<std::string>& written) {
  std::vector<std::string> labels;
  std::vector<double> fd_mean, fd_std, tt_mean, tt_std;
  for (const auto& [name, result] : rows) {
    labels.push_back(name);
    auto fd = result.flow_diff();
    auto tt = result.travel_time();
    fd_mean.push_back(fd.mean);
    fd_std.push_back(fd.stddev);
    tt_mean.push_back(tt.mean);
    tt_std.push_back(tt.stddev);
  }
  std::string meta_comment = "<!-- " + meta.substr(2, meta.size() - 3) + " -->\n";
  write_file(out_dir + "/flow_diff.svg",
             bar_chart_svg("Deviation from system-optimal flow", labels, fd_mean, fd_std,
                           meta_comment));
  written.push_back("flow_diff.svg");
  write_file(out_dir + "/travel_time.svg",
             bar_chart_svg("Total travel time", labels, tt_mean, tt_std, meta_comment));
  written.push_back("travel_time.svg");
}

}  // namespace

std::string serialize_replications(const harness::ComparisonBatch& batch) {
  std::ostringstream out;
  out << meta_line(batch);
  out << "scenario,replication,obj_value,obj_value_true,flow_diff,travel_time\n";
  for (const auto& result : batch.results) {
    for (const auto& r : result.replications) {
      out << harness::scenario_name(result.scenario) << ',' << r.replication << ','
          << num_or_na(r.obj_value) << ',' << num_or_na(r.obj_value_true) << ','
          << num_or_na(r.flow_diff) << ',' << num_or_na(r.travel_time) << "\n";
    }
  }
  return out.str();
}

std::vector<ReplicationRow> parse_replications(const std::string& text) {
  std::vector<ReplicationRow> rows;
  bool saw_header = false;
  for (const std::string& line : split(text, '\n')) {
    if (line.empty() || line[0] == '#') continue;
    if (!saw_header) {
      saw_header = true;
      continue;
    }
    auto fields = split(line, ',');
    if (fields.size() != 6) throw std::runtime_error("replications: bad row: " + line);
    ReplicationRow row;
    row.scenario = fields[0];
    row.record.replication = static_cast<int>(parse_long(fields[1]));
    row.record.obj_value = parse_num_or_na(fields[2]);
    row.record.obj_value_true = parse_num_or_na(fields[3]);
    row.record.flow_diff = parse_num_or_na(fields[4]);
    row.record.travel_time = parse_num_or_na(fields[5]);
    rows.push_back(row);
  }
  return rows;
}

std::string bar_chart_svg(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<double>& means, const std::vector<double>& stds,
                          const std::string& meta_comment) {
  const int width = 640, height = 400;
  const double left = 70, right = 20, top = 50, bottom = 60;
  const double plot_w = width - left - right, plot_h = height - top - bottom;

  double y_max = 0.0;
  for (size_t i = 0; i < means.size(); ++i)
    if (!std::isnan(means[i])) y_max = std::max(y_max, means[i] + stds[i]);
  if (y_max <= 0.0) y_max = 1.0;
  y_max *= 1.1;

  auto fmt2 = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return std::string(buf);
  };
  auto y_of = [&](double v) { return top + plot_h * (1.0 - v / y_max); };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\">\n";
  out << meta_comment;
  out << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"28\" font-family=\"sans-serif\" font-size=\"16\" "
         "text-anchor=\"middle\">"
      << title << "</text>\n";

  // Axes and ticks.
  out << "<line x1=\"" << fmt2(left) << "\" y1=\"" << fmt2(top) << "\" x2=\"" << fmt2(left)
      << "\" y2=\"" << fmt2(top + plot_h) << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << fmt2(left) << "\" y1=\"" << fmt2(top + plot_h) << "\" x2=\""
      << fmt2(left + plot_w) << "\" y2=\"" << fmt2(top + plot_h) << "\" stroke=\"black\"/>\n";
  for (int tick = 0; tick <= 5; ++tick) {
    double v = y_max * tick / 5.0;
    double y = y_of(v);
    out << "<line x1=\"" << fmt2(left - 4) << "\" y1=\"" << fmt2(y) << "\" x2=\"" << fmt2(left)
        << "\" y2=\"" << fmt2(y) << "\" stroke=\"black\"/>\n";
    char lbl[32];
    std::snprintf(lbl, sizeof(lbl), "%.3g", v);
    out << "<text x=\"" << fmt2(left - 8) << "\" y=\"" << fmt2(y + 4)
        << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" << lbl
        << "</text>\n";
  }

  const double slot = plot_w / static_cast<double>(labels.size());
  const double bar_w = slot * 0.6;
  for (size_t i = 0; i < labels.size(); ++i) {
    double cx = left + slot * (static_cast<double>(i) + 0.5);
    if (!std::isnan(means[i])) {
      double y = y_of(means[i]);
      out << "<rect x=\"" << fmt2(cx - bar_w / 2) << "\" y=\"" << fmt2(y) << "\" width=\""
          << fmt2(bar_w) << "\" height=\"" << fmt2(top + plot_h - y)
          << "\" fill=\"#4878a8\"/>\n";
      if (stds[i] > 0.0) {
        double y_lo = y_of(std::max(0.0, means[i] - stds[i]));
        double y_hi = y_of(means[i] + stds[i]);
        out << "<line x1=\"" << fmt2(cx) << "\" y1=\"" << fmt2(y_hi) << "\" x2=\"" << fmt2(cx)
            << "\" y2=\"" << fmt2(y_lo) << "\" stroke=\"black\"/>\n";
        out << "<line x1=\"" << fmt2(cx - 5) << "\" y1=\"" << fmt2(y_hi) << "\" x2=\""
            << fmt2(cx + 5) << "\" y2=\"" << fmt2(y_hi) << "\" stroke=\"black\"/>\n";
        out << "<line x1=\"" << fmt2(cx - 5) << "\" y1=\"" << fmt2(y_lo) << "\" x2=\""
            << fmt2(cx + 5) << "\" y2=\"" << fmt2(y_lo) << "\" stroke=\"black\"/>\n";
      }
    } else {
      out << "<text x=\"" << fmt2(cx) << "\" y=\"" << fmt2(y_of(0.0) - 8)
          << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">N/A</text>\n";
    }
    out << "<text x=\"" << fmt2(cx) << "\" y=\"" << fmt2(top + plot_h + 18)
        << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">" << labels[i]
        << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::vector<std::string> emit_report(const harness::ComparisonBatch& batch,
                                     const std::string& out_dir) {
  if (batch.results.empty() ||
      std::any_of(batch.results.begin(), batch.results.end(),
                  [](const harness::ScenarioResult& r) { return r.replications.empty(); }))
    throw std::invalid_argument("emit_report: empty results");

  std::filesystem::create_directories(out_dir);
  const std::string meta = meta_line(batch);
  std::vector<std::string> written;

  std::vector<std::pair<std::string, harness::ScenarioResult>> rows;
  for (const auto& r : batch.results) rows.push_back({harness::scenario_name(r.scenario), r});

  write_file(out_dir + "/comparison.csv", comparison_csv(rows, meta));
  written.push_back("comparison.csv");

  write_file(out_dir + "/replications.csv", serialize_replications(batch));
  written.push_back("replications.csv");

  for (const auto& result : batch.results) {
    std::ostringstream out;
    out << meta;
    out << "edge,target,expected_flow_mean,realized_flow_mean,abs_deviation_mean\n";
    for (size_t e = 0; e < batch.context.scaled_targets.size(); ++e) {
      double target = batch.context.scaled_targets[e];
      double realized = result.mean_realized_flow[e];
      out << e << ',' << fmt_double(target) << ',' << fmt_double(result.mean_expected_flow[e])
          << ',' << fmt_double(realized) << ',' << fmt_double(std::fabs(target - realized))
          << "\n";
    }
    std::string name = "edge_deviation_" + harness::scenario_name(result.scenario) + ".csv";
    write_file(out_dir + "/" + name, out.str());
    written.push_back(name);
  }

  chart_pair(rows, meta, out_dir, written);

  if (batch.context.model_eval) {
    const auto& rep = *batch.context.model_eval;
    std::ostringstream conf;
    conf << meta;
    conf << "predicted,actual,count\n";
    conf << "1,1," << rep.true_positive << "\n";
    conf << "1,0," << rep.false_positive << "\n";
    conf << "0,0," << rep.true_negative << "\n";
    conf << "0,1," << rep.false_negative << "\n";
    conf << "# accuracy=" << fmt_double(rep.accuracy) << " log_loss=" << fmt_double(rep.log_loss)
         << "\n";
    write_file(out_dir + "/confusion.csv", conf.str());
    written.push_back("confusion.csv");

    std::ostringstream cal;
    cal << meta;
    cal << "bin_lo,bin_hi,count,mean_predicted,empirical_rate\n";
    for (const auto& b : rep.calibration)
      cal << fmt_double(b.lo) << ',' << fmt_double(b.hi) << ',' << b.count << ','
          << fmt_double(b.mean_predicted) << ',' << fmt_double(b.empirical_rate) << "\n";
    write_file(out_dir + "/calibration.csv", cal.str());
    written.push_back("calibration.csv");

    // Predicted-vs-empirical scatter with the diagonal as reference.
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"420\" height=\"420\">\n";
    svg << "<!-- " << meta.substr(2, meta.size() - 3) << " -->\n";
    svg << "<rect width=\"420\" height=\"420\" fill=\"white\"/>\n";
    svg << "<text x=\"210\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\" "
           "text-anchor=\"middle\">Predicted vs observed compliance</text>\n";
    svg << "<line x1=\"50\" y1=\"370\" x2=\"390\" y2=\"30\" stroke=\"#bbbbbb\"/>\n";
    svg << "<line x1=\"50\" y1=\"370\" x2=\"390\" y2=\"370\" stroke=\"black\"/>\n";
    svg << "<line x1=\"50\" y1=\"370\" x2=\"50\" y2=\"30\" stroke=\"black\"/>\n";
    for (const auto& b : rep.calibration) {
      if (b.count == 0) continue;
      double x = 50 + 340 * b.mean_predicted;
      double y = 370 - 340 * b.empirical_rate;
      char buf[96];
      std::snprintf(buf, sizeof(buf),
                    "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"5\" fill=\"#a85048\"/>\n", x, y);
      svg << buf;
    }
    svg << "</svg>\n";
    write_file(out_dir + "/calibration.svg", svg.str());
    written.push_back("calibration.svg");
  }

  std::ostringstream manifest;
  manifest << "routeopt run manifest v1\n";
  manifest << "config_hash " << config::config_hash(batch.context.cfg) << "\n";
  manifest << "master_seed " << batch.context.cfg.experiment.master_seed << "\n";
  manifest << "target_scale " << fmt_double(batch.context.target_scale) << "\n";
  manifest << "so_objective " << fmt_double(batch.context.so.objective) << "\n";
  manifest << "so_gap " << fmt_double(batch.context.so.gap) << "\n";
  manifest << "files";
  for (const auto& f : written) manifest << ' ' << f;
  manifest << "\nconfig\n" << config::dump_config(batch.context.cfg);
  write_file(out_dir + "/manifest.txt", manifest.str());
  written.push_back("manifest.txt");
  return written;
}

std::vector<std::string> rebuild_report(const std::string& replications_csv,
                                        const std::string& out_dir) {
  std::string text = read_file(replications_csv);
  auto rows = parse_replications(text);
  if (rows.empty()) throw std::runtime_error("rebuild_report: no replication rows");

  // Carry the original meta comment through.
  std::string meta = "# rebuilt\n";
  for (const std::string& line : split(text, '\n'))
    if (!line.empty() && line[0] == '#') {
      meta = line + "\n";
      break;
    }

  // Group rows by scenario in first-appearance order.
  std::vector<std::pair<std::string, harness::ScenarioResult>> grouped;
  for (const auto& row : rows) {
    auto it = std::find_if(grouped.begin(), grouped.end(),
                           [&](const auto& g) { return g.first == row.scenario; });
    if (it == grouped.end()) {
      harness::ScenarioResult r;
      grouped.push_back({row.scenario, r});
      it = grouped.end() - 1;
    }
    it->second.replications.push_back(row.record);
  }

  std::filesystem::create_directories(out_dir);
  std::vector<std::string> written;
  write_file(out_dir + "/comparison.csv", comparison_csv(grouped, meta));
  written.push_back("comparison.csv");
  chart_pair(grouped, meta, out_dir, written);
  return written;
}

}  // namespace routeopt::report
