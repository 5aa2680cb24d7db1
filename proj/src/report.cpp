#include "pmel/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pmel/errors.hpp"

namespace pmel {

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return std::string(buf);
}

RateFit fit_rate(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DimensionMismatch("rate fit needs matching columns");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > 0.0 && y[i] > 0.0) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  }
  const std::size_t n = lx.size();
  if (n < 3)
    throw NonPositiveData("rate fit needs at least 3 positive (x, y) pairs, got " +
                          std::to_string(n));
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  const double denom = n * sxx - sx * sx;
  if (std::abs(denom) < 1e-14 * std::max(1.0, n * sxx))
    throw NonPositiveData("rate fit is degenerate: all abscissae coincide");
  RateFit fit;
  fit.slope = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / n;
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ly[i] - fit.intercept - fit.slope * lx[i];
    ss += r * r;
  }
  fit.rms_residual = std::sqrt(ss / n);
  return fit;
}

void ConvergenceReport::add_row(std::vector<double> values) {
  if (!columns.empty() && values.size() != columns.size())
    throw DimensionMismatch("report row width " + std::to_string(values.size()) +
                            " does not match " + std::to_string(columns.size()) + " columns");
  rows.push_back(std::move(values));
}

void ConvergenceReport::sort_by_first() {
  std::sort(rows.begin(), rows.end(),
            [](const std::vector<double>& a, const std::vector<double>& b) {
              return a.front() < b.front();
            });
}

RateFit ConvergenceReport::fit(int col) const {
  if (col <= 0 || col >= static_cast<int>(columns.size()))
    throw DimensionMismatch("report fit column out of range");
  std::vector<double> x, y;
  for (const auto& row : rows) {
    x.push_back(row[0]);
    y.push_back(row[col]);
  }
  return fit_rate(x, y);
}

std::string ConvergenceReport::to_csv() const {
  std::ostringstream out;
  const auto hash = metadata.find("config_hash");
  out << "# config_hash=" << (hash == metadata.end() ? "none" : hash->second)
      << " scenario=" << (scenario.empty() ? "none" : scenario) << "\n";
  for (std::size_t c = 0; c < columns.size(); ++c)
    out << columns[c] << (c + 1 < columns.size() ? "," : "\n");
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size(); ++c)
      out << format_number(row[c]) << (c + 1 < row.size() ? "," : "\n");
  return out.str();
}

std::string ConvergenceReport::summary_text() const {
  std::ostringstream out;
  out << "scenario: " << scenario << "\n";
  for (const auto& [key, value] : metadata) out << key << ": " << value << "\n";
  for (std::size_t c = 0; c < columns.size(); ++c)
    out << (c == 0 ? "columns: " : ", ") << columns[c];
  out << "\nrows: " << rows.size() << "\n";
  for (const auto& w : warnings) out << "warning: " << w << "\n";
  return out.str();
}

void write_report_file(const std::string& path, const std::string& content, bool force) {
  namespace fs = std::filesystem;
  const fs::path p(path);
  if (!p.parent_path().empty()) fs::create_directories(p.parent_path());
  if (!force && fs::exists(p)) {
    std::ifstream in(p);
    std::string first;
    std::getline(in, first);
    std::string fresh = content.substr(0, content.find('\n'));
    if (!first.empty() && first.rfind("# config_hash=", 0) == 0 && first != fresh)
      throw ConfigError("refusing to overwrite " + path +
                        " written under a different config (use --force)");
  }
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  out << content;
}

}  // namespace pmel
