#pragma once
// Convergence reports: tabular (control parameter, measurements) data with
// log-log rate fits and deterministic CSV serialization.  CSV layout: one
// leading comment line carrying the config hash, then a header row, then
// numeric rows ('%.12g', '.' decimals, LF endings).
#include <map>
#include <string>
#include <vector>

namespace pmel {

inline constexpr const char* kVersion = "0.1.0";

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;      // natural log of the prefactor
  double rms_residual = 0.0;   // in log space
};

// Least-squares fit log(y) = intercept + slope log(x).  Pairs with a
// nonpositive entry are dropped; fewer than 3 surviving pairs is an error.
RateFit fit_rate(const std::vector<double>& x, const std::vector<double>& y);

struct ConvergenceReport {
  std::string scenario;
  std::vector<std::string> columns;        // first column is the control parameter
  std::vector<std::vector<double>> rows;   // each row matches columns in length
  std::map<std::string, std::string> metadata;
  std::vector<std::string> warnings;

  void add_row(std::vector<double> values);
  void sort_by_first();
  // Rate of column `col` against column 0 (requires sorted positive data).
  RateFit fit(int col = 1) const;
  std::string to_csv() const;
  std::string summary_text() const;
};

// Writes content to path, creating parent directories.  An existing file
// whose leading config-hash line disagrees with the new content is kept
// unless force is set.
void write_report_file(const std::string& path, const std::string& content, bool force);

// Deterministic number formatting shared by all report output.
std::string format_number(double v);

}  // namespace pmel
