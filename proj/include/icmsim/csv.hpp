#pragma once

#include "icmsim/mc.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace icmsim::csv {

/// 12 significant digits, '.' decimal point; NaN as "NA", infinities as "Inf"/"-Inf".
std::string format_number(double v);

/// records.csv: one row per (replication, assumed model).
void write_records(std::ostream& out, const std::vector<Record>& records);
/// summary.csv: one row per (condition, DGP, assumed, estimator, path).
void write_summary(std::ostream& out, const std::vector<SummaryRow>& rows);
/// plotdata_bias.csv: bias, variance and MSE per path.
void write_plot_bias(std::ostream& out, const std::vector<SummaryRow>& rows);
/// plotdata_inadmissible.csv: inadmissibility share per cell.
void write_plot_inadmissible(std::ostream& out, const std::vector<SummaryRow>& rows);
/// plotdata_flags.csv: flag rate per cell and criterion.
void write_plot_flags(std::ostream& out, const std::vector<SummaryRow>& rows);
/// fisher.csv: one row per Fisher check.
void write_fisher(std::ostream& out, const std::vector<FisherOutcome>& outcomes);
/// conditions.csv: the design grid.
void write_conditions(std::ostream& out, const std::vector<DesignCondition>& conditions);

/// Writes the five study files into `dir`, creating it when missing.
/// Throws std::runtime_error when a file cannot be written.
void write_study(const std::filesystem::path& dir, const StudyOutput& output);

}  // namespace icmsim::csv
