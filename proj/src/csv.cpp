#include "icmsim/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>

namespace icmsim::csv {

namespace {

const char* const kConditionHeader = "condition_id,position,n,K,sigma,homogeneous";

void put_condition(std::ostream& out, const DesignCondition& c) {
  out << c.id << ',' << to_string(c.position) << ',' << c.n << ',' << c.k << ',' << format_number(c.sigma) << ','
      << (c.homogeneous ? 1 : 0);
}

void put_cell(std::ostream& out, const SummaryRow& r) {
  put_condition(out, r.condition);
  out << ',' << to_string(r.dgp_kind) << ',' << to_string(r.assumed_kind) << ',' << to_string(r.estimator);
}

std::string flag_text(const std::optional<bool>& f) {
  if (!f) return "NA";
  return *f ? "1" : "0";
}

std::string path_name(std::size_t j) { return "beta" + std::to_string(j + 1); }

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  if (v == 0.0) return "0";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 12);
  return std::string(buf, res.ptr);
}

void write_records(std::ostream& out, const std::vector<Record>& records) {
  out << "condition_id,position,dgp_kind,assumed_kind,estimator,rep,seed,admissible,reason_codes,"
         "beta1_std,beta2_std,beta3_std,F_min,T,df,p_value,srmr,cfi,rmsea,cr_min,ave_min";
  for (auto c : kCriteria) out << ",flag_" << to_string(c);
  out << '\n';
  for (const auto& r : records) {
    out << r.condition.id << ',' << to_string(r.condition.position) << ',' << to_string(r.dgp_kind) << ','
        << to_string(r.assumed_kind) << ',' << to_string(r.estimator) << ',' << r.rep << ',' << r.seed << ','
        << (r.admissible ? 1 : 0) << ',' << join_reasons(r.reasons);
    for (double p : r.paths) out << ',' << format_number(p);
    const FitReport& f = r.fit;
    out << ',' << format_number(r.f_min) << ',' << format_number(f.t) << ',' << f.df << ','
        << format_number(f.p_value) << ',' << format_number(f.srmr) << ',' << format_number(f.cfi) << ','
        << format_number(f.rmsea) << ',' << format_number(f.cr_min) << ',' << format_number(f.ave_min);
    for (const auto& flag : f.flags) out << ',' << flag_text(flag);
    out << '\n';
  }
}

void write_summary(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << kConditionHeader
      << ",dgp_kind,assumed_kind,estimator,path,truth,mean,bias,variance,mse,n_attempts,n_admissible,"
         "inadmissibility_pct";
  for (auto c : kCriteria) out << ",flag_rate_" << to_string(c);
  out << ",truncated,estimable\n";
  for (const auto& r : rows)
    for (std::size_t j = 0; j < r.paths.size(); ++j) {
      const PathStats& p = r.paths[j];
      put_cell(out, r);
      out << ',' << path_name(j) << ',' << format_number(p.truth) << ',' << format_number(p.mean) << ','
          << format_number(p.bias) << ',' << format_number(p.variance) << ',' << format_number(p.mse) << ','
          << r.n_attempts << ',' << r.n_admissible << ',' << format_number(r.inadmissibility);
      for (double rate : r.flag_rate) out << ',' << format_number(rate);
      out << ',' << (r.truncated ? 1 : 0) << ',' << (r.estimable ? 1 : 0) << '\n';
    }
}

void write_plot_bias(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << kConditionHeader << ",dgp_kind,assumed_kind,estimator,path,bias,variance,mse\n";
  for (const auto& r : rows)
    for (std::size_t j = 0; j < r.paths.size(); ++j) {
      put_cell(out, r);
      out << ',' << path_name(j) << ',' << format_number(r.paths[j].bias) << ','
          << format_number(r.paths[j].variance) << ',' << format_number(r.paths[j].mse) << '\n';
    }
}

void write_plot_inadmissible(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << kConditionHeader << ",dgp_kind,assumed_kind,estimator,n_attempts,n_admissible,inadmissibility_pct\n";
  for (const auto& r : rows) {
    put_cell(out, r);
    out << ',' << r.n_attempts << ',' << r.n_admissible << ',' << format_number(r.inadmissibility) << '\n';
  }
}

void write_plot_flags(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << kConditionHeader << ",dgp_kind,assumed_kind,estimator,criterion,flag_rate,n_admissible\n";
  for (const auto& r : rows)
    for (std::size_t c = 0; c < kCriteria.size(); ++c) {
      put_cell(out, r);
      out << ',' << to_string(kCriteria[c]) << ',' << format_number(r.flag_rate[c]) << ',' << r.n_admissible
          << '\n';
    }
}

void write_fisher(std::ostream& out, const std::vector<FisherOutcome>& outcomes) {
  out << kConditionHeader
      << ",dgp_kind,assumed_kind,estimator,expected_consistent,admissible,reason_codes,beta1_std,beta2_std,"
         "beta3_std,max_deviation,pass\n";
  for (const auto& o : outcomes) {
    put_condition(out, o.condition);
    out << ',' << to_string(o.dgp_kind) << ',' << to_string(o.assumed_kind) << ',' << to_string(o.estimator)
        << ',' << (o.expected_consistent ? 1 : 0) << ',' << (o.admissible ? 1 : 0) << ','
        << join_reasons(o.reasons);
    for (double p : o.paths) out << ',' << format_number(p);
    out << ',' << format_number(o.max_deviation) << ',' << (o.pass ? 1 : 0) << '\n';
  }
}

void write_conditions(std::ostream& out, const std::vector<DesignCondition>& conditions) {
  out << kConditionHeader << '\n';
  for (const auto& c : conditions) {
    put_condition(out, c);
    out << '\n';
  }
}

void write_study(const std::filesystem::path& dir, const StudyOutput& output) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
  auto write = [&](const char* name, auto&& fn) {
    const auto path = dir / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
    fn(f);
    f.flush();
    if (!f) throw std::runtime_error("write to " + path.string() + " failed");
  };
  write("records.csv", [&](std::ostream& o) { write_records(o, output.records); });
  write("summary.csv", [&](std::ostream& o) { write_summary(o, output.summary); });
  write("plotdata_bias.csv", [&](std::ostream& o) { write_plot_bias(o, output.summary); });
  write("plotdata_inadmissible.csv", [&](std::ostream& o) { write_plot_inadmissible(o, output.summary); });
  write("plotdata_flags.csv", [&](std::ostream& o) { write_plot_flags(o, output.summary); });
}

}  // namespace icmsim::csv
