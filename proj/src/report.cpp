#include "asdchat/report.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <map>
#include <set>

#include "asdchat/codec.hpp"
#include "asdchat/error.hpp"
#include "asdchat/text_metrics.hpp"

namespace asdchat::report {

std::vector<MetricRow> parse_metric_rows(std::string_view text, std::string_view default_provenance) {
  std::vector<MetricRow> out;
  size_t line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#' || line.starts_with("subject\t")) continue;
    auto f = split(line, '\t');
    if (f.size() != 4 && f.size() != 5) {
      throw Error(Errc::parse_error, fmt::format("line {}: expected 4 or 5 fields, got {}", line_no, f.size()));
    }
    auto value = parse_number(f[3]);
    if (!value) throw Error(Errc::parse_error, fmt::format("line {}: bad value '{}'", line_no, f[3]));
    if (f[0].empty() || f[2].empty()) throw Error(Errc::parse_error, fmt::format("line {}: empty field", line_no));
    if (f[1] != kAsdChat && f[1] != kInterventionist) {
      throw Error(Errc::parse_error, fmt::format("line {}: unknown condition '{}'", line_no, f[1]));
    }
    out.push_back({std::string(f[0]), std::string(f[1]), std::string(f[2]), *value,
                   std::string(f.size() == 5 && !f[4].empty() ? f[4] : default_provenance)});
  }
  return out;
}

std::string dump_metric_rows(const std::vector<MetricRow>& rows) {
  std::string out = "subject\tcondition\tmetric\tvalue\tprovenance\n";
  for (const auto& r : rows) {
    out += fmt::format("{}\t{}\t{}\t{}\t{}\n", r.subject, r.condition, r.metric, format_double(r.value), r.provenance);
  }
  return out;
}

namespace {

struct Cell {
  std::vector<double> values;
  std::set<std::string> provenance;
};

std::string merge_provenance(const std::set<std::string>& a, const std::set<std::string>& b) {
  std::set<std::string> all = a;
  all.insert(b.begin(), b.end());
  if (all.size() == 1) return *all.begin();
  return "mixed";
}

ComparisonRow make_row(std::string subject, const std::string& metric, double ours, double theirs,
                       std::string provenance, int decimals) {
  ComparisonRow r;
  r.subject = std::move(subject);
  r.metric = metric;
  r.asdchat = ours;
  r.interventionist = theirs;
  r.difference = text::round_half_up(ours - theirs, decimals);
  if (theirs != 0.0) r.percent_difference = text::round_half_up(text::percent_difference(ours, theirs), decimals);
  r.provenance = std::move(provenance);
  return r;
}

}  // namespace

ComparisonReport build_report(const std::vector<MetricRow>& rows, int decimals) {
  std::vector<std::string> metrics;
  // metric -> subject -> condition -> cell
  std::map<std::string, std::map<std::string, std::map<std::string, Cell>>> table;
  std::map<std::string, std::vector<std::string>> subject_order;
  for (const auto& r : rows) {
    if (!table.contains(r.metric)) metrics.push_back(r.metric);
    auto& subjects = table[r.metric];
    if (!subjects.contains(r.subject) && r.subject != kAggregateSubject) subject_order[r.metric].push_back(r.subject);
    auto& cell = subjects[r.subject][r.condition];
    cell.values.push_back(r.value);
    cell.provenance.insert(r.provenance);
  }

  ComparisonReport report;
  std::vector<std::string> missing;
  for (const auto& metric : metrics) {
    const auto& subjects = table[metric];
    std::map<std::string, Cell> pooled;
    for (const auto& [subject, conds] : subjects) {
      for (const auto& [cond, cell] : conds) pooled[cond].provenance.insert(cell.provenance.begin(), cell.provenance.end());
    }
    if (!pooled.contains(std::string(kAsdChat)) || !pooled.contains(std::string(kInterventionist))) {
      missing.push_back(fmt::format("{} (has only {})", metric,
                                    pooled.contains(std::string(kAsdChat)) ? kAsdChat : kInterventionist));
      continue;
    }

    std::map<std::string, std::vector<double>> subject_means;
    std::map<std::string, std::set<std::string>> subject_prov;
    for (const auto& subject : subject_order[metric]) {
      const auto& conds = subjects.at(subject);
      for (const auto& [cond, cell] : conds) {
        subject_means[cond].push_back(text::mean(cell.values));
        subject_prov[cond].insert(cell.provenance.begin(), cell.provenance.end());
      }
      auto a = conds.find(std::string(kAsdChat));
      auto b = conds.find(std::string(kInterventionist));
      if (a == conds.end() || b == conds.end()) continue;
      report.rows.push_back(make_row(subject, metric, text::mean(a->second.values), text::mean(b->second.values),
                                     merge_provenance(a->second.provenance, b->second.provenance), decimals));
    }

    auto agg = subjects.find(std::string(kAggregateSubject));
    if (agg != subjects.end() && agg->second.size() == 2) {
      const auto& a = agg->second.at(std::string(kAsdChat));
      const auto& b = agg->second.at(std::string(kInterventionist));
      report.rows.push_back(make_row(std::string(kAggregateSubject), metric, text::mean(a.values),
                                     text::mean(b.values), merge_provenance(a.provenance, b.provenance), decimals));
    } else if (subject_means.size() == 2) {
      report.rows.push_back(make_row(std::string(kAggregateSubject), metric,
                                     text::mean(subject_means[std::string(kAsdChat)]),
                                     text::mean(subject_means[std::string(kInterventionist)]),
                                     merge_provenance(subject_prov[std::string(kAsdChat)],
                                                      subject_prov[std::string(kInterventionist)]),
                                     decimals));
    } else {
      missing.push_back(fmt::format("{} (no aggregate for one condition)", metric));
    }
  }
  if (!missing.empty()) {
    std::string detail;
    for (const auto& m : missing) detail += (detail.empty() ? "" : "; ") + m;
    throw Error(Errc::missing_condition, detail);
  }
  return report;
}

std::string signed_fixed(double value, int decimals) {
  if (value == 0.0) return fmt::format("{:.{}f}", 0.0, decimals);
  return fmt::format("{:+.{}f}", value, decimals);
}

std::string dump_report_tsv(const ComparisonReport& report, int decimals) {
  std::string out = "subject\tmetric\tasdchat\tinterventionist\tdifference\tpercent_difference\tprovenance\n";
  for (const auto& r : report.rows) {
    out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\n", r.subject, r.metric, format_double(r.asdchat),
                       format_double(r.interventionist), signed_fixed(r.difference, decimals),
                       r.percent_difference ? signed_fixed(*r.percent_difference, decimals) : "",
                       r.provenance);
  }
  return out;
}

std::string format_report_text(const ComparisonReport& report, int decimals) {
  auto line = [&](const ComparisonRow& r) {
    return fmt::format("{}: ASD-Chat {:.{}f} vs interventionist {:.{}f}, difference {}{} [{}]\n", r.metric,
                       text::round_half_up(r.asdchat, decimals), decimals,
                       text::round_half_up(r.interventionist, decimals), decimals,
                       signed_fixed(r.difference, decimals),
                       r.percent_difference ? fmt::format(" ({}%)", signed_fixed(*r.percent_difference, decimals))
                                            : std::string(),
                       r.provenance);
  };
  std::string out = "Aggregate\n";
  for (const auto& r : report.rows) {
    if (r.subject == kAggregateSubject) out += "  " + line(r);
  }
  bool header = false;
  for (const auto& r : report.rows) {
    if (r.subject == kAggregateSubject) continue;
    if (!header) out += "Per subject\n";
    header = true;
    out += fmt::format("  {} {}", r.subject, line(r));
  }
  return out;
}

}  // namespace asdchat::report
