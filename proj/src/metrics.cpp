#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "dnnaif/experiment.hpp"

namespace dnnaif {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector json_vec(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

// Mean and sample standard deviation (0 for a single value).
std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

void write_file(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + tmp.string());
    out << text;
    if (!out) throw Error(ErrorKind::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot rename " + tmp.string() + ": " + ec.message());
}

std::string run_stem(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "run_%03zu", index);
  return buf;
}

std::string filter_line(const FilterRecord& r) {
  json j{{"iter", r.iteration},
         {"eval", r.eval_index},
         {"x", vec_json(r.x)},
         {"surrogate", r.surrogate},
         {"f_incumbent", r.f_incumbent}};
  return j.dump();
}

std::string try_line(const TryPointRecord& r) {
  json j{{"iter", r.iteration},
         {"x_incumbent", vec_json(r.x_incumbent)},
         {"x_try", vec_json(r.x_try)},
         {"h", r.h}};
  return j.dump();
}

std::string coverage_file(const std::vector<int>& coverage) {
  std::string out = "tests,unhit\n";
  for (std::size_t i = 0; i < coverage.size(); ++i) {
    out += std::to_string(i + 1) + "," + std::to_string(coverage[i]) + "\n";
  }
  return out;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

}  // namespace

std::string trace_line(const IterationTrace& t) {
  json j;
  j["iter"] = t.iteration;
  j["h"] = t.h;
  j["best_f"] = t.best_f;
  j["best_f_true"] = std::isnan(t.best_f_true) ? json(nullptr) : json(t.best_f_true);
  j["evals"] = t.evals_cumulative;
  j["accepted"] = t.accepted_origin ? json(to_string(*t.accepted_origin)) : json(nullptr);
  j["try_accepted"] = t.try_point_accepted;
  j["x"] = vec_json(t.x);
  return j.dump();
}

IterationTrace parse_trace_line(std::string_view line) {
  try {
    const json j = json::parse(line);
    IterationTrace t;
    t.iteration = j.at("iter").get<std::size_t>();
    t.h = j.at("h").get<double>();
    t.best_f = j.at("best_f").get<double>();
    t.best_f_true = j.at("best_f_true").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                                   : j.at("best_f_true").get<double>();
    t.evals_cumulative = j.at("evals").get<std::size_t>();
    if (!j.at("accepted").is_null()) {
      t.accepted_origin = origin_from_string(j.at("accepted").get<std::string>());
    }
    t.try_point_accepted = j.at("try_accepted").get<bool>();
    t.x = json_vec(j.at("x"));
    return t;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("trace line: ") + e.what());
  }
}

std::vector<IterationTrace> read_traces(const fs::path& path) {
  std::vector<IterationTrace> traces;
  for (const std::string& line : read_lines(path)) traces.push_back(parse_trace_line(line));
  return traces;
}

std::vector<int> read_coverage(const fs::path& path) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty() || lines.front() != "tests,unhit") {
    throw Error(ErrorKind::ParseError, path.string() + ": missing coverage header");
  }
  std::vector<int> coverage;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto comma = lines[i].find(',');
    int value = 0;
    if (comma == std::string::npos ||
        std::from_chars(lines[i].data() + comma + 1, lines[i].data() + lines[i].size(), value)
                .ec != std::errc{}) {
      throw Error(ErrorKind::ParseError, path.string() + ": bad row " + std::to_string(i + 1));
    }
    coverage.push_back(value);
  }
  return coverage;
}

std::vector<GapRow> aggregate_gap(const std::vector<std::vector<IterationTrace>>& runs,
                                  double f_star) {
  std::size_t rows = 0;
  for (const auto& r : runs) rows = std::max(rows, r.size());
  std::vector<GapRow> out;
  for (std::size_t i = 0; i < rows; ++i) {
    std::vector<double> gaps;
    std::vector<double> hs;
    std::vector<double> evals;
    for (const auto& r : runs) {
      if (r.empty()) continue;
      const IterationTrace& t = r[std::min(i, r.size() - 1)];
      const double f = std::isnan(t.best_f_true) ? t.best_f : t.best_f_true;
      gaps.push_back(std::log10(std::max(optimality_gap(f, f_star), kGapFloor)));
      hs.push_back(t.h);
      evals.push_back(static_cast<double>(t.evals_cumulative));
    }
    GapRow row;
    row.iter = i;
    std::tie(row.mean_log10_gap, row.std_log10_gap) = mean_std(gaps);
    row.h = mean_std(hs).first;
    row.mean_evals = mean_std(evals).first;
    out.push_back(row);
  }
  return out;
}

std::vector<CoverageRow> aggregate_coverage(const std::vector<std::vector<int>>& runs) {
  std::size_t rows = 0;
  for (const auto& r : runs) rows = std::max(rows, r.size());
  std::vector<CoverageRow> out;
  for (std::size_t i = 0; i < rows; ++i) {
    std::vector<double> unhit;
    for (const auto& r : runs) {
      if (!r.empty()) unhit.push_back(r[std::min(i, r.size() - 1)]);
    }
    CoverageRow row;
    row.tests = i + 1;
    std::tie(row.mean_unhit, row.std_unhit) = mean_std(unhit);
    out.push_back(row);
  }
  return out;
}

std::string gap_table(const std::vector<GapRow>& rows) {
  std::string out = "iter,h,mean_log10_gap,std_log10_gap,mean_evals\n";
  for (const GapRow& r : rows) {
    out += std::to_string(r.iter) + "," + fmt(r.h) + "," + fmt(r.mean_log10_gap) + "," +
           fmt(r.std_log10_gap) + "," + fmt(r.mean_evals) + "\n";
  }
  return out;
}

std::string coverage_table(const std::vector<CoverageRow>& rows) {
  std::string out = "tests,mean_unhit,std_unhit\n";
  for (const CoverageRow& r : rows) {
    out += std::to_string(r.tests) + "," + fmt(r.mean_unhit) + "," + fmt(r.std_unhit) + "\n";
  }
  return out;
}

namespace detail {

std::vector<fs::path> write_run_files(const RunReport& report, std::size_t index,
                                      const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());
  const RunResult& run = report.runs.at(index);
  const std::string stem = run_stem(index);
  std::vector<fs::path> written;

  std::string traces;
  for (const IterationTrace& t : run.traces) traces += trace_line(t) + "\n";
  written.push_back(dir / (stem + ".jsonl"));
  write_file(written.back(), traces);

  if (report.config.method != Method::Dirichlet) {
    std::string history;
    for (const EvaluationRecord& r : run.history) history += history_line(r) + "\n";
    written.push_back(dir / (stem + "_history.jsonl"));
    write_file(written.back(), history);
  }
  if (report.config.problem == Problem::CdgToy) {
    written.push_back(dir / (stem + "_coverage.csv"));
    write_file(written.back(), coverage_file(run.coverage));
  }
  if (report.config.method == Method::Dnnaif) {
    std::string filter;
    for (const FilterRecord& r : run.filter_log) filter += filter_line(r) + "\n";
    written.push_back(dir / (stem + "_filter.jsonl"));
    write_file(written.back(), filter);
    std::string tries;
    for (const TryPointRecord& r : run.try_log) tries += try_line(r) + "\n";
    written.push_back(dir / (stem + "_try.jsonl"));
    write_file(written.back(), tries);
  }
  return written;
}

}  // namespace detail

std::vector<fs::path> emit_metrics(const RunReport& report, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());
  std::vector<fs::path> written;
  json runs = json::array();
  json seeds = json::array();
  for (std::size_t i = 0; i < report.runs.size(); ++i) {
    const RunResult& run = report.runs[i];
    for (auto& p : detail::write_run_files(report, i, dir)) written.push_back(std::move(p));
    seeds.push_back(run.seed);
    json entry{{"seed", run.seed},
               {"trace", run_stem(i) + ".jsonl"},
               {"history", report.config.method == Method::Dirichlet
                               ? json(nullptr)
                               : json(run_stem(i) + "_history.jsonl")},
               {"evaluations", run.evaluations},
               {"truncated", run.truncated},
               {"training_failures", run.training_failures},
               {"wall_seconds", run.wall_seconds}};
    if (report.config.problem == Problem::CdgToy) entry["coverage"] = run_stem(i) + "_coverage.csv";
    runs.push_back(std::move(entry));
  }

  std::string table;
  if (report.config.problem == Problem::CdgToy) {
    std::vector<std::vector<int>> coverage;
    for (const RunResult& r : report.runs) coverage.push_back(r.coverage);
    table = coverage_table(aggregate_coverage(coverage));
  } else {
    std::vector<std::vector<IterationTrace>> traces;
    for (const RunResult& r : report.runs) traces.push_back(r.traces);
    table = gap_table(aggregate_gap(traces));
  }
  written.push_back(dir / "aggregate.csv");
  write_file(written.back(), table);

  json manifest;
  manifest["config"] = json::parse(config_to_string(report.config));
  manifest["config_hash"] = config_hash(report.config);
  manifest["seeds"] = seeds;
  manifest["runs"] = runs;
  manifest["aggregate"] = "aggregate.csv";
  manifest["aborted"] = report.aborted ? json(*report.aborted) : json(nullptr);
  written.push_back(dir / "manifest.json");
  write_file(written.back(), manifest.dump(2) + "\n");
  return written;
}

}  // namespace dnnaif
