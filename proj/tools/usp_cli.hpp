#pragma once

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <usp/usp.hpp>

#include "csv.hpp"

namespace usp::cli {

using json = nlohmann::ordered_json;

class UsageError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

enum ExitCode
{
  exit_ok = 0,
  exit_usage = 2,
  exit_internal = 3,
};

namespace detail {

struct Invocation
{
  std::string command;
  std::vector<std::string> argv;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  std::string started_utc;
};

inline std::string
utc_now()
{
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

inline std::string
read_file(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw DataError("cannot open input file '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

//! --seed, else USP_SEED, else 1.
inline std::uint64_t
resolve_seed(const std::optional<std::uint64_t>& flag)
{
  if (flag)
    return *flag;
  if (const char* env = std::getenv("USP_SEED")) {
    std::uint64_t v = 0;
    const std::string_view s(env);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
      throw UsageError("USP_SEED is not an unsigned integer");
    return v;
  }
  return 1;
}

//! The argument vector with an explicit --seed, so a replay does not depend
//! on the environment.
inline std::vector<std::string>
resolved_argv(std::vector<std::string> argv, std::uint64_t seed, bool has_flag)
{
  if (!has_flag) {
    argv.push_back("--seed");
    argv.push_back(std::to_string(seed));
  }
  return argv;
}

inline json
manifest(const Invocation& inv, const json& config, std::uint64_t seed,
         const std::string& digest)
{
  json m;
  m["command"] = inv.command;
  m["config"] = config;
  m["seed"] = seed;
  m["version"] = usp::version;
  m["input_digest"] = digest.empty() ? json(nullptr) : json("fnv1a64:" + digest);
  m["argv"] = inv.argv;
  const double elapsed =
    std::chrono::duration<double>(std::chrono::steady_clock::now() - inv.start).count();
  m["wall_clock"] = { { "started_utc", inv.started_utc }, { "elapsed_seconds", elapsed } };
  return m;
}

inline json
null_summary(const std::vector<double>& v)
{
  json s;
  s["count"] = v.size();
  if (v.empty())
    return s;
  double lo = v.front(), hi = v.front();
  numeric::PairwiseAccumulator sum;
  for (double x : v) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
    sum.add(x);
  }
  const double mean = sum.total() / static_cast<double>(v.size());
  numeric::PairwiseAccumulator ss;
  for (double x : v)
    ss.add((x - mean) * (x - mean));
  s["mean"] = mean;
  s["sd"] = v.size() > 1 ? std::sqrt(ss.total() / static_cast<double>(v.size() - 1)) : 0.0;
  s["min"] = lo;
  s["max"] = hi;
  return s;
}

inline json
result_json(const TestResult& r, bool emit_nulls)
{
  json j;
  j["method"] = r.method;
  j["statistic"] = r.statistic;
  if (r.p_asymptotic) {
    j["p_value"] = *r.p_asymptotic;
    j["degrees_of_freedom"] = r.degrees_of_freedom;
  } else {
    j["p_value"] = r.p_value.str();
    j["p_value_decimal"] = r.p_value.value();
  }
  j["reject"] = r.reject;
  j["alpha"] = r.alpha;
  if (!r.p_asymptotic)
    j["B"] = r.B;
  if (!r.levels.empty()) {
    j["B_requested"] = r.B_requested;
    j["B_raised"] = r.B_raised;
    j["tests"] = r.gamma;
    j["threshold"] = r.threshold;
    j["selected_level"] = r.levels[r.selected_level].label;
    json levels = json::array();
    for (const auto& l : r.levels)
      levels.push_back({ { "level", l.label },
                         { "truncation_size", l.truncation_size },
                         { "statistic", l.statistic },
                         { "p_value", l.p_value.str() },
                         { "p_value_decimal", l.p_value.value() } });
    j["per_level"] = levels;
  }
  if (!r.p_asymptotic)
    j["null_stats_summary"] = null_summary(r.null_statistics);
  if (emit_nulls && !r.null_statistics.empty())
    j["null_statistics"] = r.null_statistics;
  if (!r.warnings.empty())
    j["warnings"] = r.warnings;
  return j;
}

inline std::string
csv_bool(bool b)
{
  return b ? "true" : "false";
}

inline std::string
test_csv(const TestResult& r)
{
  std::ostringstream s;
  s << "statistic,p_value,p_value_decimal,reject,alpha,B\n";
  s << format_double(r.statistic) << ',' << r.p_value.str() << ','
    << format_double(r.p_value.value()) << ',' << csv_bool(r.reject) << ','
    << format_double(r.alpha) << ',' << r.B << '\n';
  return s.str();
}

//! Resolves a comma-separated list of header names or 1-based positions.
inline std::vector<std::size_t>
resolve_columns(const std::string& list, const std::vector<std::string>& header)
{
  std::vector<std::size_t> out;
  std::stringstream ss(list);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const auto t = std::string(trim(tok));
    if (t.empty())
      continue;
    auto it = std::find(header.begin(), header.end(), t);
    if (it != header.end()) {
      out.push_back(static_cast<std::size_t>(it - header.begin()));
      continue;
    }
    std::size_t pos = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), pos);
    if (ec == std::errc() && ptr == t.data() + t.size() && pos >= 1 &&
        pos <= header.size()) {
      out.push_back(pos - 1);
      continue;
    }
    throw DataError("missing column '" + t + "'");
  }
  if (out.empty())
    throw UsageError("empty column list");
  return out;
}

inline Points
extract(const CsvTable& t, const std::vector<std::size_t>& cols)
{
  Points p(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c)
      p(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
        parse_double(t.rows[r][cols[c]], r + 2, t.header[cols[c]]);
  return p;
}

inline void
emit(std::ostream& out, const json& j)
{
  out << j.dump(2) << '\n';
}

inline void
write_manifest_file(const std::string& path, const json& m)
{
  if (path.empty())
    return;
  std::ofstream f(path, std::ios::binary);
  if (!f)
    throw DataError("cannot write manifest file '" + path + "'");
  f << m.dump(2) << '\n';
}

//! Inclusive grid START:STOP:STEP.
inline std::vector<double>
parse_grid(const std::string& text)
{
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ':'))
    parts.push_back(parse_double(tok, 0, "--param-grid"));
  if (parts.size() != 3)
    throw UsageError("--param-grid expects START:STOP:STEP");
  const double a = parts[0], b = parts[1], step = parts[2];
  if (b < a)
    throw UsageError("--param-grid: STOP is below START");
  if (a == b)
    return { a };
  if (!(step > 0.0))
    throw UsageError("--param-grid: STEP must be positive");
  std::vector<double> g;
  const auto count = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9));
  for (std::size_t i = 0; i <= count; ++i)
    g.push_back(a + static_cast<double>(i) * step);
  return g;
}

struct CommonFlags
{
  std::size_t B = 99;
  double alpha = 0.05;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  std::string format = "json";
  std::string manifest_out;
};

inline void
add_common(CLI::App* app, CommonFlags& f, const std::string& default_format)
{
  f.format = default_format;
  app->add_option("--B", f.B, "Number of permutations")->capture_default_str();
  app->add_option("--alpha", f.alpha, "Test level")->capture_default_str();
  app->add_option("--seed", f.seed, "Master seed (fallback: USP_SEED, then 1)");
  app->add_option("--threads", f.threads, "Worker threads (0: all cores)")
    ->capture_default_str();
  app->add_option("--format", f.format, "Output format")
    ->check(CLI::IsMember({ "json", "csv" }))
    ->capture_default_str();
  app->add_option("--manifest-out", f.manifest_out,
                  "Also write the run manifest to this file");
}

inline TestConfig
test_config(const CommonFlags& f, std::uint64_t seed)
{
  TestConfig c;
  c.B = f.B;
  c.alpha = f.alpha;
  c.seed = seed;
  c.threads = f.threads;
  return c;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct TestFlags
{
  detail::CommonFlags common;
  std::string input;
  std::string x_cols;
  std::string y_cols;
  std::string basis = "fourier";
  std::optional<int> M;
  bool adaptive = false;
  double beta = 0.2;
  std::string adaptive_mode = "single";
  int L = 2;
  std::optional<std::size_t> grid_points;
  bool reference = false;
  bool emit_nulls = false;
};

inline int
cmd_test(const TestFlags& f, detail::Invocation inv, std::ostream& out)
{
  using namespace detail;
  const std::uint64_t seed = resolve_seed(f.common.seed);
  inv.argv = resolved_argv(inv.argv, seed, f.common.seed.has_value());
  const std::string text = read_file(f.input);
  const auto table = parse_csv(text);
  const std::size_t width = table.header.size();

  std::vector<std::size_t> xc;
  std::vector<std::size_t> yc;
  if (!f.x_cols.empty())
    xc = resolve_columns(f.x_cols, table.header);
  if (!f.y_cols.empty())
    yc = resolve_columns(f.y_cols, table.header);
  if (xc.empty() || yc.empty()) {
    std::size_t half = 0;
    if (f.basis == "bm")
      half = f.grid_points.value_or(width / 2);
    else if (width == 2)
      half = 1;
    if (half == 0 || 2 * half != width || !xc.empty() || !yc.empty())
      throw UsageError("--x-cols and --y-cols are required for this input");
    for (std::size_t c = 0; c < half; ++c) {
      xc.push_back(c);
      yc.push_back(half + c);
    }
  }
  if (f.basis == "bm" && f.grid_points &&
      (xc.size() != *f.grid_points || yc.size() != *f.grid_points))
    throw UsageError("Brownian input needs --grid-points columns per side");
  PairedSample sample(extract(table, xc), extract(table, yc));

  TestConfig cfg = test_config(f.common, seed);
  cfg.reference = f.reference;
  json config;
  config["input"] = f.input;
  const auto names = [&](const std::vector<std::size_t>& cols) {
    std::vector<std::string> v;
    for (auto c : cols)
      v.push_back(table.header[c]);
    return v;
  };
  config["x_cols"] = names(xc);
  config["y_cols"] = names(yc);
  config["basis"] = f.basis;
  config["B"] = f.common.B;
  config["alpha"] = f.common.alpha;
  config["reference"] = f.reference;

  TestResult result;
  if (f.basis == "bm") {
    if (f.adaptive)
      throw UsageError("--adaptive requires the Fourier basis");
    if (!f.M)
      throw UsageError("--M is required");
    config["M"] = *f.M;
    config["L"] = f.L;
    config["grid_points"] = xc.size();
    BmCoefficientConfig{ f.L, xc.size() }.validate();
    result = usp_test(sample, brownian_truncation(f.L, *f.M), BrownianBasis{},
                      BrownianBasis{}, cfg);
  } else {
    FourierBasis bx(xc.size());
    FourierBasis by(yc.size());
    bx.check_points(sample.x);
    by.check_points(sample.y);
    if (f.adaptive) {
      AdaptiveConfig a;
      a.beta = f.beta;
      a.dX = xc.size();
      a.dY = yc.size();
      a.mode = f.adaptive_mode == "sobolev" ? AdaptiveMode::sobolev
                                            : AdaptiveMode::single_axis;
      config["adaptive"] = { { "mode", f.adaptive_mode }, { "beta", f.beta } };
      result = a.mode == AdaptiveMode::sobolev ? adaptive_sobolev_test(sample, cfg, a)
                                               : adaptive_test_fourier(sample, cfg, a);
    } else {
      if (!f.M)
        throw UsageError("--M or --adaptive is required");
      config["M"] = *f.M;
      result = usp_test(sample, sobolev_truncation(*f.M, *f.M, xc.size(), yc.size()),
                        bx, by, cfg);
    }
  }
  config["n"] = sample.size();
  config["threads"] = f.common.threads;
  const json m = manifest(inv, config, seed, fnv1a_hex(text));
  write_manifest_file(f.common.manifest_out, m);
  if (f.common.format == "csv") {
    out << test_csv(result);
    return exit_ok;
  }
  json j = result_json(result, f.emit_nulls);
  j["manifest"] = m;
  emit(out, j);
  return exit_ok;
}

struct TableFlags
{
  detail::CommonFlags common;
  std::string input;
  std::string pearson;
  bool emit_nulls = false;
};

inline int
cmd_test_table(const TableFlags& f, detail::Invocation inv, std::ostream& out)
{
  using namespace detail;
  const std::uint64_t seed = resolve_seed(f.common.seed);
  inv.argv = resolved_argv(inv.argv, seed, f.common.seed.has_value());
  const std::string text = read_file(f.input);
  const auto csv = parse_csv(text);
  if (csv.rows.empty())
    throw DataError("count table has no rows");
  std::vector<std::int64_t> counts;
  for (std::size_t r = 0; r < csv.rows.size(); ++r)
    for (std::size_t c = 0; c < csv.header.size(); ++c)
      counts.push_back(parse_count(csv.rows[r][c], r + 2, csv.header[c]));
  const ContingencyTable table(csv.rows.size(), csv.header.size(), std::move(counts));
  const TestConfig cfg = test_config(f.common, seed);
  const auto result = usp_test_discrete(table, cfg);

  json config;
  config["input"] = f.input;
  config["rows"] = table.rows();
  config["cols"] = table.cols();
  config["n"] = table.total();
  config["B"] = f.common.B;
  config["alpha"] = f.common.alpha;
  config["threads"] = f.common.threads;
  std::optional<TestResult> pearson;
  if (!f.pearson.empty()) {
    config["pearson"] = f.pearson;
    pearson = pearson_chisq_test(table,
                                 f.pearson == "asymptotic" ? PearsonMode::asymptotic
                                                           : PearsonMode::permutation,
                                 cfg);
  }
  const json m = manifest(inv, config, seed, fnv1a_hex(text));
  write_manifest_file(f.common.manifest_out, m);
  if (f.common.format == "csv") {
    out << test_csv(result);
    return exit_ok;
  }
  json j = result_json(result, f.emit_nulls);
  if (pearson)
    j["pearson"] = result_json(*pearson, false);
  j["manifest"] = m;
  emit(out, j);
  return exit_ok;
}

struct PowerCurveFlags
{
  detail::CommonFlags common;
  std::string family;
  std::string grid;
  std::string test;
  std::size_t n = 100;
  int M = 1;
  int L = 2;
  std::size_t reps = 100;
  double beta = 0.2;
  std::size_t series_terms = 100;
  std::size_t grid_points = 1000;
  int omega_x = 1;
  int omega_y = 4;
};

inline FamilyKind
family_kind(const std::string& name)
{
  static const std::map<std::string, FamilyKind> kinds{
    { "frho", FamilyKind::frho },
    { "fomega", FamilyKind::fomega },
    { "sine", FamilyKind::product_sine },
    { "discrete-sparse", FamilyKind::discrete_sparse },
    { "discrete-dense", FamilyKind::discrete_dense },
    { "brownian", FamilyKind::brownian },
  };
  const auto it = kinds.find(name);
  if (it == kinds.end())
    throw UsageError("unknown family '" + name + "'");
  return it->second;
}

inline TestKind
test_kind(const std::string& name)
{
  static const std::map<std::string, TestKind> kinds{
    { "usp", TestKind::usp },
    { "adaptive", TestKind::usp_adaptive },
    { "adaptive-sobolev", TestKind::usp_adaptive_sobolev },
    { "usp-discrete", TestKind::usp_discrete },
    { "pearson-asymptotic", TestKind::pearson_asymptotic },
    { "pearson-permutation", TestKind::pearson_permutation },
  };
  const auto it = kinds.find(name);
  if (it == kinds.end())
    throw UsageError("unknown test '" + name + "'");
  return it->second;
}

inline int
cmd_power_curve(const PowerCurveFlags& f, detail::Invocation inv, std::ostream& out)
{
  using namespace detail;
  const std::uint64_t seed = resolve_seed(f.common.seed);
  inv.argv = resolved_argv(inv.argv, seed, f.common.seed.has_value());
  FamilySpec family;
  family.kind = family_kind(f.family);
  family.omega_x = f.omega_x;
  family.omega_y = f.omega_y;
  family.series_terms = f.series_terms;
  family.grid_points = f.grid_points;
  const std::string test =
    f.test.empty() ? (is_discrete(family.kind) ? "usp-discrete" : "usp") : f.test;
  PowerStudy study;
  study.test = test_kind(test);
  study.n = f.n;
  study.M = f.M;
  study.L = f.L;
  study.config = test_config(f.common, seed);
  study.adaptive.beta = f.beta;
  study.reps = f.reps;
  study.seed = seed;
  study.threads = f.common.threads;
  const auto grid = parse_grid(f.grid);
  const auto curve = estimate_power(family, grid, study);

  json config;
  config["family"] = f.family;
  config["param_grid"] = f.grid;
  config["test"] = test;
  config["n"] = f.n;
  config["M"] = f.M;
  if (family.kind == FamilyKind::brownian) {
    config["L"] = f.L;
    config["series_terms"] = f.series_terms;
    config["grid_points"] = f.grid_points;
  }
  if (family.kind == FamilyKind::product_sine)
    config["omega"] = { f.omega_x, f.omega_y };
  if (study.test == TestKind::usp_adaptive || study.test == TestKind::usp_adaptive_sobolev)
    config["beta"] = f.beta;
  config["B"] = f.common.B;
  config["alpha"] = f.common.alpha;
  config["reps"] = f.reps;
  config["threads"] = f.common.threads;
  const json m = manifest(inv, config, seed, "");
  write_manifest_file(f.common.manifest_out, m);
  if (f.common.format == "csv") {
    out << "parameter,power,se,reps,rejections\n";
    for (const auto& p : curve.points)
      out << format_double(p.parameter) << ',' << format_double(p.power) << ','
          << format_double(p.se) << ',' << p.reps << ',' << p.rejections << '\n';
    return exit_ok;
  }
  json points = json::array();
  for (const auto& p : curve.points)
    points.push_back({ { "parameter", p.parameter },
                       { "power", p.power },
                       { "se", p.se },
                       { "reps", p.reps },
                       { "rejections", p.rejections } });
  json j;
  j["points"] = points;
  j["manifest"] = m;
  emit(out, j);
  return exit_ok;
}

struct ApproxPowerFlags
{
  detail::CommonFlags common;
  std::optional<double> delta;
  std::string family;
  std::optional<double> rho;
  std::optional<std::size_t> n;
  std::optional<int> M;
};

inline int
cmd_approx_power(const ApproxPowerFlags& f, detail::Invocation inv, std::ostream& out)
{
  using namespace detail;
  json config;
  double delta = 0.0;
  if (f.delta) {
    if (!f.family.empty())
      throw UsageError("give either --delta or --family, not both");
    delta = *f.delta;
    config["delta"] = delta;
  } else {
    if (f.family.empty())
      throw UsageError("--delta or --family frho --rho --n --M is required");
    if (f.family != "frho")
      throw UsageError("approx-power supports --family frho only");
    if (!f.rho || !f.n || !f.M)
      throw UsageError("--family frho needs --rho, --n and --M");
    if (!(*f.rho >= 0.0 && *f.rho <= 0.5))
      throw DomainError("rho must lie in [0, 1/2]");
    delta = frho_delta(*f.rho, *f.n, *f.M);
    config["family"] = f.family;
    config["rho"] = *f.rho;
    config["n"] = *f.n;
    config["M"] = *f.M;
  }
  config["B"] = f.common.B;
  config["alpha"] = f.common.alpha;
  json j;
  j["delta"] = delta;
  j["approx_power"] = approx_power(delta, f.common.B, f.common.alpha);
  j["oracle_power"] = oracle_power(delta, f.common.alpha);
  j["s"] = power_shape_s(f.common.B, f.common.alpha);
  j["B"] = f.common.B;
  j["alpha"] = f.common.alpha;
  if (!f.delta) {
    const double sigma2 = sigma_squared({}, *f.M);
    j["sigma_squared_x"] = sigma2;
    j["sigma_squared_y"] = sigma2;
    j["A_x"] = spectrum_a_constant({}, *f.M);
    j["A_y"] = spectrum_a_constant({}, *f.M);
  }
  const json m = manifest(inv, config, 0, "");
  write_manifest_file(f.common.manifest_out, m);
  j["manifest"] = m;
  emit(out, j);
  return exit_ok;
}

int
run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

//! Re-runs the argument vector recorded in a manifest (or in a result that
//! embeds one), after checking that the input file is unchanged.
inline int
cmd_replay(const std::string& path, std::ostream& out, std::ostream& err)
{
  using namespace detail;
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw DataError("manifest is not valid JSON");
  }
  const json& m = doc.contains("manifest") ? doc["manifest"] : doc;
  if (!m.contains("argv") || !m["argv"].is_array())
    throw DataError("manifest has no argv");
  const auto argv = m["argv"].get<std::vector<std::string>>();
  if (argv.empty() || argv.front() == "replay")
    throw DataError("manifest argv does not name a command");
  if (m.contains("input_digest") && m["input_digest"].is_string() &&
      m.contains("config") && m["config"].contains("input")) {
    const auto input = m["config"]["input"].get<std::string>();
    if ("fnv1a64:" + fnv1a_hex(read_file(input)) != m["input_digest"].get<std::string>())
      throw DataError("input '" + input + "' changed since the manifest was written");
  }
  return run(argv, out, err);
}

inline int
run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
  CLI::App app{ "USP permutation test of independence" };
  app.name("usp");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(usp::version));

  TestFlags tf;
  auto* test = app.add_subcommand("test", "Test independence of two column groups in a CSV");
  detail::add_common(test, tf.common, "json");
  test->add_option("--input", tf.input, "CSV file with a header row")->required();
  test->add_option("--x-cols", tf.x_cols, "X columns (names or 1-based positions)");
  test->add_option("--y-cols", tf.y_cols, "Y columns (names or 1-based positions)");
  test->add_option("--basis", tf.basis, "Basis family")
    ->check(CLI::IsMember({ "fourier", "bm" }))
    ->capture_default_str();
  test->add_option("--M", tf.M, "Truncation level");
  test->add_flag("--adaptive", tf.adaptive, "Bonferroni combination over dyadic levels");
  test->add_option("--beta", tf.beta, "Target type II error of the adaptive test")
    ->capture_default_str();
  test->add_option("--adaptive-mode", tf.adaptive_mode, "single or sobolev")
    ->check(CLI::IsMember({ "single", "sobolev" }))
    ->capture_default_str();
  test->add_option("--L", tf.L, "Coefficient levels of the Brownian basis")
    ->capture_default_str();
  test->add_option("--grid-points", tf.grid_points, "Path grid size per side (bm)");
  test->add_flag("--reference", tf.reference, "Use the O(n^4) defining average");
  test->add_flag("--emit-nulls", tf.emit_nulls, "Include all null statistics");

  TableFlags tb;
  auto* table = app.add_subcommand("test-table", "Test independence in a contingency table");
  detail::add_common(table, tb.common, "json");
  table->add_option("--input", tb.input, "CSV of counts, rows are X categories")->required();
  table->add_option("--pearson", tb.pearson, "Also run Pearson's chi-squared test")
    ->check(CLI::IsMember({ "asymptotic", "permutation" }));
  table->add_flag("--emit-nulls", tb.emit_nulls, "Include all null statistics");

  PowerCurveFlags pc;
  auto* curve = app.add_subcommand("power-curve", "Monte Carlo power over a parameter grid");
  detail::add_common(curve, pc.common, "csv");
  curve->add_option("--family", pc.family, "frho, fomega, sine, discrete-sparse, "
                                           "discrete-dense or brownian")->required();
  curve->add_option("--param-grid", pc.grid, "START:STOP:STEP")->required();
  curve->add_option("--test", pc.test, "usp, adaptive, adaptive-sobolev, usp-discrete, "
                                       "pearson-asymptotic or pearson-permutation");
  curve->add_option("--n", pc.n, "Sample size")->capture_default_str();
  curve->add_option("--M", pc.M, "Truncation level")->capture_default_str();
  curve->add_option("--L", pc.L, "Brownian coefficient levels")->capture_default_str();
  curve->add_option("--reps", pc.reps, "Replicates per grid point")->capture_default_str();
  curve->add_option("--beta", pc.beta, "Adaptive type II error target")->capture_default_str();
  curve->add_option("--series-terms", pc.series_terms, "Brownian series length")
    ->capture_default_str();
  curve->add_option("--grid-points", pc.grid_points, "Brownian path grid size")
    ->capture_default_str();
  curve->add_option("--omega-x", pc.omega_x, "Sine family X frequency")->capture_default_str();
  curve->add_option("--omega-y", pc.omega_y, "Sine family Y frequency")->capture_default_str();

  ApproxPowerFlags ap;
  auto* approx = app.add_subcommand("approx-power", "Local power approximation");
  detail::add_common(approx, ap.common, "json");
  approx->add_option("--delta", ap.delta, "Noncentrality");
  approx->add_option("--family", ap.family, "frho");
  approx->add_option("--rho", ap.rho, "Dependence strength of f_rho");
  approx->add_option("--n", ap.n, "Sample size");
  approx->add_option("--M", ap.M, "Rectangle truncation level");

  std::string manifest_path;
  auto* replay = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  replay->add_option("--manifest", manifest_path, "Manifest or result JSON")->required();

  std::vector<std::string> argv_store{ "usp" };
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store)
    argv.push_back(a.data());

  try {
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return exit_ok;
    } catch (const CLI::CallForVersion&) {
      out << usp::version << '\n';
      return exit_ok;
    } catch (const CLI::ParseError& e) {
      err << "error: " << e.what() << '\n';
      return exit_usage;
    }
    detail::Invocation inv;
    inv.argv = args;
    inv.started_utc = detail::utc_now();
    if (test->parsed()) {
      inv.command = "test";
      return cmd_test(tf, inv, out);
    }
    if (table->parsed()) {
      inv.command = "test-table";
      return cmd_test_table(tb, inv, out);
    }
    if (curve->parsed()) {
      inv.command = "power-curve";
      return cmd_power_curve(pc, inv, out);
    }
    if (approx->parsed()) {
      inv.command = "approx-power";
      return cmd_approx_power(ap, inv, out);
    }
    return cmd_replay(manifest_path, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const std::domain_error& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return exit_internal;
  }
}

} // namespace usp::cli
