#include "kronsampler/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "kronsampler/bounds.hpp"
#include "kronsampler/errors.hpp"
#include "kronsampler/frame_potential.hpp"
#include "kronsampler/instances.hpp"
#include "kronsampler/problem.hpp"
#include "kronsampler/recon.hpp"
#include "kronsampler/samplers.hpp"

namespace kronsampler::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------- helpers

ModeShape parse_shape(const std::string& text) {
  const auto comma = text.find(',');
  const auto x = text.find('x');
  const auto sep = comma != std::string::npos ? comma : x;
  if (sep == std::string::npos) throw ValidationError("shape '" + text + "' must look like N,K");
  try {
    std::size_t used = 0;
    const long long n = std::stoll(text.substr(0, sep), &used);
    if (used != sep) throw std::invalid_argument("n");
    const std::string rest = text.substr(sep + 1);
    const long long k = std::stoll(rest, &used);
    if (used != rest.size()) throw std::invalid_argument("k");
    if (n < 1 || k < 1) throw std::invalid_argument("sign");
    return {static_cast<std::size_t>(n), static_cast<std::size_t>(k)};
  } catch (const std::logic_error&) {
    throw ValidationError("shape '" + text + "' must look like N,K with positive integers");
  }
}

std::vector<std::size_t> parse_budgets(const std::vector<std::string>& items) {
  // accepts plain values and START:STOP:STEP ranges (inclusive)
  std::vector<std::size_t> out;
  for (const auto& item : items) {
    std::vector<long long> parts;
    std::stringstream ss(item);
    std::string part;
    try {
      while (std::getline(ss, part, ':')) {
        std::size_t used = 0;
        parts.push_back(std::stoll(part, &used));
        if (used != part.size()) throw std::invalid_argument(part);
      }
    } catch (const std::logic_error&) {
      throw ValidationError("bad budget '" + item + "'");
    }
    if (parts.size() == 1 && parts[0] > 0) {
      out.push_back(static_cast<std::size_t>(parts[0]));
    } else if (parts.size() == 3 && parts[0] > 0 && parts[2] > 0 && parts[1] >= parts[0]) {
      for (long long b = parts[0]; b <= parts[1]; b += parts[2]) out.push_back(static_cast<std::size_t>(b));
    } else {
      throw ValidationError("bad budget '" + item + "' (use L or START:STOP:STEP)");
    }
  }
  return out;
}

EnsembleKind parse_kind(const std::string& kind) {
  if (kind == "gaussian") return EnsembleKind::gaussian;
  if (kind == "signed" || kind == "sign-condition") return EnsembleKind::sign_condition;
  throw ValidationError("unknown ensemble kind '" + kind + "' (gaussian|signed)");
}

std::vector<FactorMatrix> load_factors(const std::vector<std::string>& paths) {
  if (paths.empty()) throw ValidationError("--factors needs at least one CSV file");
  std::vector<FactorMatrix> out;
  for (const auto& p : paths) out.emplace_back(read_matrix_csv(fs::path(p)));
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw ValidationError("cannot write " + path);
  f << text;
  if (!f) throw ValidationError("write failed for " + path);
}

json read_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open " + path);
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

std::string fmt17(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string fmt6(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

// JSON has no infinity; non-finite values become null.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// Sizes of every mode joined by '+', for summaries.
std::string sizes_string(const Selection& sel) {
  std::string s;
  for (std::size_t r = 0; r < sel.modes.size(); ++r) {
    if (r) s += '+';
    s += std::to_string(sel.modes[r].size());
  }
  return s;
}

const std::vector<std::string> kAlgorithms{"ffw", "framesense", "greedyfp", "random", "exhaustive"};

struct RunOptions {
  std::uint64_t seed = 0;
  Objective objective = Objective::fp;
  std::uint64_t guard = kDefaultEnumerationGuard;
};

Selection run_algorithm(const std::string& algo, const ProblemInstance& inst, const RunOptions& opt) {
  if (algo == "ffw") {
    return inst.modes() == 1 ? ffw_vector(inst.factor(0), inst.budget()) : ffw_tensor(inst);
  }
  if (algo == "framesense") {
    if (inst.modes() != 1) throw ValidationError("framesense is single-mode; use greedyfp for tensors");
    return frame_sense(inst.factor(0), inst.budget());
  }
  if (algo == "greedyfp") return greedy_fp_tensor(inst);
  if (algo == "random") return random_selection(inst, opt.seed);
  if (algo == "exhaustive") return exhaustive_optimum(inst, opt.objective, opt.guard);
  throw ValidationError("unknown algorithm '" + algo + "'");
}

Objective parse_objective(const std::string& s) {
  if (s == "fp") return Objective::fp;
  if (s == "mse") return Objective::mse;
  throw ValidationError("unknown objective '" + s + "' (fp|mse)");
}

struct Oracle {
  bool exhaustive = false;
  std::size_t draws = 10000;
};

Oracle parse_oracle(const std::string& s) {
  if (s == "exhaustive") return {true, 0};
  const std::string prefix = "random:";
  if (s.rfind(prefix, 0) == 0) {
    try {
      std::size_t used = 0;
      const long long n = std::stoll(s.substr(prefix.size()), &used);
      if (used == s.size() - prefix.size() && n > 0) return {false, static_cast<std::size_t>(n)};
    } catch (const std::logic_error&) {
    }
  }
  throw ValidationError("oracle must be 'exhaustive' or 'random:COUNT', got '" + s + "'");
}

/// Reference optimum for a bound; second member is the surrogate flag.
std::pair<Selection, bool> reference_optimum(const ProblemInstance& inst, const Oracle& oracle,
                                             std::uint64_t seed, std::uint64_t guard) {
  if (oracle.exhaustive) return {exhaustive_optimum(inst, Objective::fp, guard), false};
  return {best_of_random(inst, Objective::fp, oracle.draws, seed), true};
}

// ---------------------------------------------------------------- gen

struct GenArgs {
  std::string kind = "gaussian";
  std::vector<std::string> shapes;
  std::uint64_t seed = 0;
  std::size_t trials = 1;
  std::string out_dir = ".";
};

int cmd_gen(const GenArgs& a, std::ostream& out) {
  EnsembleSpec spec;
  spec.kind = parse_kind(a.kind);
  for (const auto& s : a.shapes) spec.shapes.push_back(parse_shape(s));
  spec.seed = a.seed;
  spec.trials = a.trials;
  validate_spec(spec);

  const fs::path dir(a.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create " + dir.string() + ": " + ec.message());
  std::size_t files = 0;
  for (std::size_t t = 0; t < spec.trials; ++t) {
    const auto factors = generate(spec, t);
    for (std::size_t r = 0; r < factors.size(); ++r) {
      std::ostringstream name;
      name << "trial_" << std::setw(4) << std::setfill('0') << t << "_mode_" << (r + 1) << ".csv";
      write_matrix_csv(dir / name.str(), factors[r]);
      ++files;
    }
  }
  write_text((dir / "spec.json").string(), ensemble_spec_to_json(spec).dump(2) + "\n");
  out << "wrote " << files << " factor files to " << dir.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- select

struct SelectArgs {
  std::string algo;
  std::size_t budget = 0;
  std::vector<std::string> factors;
  std::uint64_t seed = 0;
  std::string objective = "fp";
  std::uint64_t guard = kDefaultEnumerationGuard;
  std::string out;
};

int cmd_select(const SelectArgs& a, std::ostream& out, std::ostream& err) {
  const ProblemInstance inst(load_factors(a.factors), a.budget);
  RunOptions opt{a.seed, parse_objective(a.objective), a.guard};
  const auto t0 = std::chrono::steady_clock::now();
  const Selection sel = run_algorithm(a.algo, inst, opt);
  const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  validate_selection(inst, sel);

  const std::string text = selection_to_json(sel).dump(2) + "\n";
  std::ostream& summary = a.out.empty() ? err : out;
  if (a.out.empty()) {
    out << text;
  } else {
    write_text(a.out, text);
  }
  summary << a.algo << ": fp=" << fmt6(frame_potential_product(inst, sel)) << " sizes=" << sizes_string(sel)
          << " elapsed=" << fmt6(elapsed) << "s\n";
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string selection;
  std::vector<std::string> factors;
  std::string metric = "both";
  std::string format = "json";
  std::string out;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  if (a.metric != "fp" && a.metric != "mse" && a.metric != "both") {
    throw ValidationError("--metric must be fp, mse or both");
  }
  if (a.format != "json" && a.format != "csv") throw ValidationError("--format must be json or csv");
  const auto factors = load_factors(a.factors);
  const Selection sel = selection_from_json(read_json(a.selection));
  const ProblemInstance inst(factors, sel.size());
  validate_selection(inst, sel);

  std::optional<double> fp;
  std::optional<double> mse_value;
  std::string error;
  std::optional<std::size_t> bad_mode;
  int code = kExitOk;
  if (a.metric != "mse") fp = frame_potential_product(inst, sel);
  if (a.metric != "fp") {
    try {
      mse_value = mse(inst, sel);
    } catch (const SingularityError& e) {
      error = e.what();
      bad_mode = e.mode() + 1;
      code = kExitNumerical;
    }
  }

  std::ostringstream os;
  if (a.format == "json") {
    json j{{"algorithm", sel.algorithm}, {"shapes", inst.shape_string()}, {"budget", inst.budget()}};
    if (a.metric != "mse") j["fp"] = *fp;
    if (a.metric != "fp") j["mse"] = mse_value ? json(*mse_value) : json(nullptr);
    j["status"] = error.empty() ? "ok" : "singular";
    if (!error.empty()) {
      j["error"] = error;
      j["mode"] = *bad_mode;
    }
    os << j.dump(2) << '\n';
  } else {
    os << "algorithm,shapes,budget,fp,mse,status,error\n";
    os << sel.algorithm << ',' << inst.shape_string() << ',' << inst.budget() << ','
       << (fp ? fmt17(*fp) : "") << ',' << (mse_value ? fmt17(*mse_value) : "") << ','
       << (error.empty() ? "ok" : "singular") << ",\"" << error << "\"\n";
  }
  if (a.out.empty()) {
    out << os.str();
  } else {
    write_text(a.out, os.str());
  }
  return code;
}

// ---------------------------------------------------------------- bound

struct BoundArgs {
  std::string kind;
  std::vector<std::string> factors;
  std::size_t budget = 0;
  std::string oracle = "random:10000";
  std::uint64_t seed = 0;
  std::uint64_t guard = kDefaultEnumerationGuard;
  std::string format = "json";
  std::string out;
};

int cmd_bound(const BoundArgs& a, std::ostream& out) {
  if (a.format != "json" && a.format != "csv") throw ValidationError("--format must be json or csv");
  const ProblemInstance inst(load_factors(a.factors), a.budget);
  const Oracle oracle = parse_oracle(a.oracle);
  BoundReport report{BoundKind::vector_gamma};
  if (a.kind == "gamma" || a.kind == "gratio") {
    if (inst.modes() != 1) throw ValidationError("--kind " + a.kind + " needs a single factor");
    const auto [opt, surrogate] = reference_optimum(inst, oracle, a.seed, a.guard);
    report = a.kind == "gamma" ? check_gamma(inst.factor(0), a.budget, opt, surrogate)
                               : g_ratio_check(inst.factor(0), a.budget, opt, surrogate);
  } else if (a.kind == "tensor") {
    const auto [opt, surrogate] = reference_optimum(inst, oracle, a.seed, a.guard);
    report = check_tensor_bound(inst, ffw_tensor(inst), opt, surrogate);
  } else {
    throw ValidationError("--kind must be gamma, gratio or tensor");
  }
  json signs = json::array();
  for (const auto& f : inst.factors()) signs.push_back(satisfies_sign_condition(f));

  std::string text;
  if (a.format == "json") {
    json j = bound_report_to_json(report);
    j["oracle"] = a.oracle;
    j["sign_condition"] = signs;
    text = j.dump(2) + "\n";
  } else {
    text = bound_report_csv_header() + "\n" + bound_report_to_csv(report) + "\n";
  }
  if (a.out.empty()) {
    out << text;
  } else {
    write_text(a.out, text);
  }
  return kExitOk;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  std::string suite = "custom";
  std::string kind;
  std::vector<std::string> shapes;
  std::vector<std::string> algos;
  std::vector<std::string> budgets;
  std::vector<std::size_t> sizes;  // runtime suite: N values
  std::size_t rank = 40;           // runtime suite: K
  std::optional<std::size_t> trials;
  std::uint64_t seed = 0;
  std::string bound = "none";
  std::string oracle = "random:10000";
  std::string out = "bench.csv";
  std::string aggregate;
};

struct Cell {
  std::vector<ModeShape> shapes;
  std::size_t budget;
};

struct BenchRow {
  std::size_t trial = 0;
  std::string algo;
  std::string shapes;
  std::size_t budget = 0;
  double fp = std::numeric_limits<double>::quiet_NaN();
  double mse = std::numeric_limits<double>::quiet_NaN();
  std::string bound_kind;
  double bound = std::numeric_limits<double>::quiet_NaN();
  double achieved = std::numeric_limits<double>::quiet_NaN();
  std::optional<bool> surrogate;
  std::int64_t wall_time_ns = 0;
  std::uint64_t seed = 0;
  std::string error;
};

std::string shapes_string(const std::vector<ModeShape>& shapes) {
  std::string s;
  for (std::size_t r = 0; r < shapes.size(); ++r) {
    if (r) s += ';';
    s += std::to_string(shapes[r].rows) + "x" + std::to_string(shapes[r].cols);
  }
  return s;
}

std::string row_csv(const BenchRow& r) {
  auto opt = [](double v) { return std::isnan(v) ? std::string() : fmt17(v); };
  std::ostringstream os;
  os << r.trial << ',' << r.algo << ',' << r.shapes << ',' << r.budget << ',' << opt(r.fp) << ',' << opt(r.mse)
     << ',' << r.bound_kind << ',' << opt(r.bound) << ',' << opt(r.achieved) << ','
     << (r.surrogate ? (*r.surrogate ? "true" : "false") : "") << ',' << r.wall_time_ns << ',' << r.seed;
  return os.str();
}

void apply_preset(BenchArgs& a, std::vector<Cell>& cells, EnsembleKind& kind, std::size_t& trials) {
  auto set_default = [](auto& field, auto value) {
    if (field.empty()) field = value;
  };
  if (a.suite == "vector") {
    set_default(a.kind, std::string("signed"));
    set_default(a.shapes, std::vector<std::string>{"200,40"});
    set_default(a.algos, std::vector<std::string>{"ffw", "framesense", "random"});
    set_default(a.budgets, std::vector<std::string>{"45:200:5"});
    trials = a.trials.value_or(100);
  } else if (a.suite == "tensor") {
    set_default(a.kind, std::string("signed"));
    set_default(a.shapes, std::vector<std::string>{"50,10", "60,20", "70,15"});
    set_default(a.algos, std::vector<std::string>{"ffw", "greedyfp", "random"});
    set_default(a.budgets, std::vector<std::string>{"45:180:15"});
    trials = a.trials.value_or(100);
  } else if (a.suite == "runtime") {
    set_default(a.kind, std::string("signed"));
    set_default(a.algos, std::vector<std::string>{"ffw", "framesense"});
    if (a.sizes.empty()) a.sizes = {100, 150, 200, 250, 300, 350, 400};
    trials = a.trials.value_or(10);
  } else if (a.suite == "custom") {
    set_default(a.kind, std::string("gaussian"));
    set_default(a.algos, std::vector<std::string>{"ffw", "random"});
    trials = a.trials.value_or(1);
  } else {
    throw ValidationError("unknown suite '" + a.suite + "' (vector|tensor|runtime|custom)");
  }
  kind = parse_kind(a.kind);
  for (const auto& algo : a.algos) {
    if (std::find(kAlgorithms.begin(), kAlgorithms.end(), algo) == kAlgorithms.end()) {
      throw ValidationError("unknown algorithm '" + algo + "'");
    }
  }
  if (a.suite == "runtime") {
    if (!a.shapes.empty() || !a.budgets.empty()) {
      throw ValidationError("the runtime suite derives shapes and budgets from --sizes (L = N/2)");
    }
    for (std::size_t n : a.sizes) cells.push_back({{{n, a.rank}}, n / 2});
    return;
  }
  if (a.shapes.empty()) throw ValidationError("bench needs --shape (or a preset suite)");
  if (a.budgets.empty()) throw ValidationError("bench needs --budgets (or a preset suite)");
  std::vector<ModeShape> shapes;
  for (const auto& s : a.shapes) shapes.push_back(parse_shape(s));
  for (std::size_t b : parse_budgets(a.budgets)) cells.push_back({shapes, b});
}

int cmd_bench(BenchArgs a, std::ostream& out, std::ostream& err) {
  std::vector<Cell> cells;
  EnsembleKind kind{};
  std::size_t trials = 1;
  apply_preset(a, cells, kind, trials);
  if (trials < 1) throw ValidationError("--trials must be positive");
  if (a.bound != "none" && a.bound != "gamma" && a.bound != "tensor") {
    throw ValidationError("--bound must be none, gamma or tensor");
  }
  const Oracle oracle = parse_oracle(a.oracle);
  for (const auto& c : cells) {
    EnsembleSpec spec{kind, c.shapes, a.seed, trials};
    validate_spec(spec);
    std::size_t floor = 0;
    std::size_t total = 0;
    for (const auto& s : c.shapes) {
      floor += s.cols;
      total += s.rows;
    }
    if (c.budget < floor || c.budget > total) {
      throw ValidationError("budget " + std::to_string(c.budget) + " infeasible for " + shapes_string(c.shapes) +
                            " (need " + std::to_string(floor) + ".." + std::to_string(total) + ")");
    }
    if (a.bound == "gamma" && c.shapes.size() != 1) throw ValidationError("--bound gamma needs a single mode");
  }

  // Work units are (cell, trial); each fills its rows in a fixed slot so the
  // output order does not depend on scheduling.
  const std::size_t units = cells.size() * trials;
  std::vector<std::vector<BenchRow>> results(units);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t u; (u = next.fetch_add(1)) < units;) {
      const Cell& cell = cells[u / trials];
      const std::size_t trial = u % trials;
      const std::uint64_t trial_seed = a.seed + trial;
      const EnsembleSpec spec{kind, cell.shapes, a.seed, trials};
      std::vector<FactorMatrix> factors;
      for (auto& m : generate(spec, trial)) factors.emplace_back(std::move(m));
      const ProblemInstance inst(std::move(factors), cell.budget);
      std::optional<std::pair<Selection, bool>> reference;
      std::string reference_error;
      if (a.bound != "none") {
        try {
          reference = reference_optimum(inst, oracle, trial_seed, kDefaultEnumerationGuard);
        } catch (const Error& e) {
          reference_error = e.what();
        }
      }
      for (const auto& algo : a.algos) {
        BenchRow row;
        row.trial = trial;
        row.algo = algo;
        row.shapes = inst.shape_string();
        row.budget = cell.budget;
        row.seed = trial_seed;
        try {
          const auto t0 = std::chrono::steady_clock::now();
          const Selection sel = run_algorithm(algo, inst, RunOptions{trial_seed, Objective::fp, kDefaultEnumerationGuard});
          const auto t1 = std::chrono::steady_clock::now();
          row.wall_time_ns =
              std::max<std::int64_t>(1, std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
          row.fp = frame_potential_product(inst, sel);
          row.mse = objective_value(inst, sel, Objective::mse);
          if (reference) {
            const BoundReport br = a.bound == "gamma"
                                       ? check_gamma(inst.factor(0), cell.budget, reference->first, reference->second)
                                       : check_tensor_bound(inst, sel, reference->first, reference->second);
            row.bound_kind = std::string(to_string(br.kind));
            row.bound = br.bound_value;
            row.achieved = br.achieved_value;
            row.surrogate = br.surrogate;
          } else if (!reference_error.empty()) {
            row.error = "reference: " + reference_error;
          }
        } catch (const std::exception& e) {
          row.error = e.what();
        }
        results[u].push_back(std::move(row));
      }
    }
  };
  const unsigned threads = std::max(1U, std::min<unsigned>(worker_count(), static_cast<unsigned>(units)));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::ostringstream csv;
  csv << "trial,algo,shapes,budget,fp,mse,bound_kind,bound,achieved,surrogate,wall_time_ns,seed\n";
  json failures = json::array();
  // aggregate per (cell, algo) in cell order
  struct Acc {
    std::vector<double> fp, mse, time;
    std::size_t failed = 0;
  };
  std::vector<std::pair<std::string, Acc>> agg;
  std::map<std::string, std::size_t> agg_index;
  for (const auto& unit : results) {
    for (const auto& row : unit) {
      csv << row_csv(row) << '\n';
      const std::string key = row.algo + "," + row.shapes + "," + std::to_string(row.budget);
      auto [it, inserted] = agg_index.try_emplace(key, agg.size());
      if (inserted) agg.emplace_back(key, Acc{});
      Acc& acc = agg[it->second].second;
      if (!row.error.empty()) {
        ++acc.failed;
        failures.push_back({{"trial", row.trial}, {"algo", row.algo}, {"budget", row.budget}, {"error", row.error}});
        err << "trial " << row.trial << " " << row.algo << " L=" << row.budget << ": " << row.error << '\n';
      }
      if (std::isfinite(row.fp)) acc.fp.push_back(row.fp);
      if (std::isfinite(row.mse)) acc.mse.push_back(row.mse);
      if (row.wall_time_ns > 0) acc.time.push_back(static_cast<double>(row.wall_time_ns));
    }
  }
  write_text(a.out, csv.str());

  auto mean_sd = [](const std::vector<double>& v) -> std::pair<std::string, std::string> {
    if (v.empty()) return {"", ""};
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() < 2) return {fmt17(mean), ""};
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {fmt17(mean), fmt17(std::sqrt(ss / static_cast<double>(v.size() - 1)))};
  };
  std::ostringstream agg_csv;
  agg_csv << "algo,shapes,budget,trials,failed,fp_mean,fp_std,mse_mean,mse_std,mse_finite,wall_time_ns_mean,"
             "wall_time_ns_std\n";
  for (const auto& [key, acc] : agg) {
    const auto [fpm, fps] = mean_sd(acc.fp);
    const auto [msm, mss] = mean_sd(acc.mse);
    const auto [tm, ts] = mean_sd(acc.time);
    agg_csv << key << ',' << trials << ',' << acc.failed << ',' << fpm << ',' << fps << ',' << msm << ',' << mss << ','
            << acc.mse.size() << ',' << tm << ',' << ts << '\n';
  }
  const std::string agg_path = a.aggregate.empty() ? a.out + ".aggregate.csv" : a.aggregate;
  write_text(agg_path, agg_csv.str());

  json grid = json::array();
  for (const auto& c : cells) grid.push_back({{"shapes", shapes_string(c.shapes)}, {"budget", c.budget}});
  json meta{{"suite", a.suite},
            {"kind", a.kind},
            {"algorithms", a.algos},
            {"trials", trials},
            {"base_seed", a.seed},
            {"seed_rule", "trial seed = base seed + trial index"},
            {"grid", grid},
            {"bound", a.bound},
            {"oracle", a.bound == "none" ? json(nullptr) : json(a.oracle)},
            {"workers", threads},
            {"timing", "steady_clock around the selection call only"},
            {"mse_note", "inf marks a rank-deficient selection"},
            {"failures", failures}};
  if (std::find(a.algos.begin(), a.algos.end(), "greedyfp") != a.algos.end()) {
    meta["greedyfp_note"] = greedy_fp_tensor(ProblemInstance({FactorMatrix(Matrix::Identity(2, 1))}, 1)).note;
  }
  write_text(a.out + ".meta.json", meta.dump(2) + "\n");
  out << "wrote " << units * a.algos.size() << " rows to " << a.out << " (" << failures.size() << " failures, "
      << threads << " workers)\n";
  return kExitOk;
}

// ---------------------------------------------------------------- image

struct ImageArgs {
  std::string input;
  std::size_t test_size = 0;
  std::size_t k1 = 40;
  std::size_t k2 = 40;
  std::size_t budget = 400;
  std::string algo = "ffw";
  std::uint64_t seed = 0;
  double noise = 0.0;
  std::string out = "reconstruction.pgm";
  std::string metrics;
};

int cmd_image(const ImageArgs& a, std::ostream& out) {
  Matrix pixels;
  if (!a.input.empty()) {
    pixels = read_pgm(a.input);
  } else if (a.test_size > 0) {
    pixels = synthetic_test_image(a.test_size, a.test_size, a.seed);
  } else {
    throw ValidationError("image needs --input FILE or --test-image SIZE");
  }
  const ImageInstance img = image_to_instance(pixels, a.k1, a.k2);
  const std::size_t h = static_cast<std::size_t>(pixels.rows());
  const std::size_t w = static_cast<std::size_t>(pixels.cols());
  if (a.budget < img.k1 + img.k2 || a.budget > h + w) {
    throw ValidationError("budget " + std::to_string(a.budget) + " infeasible: need " +
                          std::to_string(img.k1 + img.k2) + ".." + std::to_string(h + w));
  }
  const ProblemInstance inst({FactorMatrix(img.u1), FactorMatrix(img.u2)}, a.budget);
  const Selection sel = run_algorithm(a.algo, inst, RunOptions{a.seed, Objective::fp, kDefaultEnumerationGuard});

  const std::vector<Matrix> bases{img.u1, img.u2};
  const Vector f = Eigen::Map<const Vector>(pixels.data(), pixels.size());
  const std::vector<std::size_t> sizes{h, w};
  Vector v = restrict_signal(f, sizes, sel.modes);
  if (a.noise > 0.0) {
    std::mt19937_64 rng(a.seed);
    std::normal_distribution<double> noise(0.0, a.noise);
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) += noise(rng);
  } else if (a.noise < 0.0) {
    throw ValidationError("--noise must be non-negative");
  }
  const auto rec = reconstruct(restrict_bases(bases, sel.modes), v, bases);
  const Matrix out_img = Eigen::Map<const Matrix>(rec.signal.data(), pixels.rows(), pixels.cols());
  write_pgm(a.out, out_img);

  const ErrorMetrics e = error_metrics(f, rec.signal);
  const Matrix approx = img.approximation();
  const ErrorMetrics et = error_metrics(Eigen::Map<const Vector>(approx.data(), approx.size()), rec.signal);
  json j{{"algorithm", sel.algorithm},
         {"height", h},
         {"width", w},
         {"k1", img.k1},
         {"k2", img.k2},
         {"ranks_reduced", img.ranks_reduced},
         {"budget", a.budget},
         {"mode_budgets", sel.mode_sizes()},
         {"samples", v.size()},
         {"noise_sigma", a.noise},
         {"seed", a.seed},
         {"mse", e.mse},
         {"psnr", num(e.psnr)},
         {"relative_error", e.relative_error ? json(*e.relative_error) : json(nullptr)},
         {"mse_vs_truncated", et.mse},
         {"fp", frame_potential_product(inst, sel)},
         {"model_mse", num(mse(inst, sel))},
         {"selection", selection_to_json(sel)}};
  const std::string text = j.dump(2) + "\n";
  if (a.metrics.empty()) {
    out << text;
  } else {
    write_text(a.metrics, text);
    out << sel.algorithm << ": mse=" << fmt6(e.mse) << " psnr=" << fmt6(e.psnr) << " sizes=" << sizes_string(sel)
        << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------- testimage

struct TestImageArgs {
  std::size_t height = 512;
  std::size_t width = 512;
  std::uint64_t seed = 0;
  std::string out = "test.pgm";
};

int cmd_testimage(const TestImageArgs& a, std::ostream& out) {
  write_pgm(a.out, synthetic_test_image(a.height, a.width, a.seed));
  out << "wrote " << a.height << "x" << a.width << " test image to " << a.out << '\n';
  return kExitOk;
}

}  // namespace

unsigned worker_count() {
  if (const char* env = std::getenv("KRONSAMPLER_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1U, std::thread::hardware_concurrency());
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Kronecker-structured sensor selection by frame potential"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "generate random factor ensembles");
  g->add_option("--kind", gen.kind, "gaussian|signed")->capture_default_str();
  g->add_option("--shape", gen.shapes, "N,K per mode (repeatable)")->required();
  g->add_option("--seed", gen.seed)->capture_default_str();
  g->add_option("--trials", gen.trials)->capture_default_str();
  g->add_option("--out-dir", gen.out_dir)->capture_default_str();

  SelectArgs sel;
  auto* s = app.add_subcommand("select", "select sensors");
  s->add_option("--algo", sel.algo, "ffw|framesense|greedyfp|random|exhaustive")
      ->required()
      ->check(CLI::IsMember(kAlgorithms));
  s->add_option("--budget", sel.budget)->required();
  s->add_option("--factors", sel.factors, "factor CSVs, comma separated")->required()->delimiter(',');
  s->add_option("--seed", sel.seed)->capture_default_str();
  s->add_option("--objective", sel.objective, "exhaustive objective: fp|mse")->capture_default_str();
  s->add_option("--guard", sel.guard, "exhaustive enumeration limit")->capture_default_str();
  s->add_option("--out", sel.out, "selection JSON (default stdout)");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "evaluate a selection");
  e->add_option("--selection", ev.selection)->required();
  e->add_option("--factors", ev.factors)->required()->delimiter(',');
  e->add_option("--metric", ev.metric, "fp|mse|both")->capture_default_str();
  e->add_option("--format", ev.format, "json|csv")->capture_default_str();
  e->add_option("--out", ev.out);

  BoundArgs bd;
  auto* b = app.add_subcommand("bound", "check an FFW approximation bound");
  b->add_option("--kind", bd.kind, "gamma|gratio|tensor")->required();
  b->add_option("--factors", bd.factors)->required()->delimiter(',');
  b->add_option("--budget", bd.budget)->required();
  b->add_option("--oracle", bd.oracle, "exhaustive|random:COUNT")->capture_default_str();
  b->add_option("--seed", bd.seed)->capture_default_str();
  b->add_option("--guard", bd.guard)->capture_default_str();
  b->add_option("--format", bd.format, "json|csv")->capture_default_str();
  b->add_option("--out", bd.out);

  BenchArgs bn;
  auto* n = app.add_subcommand("bench", "sweep algorithms x budgets x trials");
  n->add_option("--suite", bn.suite, "vector|tensor|runtime|custom")->capture_default_str();
  n->add_option("--kind", bn.kind, "gaussian|signed");
  n->add_option("--shape", bn.shapes, "N,K per mode (repeatable)");
  n->add_option("--algos", bn.algos)->delimiter(',');
  n->add_option("--budgets", bn.budgets, "L or START:STOP:STEP, comma separated")->delimiter(',');
  n->add_option("--sizes", bn.sizes, "runtime suite: N values")->delimiter(',');
  n->add_option("--rank", bn.rank, "runtime suite: K")->capture_default_str();
  n->add_option("--trials", bn.trials);
  n->add_option("--seed", bn.seed)->capture_default_str();
  n->add_option("--bound", bn.bound, "none|gamma|tensor")->capture_default_str();
  n->add_option("--oracle", bn.oracle, "reference for --bound")->capture_default_str();
  n->add_option("--out", bn.out)->capture_default_str();
  n->add_option("--aggregate", bn.aggregate, "aggregate CSV (default OUT.aggregate.csv)");

  ImageArgs im;
  auto* i = app.add_subcommand("image", "sample and reconstruct a grayscale image");
  i->add_option("--input", im.input, "PGM file");
  i->add_option("--test-image", im.test_size, "use a generated SIZExSIZE test image instead");
  i->add_option("--k1", im.k1)->capture_default_str();
  i->add_option("--k2", im.k2)->capture_default_str();
  i->add_option("--budget", im.budget)->capture_default_str();
  i->add_option("--algo", im.algo)->capture_default_str()->check(CLI::IsMember(kAlgorithms));
  i->add_option("--seed", im.seed)->capture_default_str();
  i->add_option("--noise", im.noise, "measurement noise sigma")->capture_default_str();
  i->add_option("--out", im.out)->capture_default_str();
  i->add_option("--metrics", im.metrics, "metrics JSON (default stdout)");

  TestImageArgs ti;
  auto* t = app.add_subcommand("testimage", "write the generated test image");
  t->add_option("--height", ti.height)->capture_default_str();
  t->add_option("--width", ti.width)->capture_default_str();
  t->add_option("--seed", ti.seed)->capture_default_str();
  t->add_option("--out", ti.out)->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& pe) {
    err << "error: " << pe.what() << '\n';
    return kExitValidation;
  }

  try {
    if (*g) return cmd_gen(gen, out);
    if (*s) return cmd_select(sel, out, err);
    if (*e) return cmd_eval(ev, out);
    if (*b) return cmd_bound(bd, out);
    if (*n) return cmd_bench(bn, out, err);
    if (*i) return cmd_image(im, out);
    if (*t) return cmd_testimage(ti, out);
  } catch (const ValidationError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitValidation;
  } catch (const ResourceError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitResource;
  } catch (const NumericalError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitUnexpected;
  }
  return kExitUnexpected;
}

}  // namespace kronsampler::cli
