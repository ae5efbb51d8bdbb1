// Command-line front end: analyze, simulate, compare and idc.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rqna/rqna.hpp"

namespace fs = std::filesystem;
using namespace rqna;

namespace {

constexpr int kExitModel = 1;
constexpr int kExitInput = 2;

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GridOptions {
  std::optional<double> lo, hi;
  std::optional<int> ppd;

  void add(CLI::App* app) {
    app->add_option("--grid-lo", lo, "smallest grid time");
    app->add_option("--grid-hi", hi, "largest grid time");
    app->add_option("--grid-ppd", ppd, "grid points per decade");
  }

  std::optional<GridSpec> spec() const {
    if (!lo && !hi && !ppd) return std::nullopt;
    GridSpec g;
    if (lo) g.lo = *lo;
    if (hi) g.hi = *hi;
    if (ppd) g.points_per_decade = *ppd;
    return g;
  }
};

struct SimOptions {
  double events = 2e6;
  double warmup = 0.2;
  int replications = 10;
  unsigned threads = 0;

  void add(CLI::App* app) {
    app->add_option("--events", events, "expected station visits per replication")->capture_default_str();
    app->add_option("--warmup", warmup, "discarded fraction of each run")->capture_default_str();
    app->add_option("--replications", replications, "independent replications")->capture_default_str();
    app->add_option("--threads", threads, "worker threads (0: all cores)");
  }

  SimConfig config(std::uint64_t seed) const {
    SimConfig c;
    c.events = events;
    c.warmup = warmup;
    c.replications = replications;
    c.threads = threads;
    c.seed = seed;
    return c;
  }
};

NetworkSpec load(const std::string& path, const std::optional<GridSpec>& grid) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  return read_network(in, grid);
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  return out;
}

void emit(const json& doc, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << doc.dump(2) << '\n';
    return;
  }
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
}

void write_flows(const FlowSolution& flows, const fs::path& dir) {
  fs::create_directories(dir);
  const int k = flows.rates.stations();
  for (int i = 0; i < k; ++i) {
    const std::string n = std::to_string(i + 1);
    auto a = open_out(dir / ("arrival_" + n + ".csv"));
    write_csv(a, flows.arrival[static_cast<std::size_t>(i)]);
    auto d = open_out(dir / ("departure_" + n + ".csv"));
    write_csv(d, flows.departure[static_cast<std::size_t>(i)]);
    for (int j = 0; j < k; ++j) {
      const auto& c = flows.flow[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      if (!c) continue;
      auto f = open_out(dir / ("flow_" + n + "_" + std::to_string(j + 1) + ".csv"));
      write_csv(f, *c);
    }
  }
  auto summary = open_out(dir / "flows.json");
  summary << flows_summary_json(flows).dump(2) << '\n';
}

std::optional<FlowRef> parse_flow(const std::string& s) {
  // external:i, departure:i or i:j (one-based)
  const auto colon = s.find(':');
  if (colon == std::string::npos) return std::nullopt;
  const std::string head = s.substr(0, colon);
  const std::string tail = s.substr(colon + 1);
  try {
    if (head == "external") return FlowRef::external(std::stoi(tail) - 1);
    if (head == "departure") return FlowRef::departure(std::stoi(tail) - 1);
    return FlowRef::transfer(std::stoi(head) - 1, std::stoi(tail) - 1);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

Distribution parse_dist(const std::string& name, double rate, std::optional<double> scv) {
  if (name == "exponential" || name == "poisson") return Distribution::exponential(rate);
  if (name == "deterministic") return Distribution::deterministic(rate);
  if (name == "hyperexp2") {
    if (!scv) throw InputError("--dist hyperexp2 needs --scv");
    return Distribution::hyperexponential2(rate, *scv);
  }
  if (name == "fit") {
    if (!scv) throw InputError("--dist fit needs --scv");
    return Distribution::fit(rate, *scv);
  }
  if (name.rfind("erlang", 0) == 0) {
    const std::string k = name.substr(6);
    int shape = 0;
    try {
      std::size_t used = 0;
      shape = std::stoi(k, &used);
      if (used != k.size()) shape = 0;
    } catch (const std::exception&) {
      shape = 0;
    }
    if (shape < 1) throw InputError("unknown distribution '" + name + "' (use erlang<k>, e.g. erlang2)");
    return Distribution::erlang(shape, rate);
  }
  throw InputError("unknown distribution '" + name + "'");
}

std::string pct(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * x);
  return buf;
}

double rel_error(double approx, double sim) { return (approx - sim) / sim; }

void print_compare(std::ostream& os, const NetworkSpec& spec, const NetworkPerformance& plain,
                   const NetworkPerformance& elim, const SimEstimate& sim) {
  char line[256];
  std::snprintf(line, sizeof line, "%-10s %12s %12s %12s %10s %10s %10s\n", "station", "RQNA", "RQNA(elim)",
                "Simulation", "hw", "err", "err(elim)");
  os << line;
  for (std::size_t i = 0; i < plain.stations.size(); ++i) {
    const Interval& s = sim.stations[i].sojourn;
    std::snprintf(line, sizeof line, "%-10s %12.4f %12.4f %12.4f %10s %10s %10s\n", spec.names[i].c_str(),
                  plain.stations[i].sojourn, elim.stations[i].sojourn, s.mean, pct(s.half_width / s.mean).c_str(),
                  pct(rel_error(plain.stations[i].sojourn, s.mean)).c_str(),
                  pct(rel_error(elim.stations[i].sojourn, s.mean)).c_str());
    os << line;
  }
  std::snprintf(line, sizeof line, "%-10s %12.4f %12.4f %12.4f %10s %10s %10s\n", "total", plain.total, elim.total,
                sim.total.mean, pct(sim.total.half_width / sim.total.mean).c_str(),
                pct(rel_error(plain.total, sim.total.mean)).c_str(), pct(rel_error(elim.total, sim.total.mean)).c_str());
  os << line;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust queueing network analyzer"};
  app.require_subcommand(1);
  std::uint64_t seed = 1;
  app.add_option("--seed", seed, "seed for all randomness")->capture_default_str();

  GridOptions grid;
  SimOptions simopt;

  std::string spec_path, out_path, flows_dir, dump_path, plan_path;
  bool eliminate = false;
  double b = kDefaultRqConstant;
  std::string splitting = "printed";
  const auto splitting_check = CLI::IsMember({"printed", "covariance"});

  auto* analyze_cmd = app.add_subcommand("analyze", "approximate steady-state performance");
  analyze_cmd->add_option("--spec", spec_path, "network spec (JSON)")->required();
  analyze_cmd->add_flag("--eliminate", eliminate, "eliminate near-immediate feedback");
  analyze_cmd->add_option("--b", b, "RQ constant")->capture_default_str();
  analyze_cmd->add_option("--splitting", splitting, "splitting correction: printed or covariance")
      ->check(splitting_check)
      ->capture_default_str();
  analyze_cmd->add_option("--out", out_path, "report path (default stdout)");
  analyze_cmd->add_option("--flows-dir", flows_dir, "write per-flow IDC CSVs here");
  analyze_cmd->add_option("--plan", plan_path, "write the elimination plan here");
  analyze_cmd->add_option("--dump-spec", dump_path, "write the parsed spec back out");
  grid.add(analyze_cmd);

  std::vector<std::string> log_specs;
  std::string log_dir;
  auto* simulate_cmd = app.add_subcommand("simulate", "discrete-event simulation");
  simulate_cmd->add_option("--spec", spec_path, "network spec (JSON)")->required();
  simulate_cmd->add_option("--out", out_path, "estimate path (default stdout)");
  simulate_cmd->add_option("--log-flow", log_specs, "flow to log: external:i, departure:i or i:j");
  simulate_cmd->add_option("--log-dir", log_dir, "directory for flow logs")->default_str("flows");
  simulate_cmd->add_option("--dump-spec", dump_path, "write the parsed spec back out");
  simopt.add(simulate_cmd);
  grid.add(simulate_cmd);

  std::string csv_path;
  auto* compare_cmd = app.add_subcommand("compare", "RQNA, RQNA with elimination and simulation side by side");
  compare_cmd->add_option("--spec", spec_path, "network spec (JSON)")->required();
  compare_cmd->add_option("--b", b, "RQ constant")->capture_default_str();
  compare_cmd->add_option("--splitting", splitting, "splitting correction: printed or covariance")
      ->check(splitting_check)
      ->capture_default_str();
  compare_cmd->add_option("--out", out_path, "JSON with all three results");
  compare_cmd->add_option("--dump-spec", dump_path, "write the parsed spec back out");
  simopt.add(compare_cmd);
  grid.add(compare_cmd);

  std::string dist_name, events_path;
  double rate = 1.0;
  std::optional<double> scv;
  auto* idc_cmd = app.add_subcommand("idc", "IDC curve of a renewal process or an event log");
  idc_cmd->add_option("--dist", dist_name, "exponential, erlang<k>, hyperexp2, deterministic or fit");
  idc_cmd->add_option("--rate", rate, "rate (reciprocal mean interval)")->capture_default_str();
  idc_cmd->add_option("--scv", scv, "scv for hyperexp2 and fit");
  idc_cmd->add_option("--events", events_path, "event log, one timestamp per line");
  idc_cmd->add_option("--out", out_path, "CSV path (default stdout)");
  grid.add(idc_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*idc_cmd) {
      if (dist_name.empty() == events_path.empty()) throw InputError("give exactly one of --dist and --events");
      const std::vector<double> points = grid.spec().value_or(GridSpec{}).points();
      IdcCurve curve;
      if (!dist_name.empty()) {
        curve = renewal_idc(parse_dist(dist_name, rate, scv), points);
      } else {
        std::ifstream in(events_path);
        if (!in) throw InputError("cannot open " + events_path);
        IdcEstimate est = idc_from_events(EventLog::read(in), points);
        for (const auto& w : est.warnings) std::cerr << "warning: " << w << '\n';
        curve = est.curve;
      }
      if (out_path.empty() || out_path == "-") {
        write_csv(std::cout, curve);
      } else {
        auto out = open_out(out_path);
        write_csv(out, curve);
      }
      return 0;
    }

    const NetworkSpec spec = load(spec_path, grid.spec());
    validate(spec.model);
    if (!dump_path.empty()) emit(network_to_json(spec), dump_path);

    AnalyzeOptions aopt;
    aopt.b = b;
    aopt.grid = spec.grid;
    aopt.geometric.seed = seed;
    if (splitting == "covariance") aopt.solver.splitting = SplittingCorrection::Covariance;

    if (*analyze_cmd) {
      aopt.eliminate = eliminate;
      const NetworkPerformance perf = analyze(spec.model, aopt);
      for (const auto& w : perf.warnings) std::cerr << "warning: " << w << '\n';
      emit(report_to_json(perf, spec.grid), out_path);
      if (!flows_dir.empty()) write_flows(perf.flows, flows_dir);
      if (!plan_path.empty()) emit(plan_to_json(perf.plan), plan_path);
      return 0;
    }

    if (*simulate_cmd) {
      SimConfig cfg = simopt.config(seed);
      for (const auto& s : log_specs) {
        const auto f = parse_flow(s);
        if (!f) throw InputError("bad --log-flow '" + s + "'");
        cfg.log_flows.push_back(*f);
      }
      const SimEstimate est = simulate(spec.model, cfg);
      emit(sim_to_json(est), out_path);
      for (std::size_t f = 0; f < est.flows.size(); ++f) {
        auto out = open_out(fs::path(log_dir) / (est.flows[f].name() + ".txt"));
        est.logs[f].write(out);
      }
      return 0;
    }

    if (*compare_cmd) {
      aopt.eliminate = false;
      const NetworkPerformance plain = analyze(spec.model, aopt);
      aopt.eliminate = true;
      const NetworkPerformance elim = analyze(spec.model, aopt);
      const SimEstimate est = simulate(spec.model, simopt.config(seed));
      print_compare(std::cout, spec, plain, elim, est);
      if (!out_path.empty()) {
        emit({{"rqna", report_to_json(plain, spec.grid)},
              {"rqna_elim", report_to_json(elim, spec.grid)},
              {"simulation", sim_to_json(est)}},
             out_path);
      }
      return 0;
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    const bool input = e.code() == ErrorCode::ParseError || e.code() == ErrorCode::UnknownDistributionTag ||
                       e.code() == ErrorCode::EmptyLog;
    return input ? kExitInput : kExitModel;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitModel;
  }
  return 0;
}
