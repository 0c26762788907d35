// Command-line front end: price, reproduce-tables, check, backtest, simulate.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rsprice/bsref.hpp"
#include "rsprice/claim.hpp"
#include "rsprice/hedging.hpp"
#include "rsprice/insurance.hpp"
#include "rsprice/lsmc.hpp"
#include "rsprice/market.hpp"
#include "rsprice/pide.hpp"
#include "rsprice/validity.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rsprice;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kArbitrageFailure = 3;
constexpr int kSolverFailure = 4;

constexpr std::uint64_t kTable2Seed = 20240001;
constexpr std::uint64_t kTable3Seed = 20240002;
constexpr std::uint64_t kTable4Seed = 20240003;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string model;
  std::string claim = "call:100";
  std::string L;
  std::size_t paths = 200000;
  std::size_t steps = 50;
  std::size_t degree = 3;
  std::size_t grid = 400;
  std::string method = "lsmc";
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string out = ".";
  bool force = false;
  std::string responses = "joint";
  double margin = 1e-6;
};

RegimeSet load_model(const std::string& path) {
  if (path.empty()) return build_market(table1_config());
  if (!fs::exists(path)) throw ConfigError("model file '" + path + "' does not exist");
  return build_market(load_market_config(path));
}

SharpeTarget parse_L(const std::string& text, const RegimeSet& m) {
  if (text.empty()) throw ConfigError("--L is required (one Sharpe ratio per state)");
  SharpeTarget L;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      L.L.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("--L entry '" + item + "' is not a number");
    }
  }
  if (L.size() != m.n_states())
    throw ConfigError("--L needs " + std::to_string(m.n_states()) + " values, got " +
                      std::to_string(L.size()));
  return L;
}

fs::path output_dir(const std::string& out) {
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + out + "'");
  return dir;
}

void write_json(const fs::path& file, const json& doc) {
  std::ofstream f(file);
  if (!f) throw ConfigError("cannot write '" + file.string() + "'");
  f << doc.dump(2) << '\n';
}

LsmcConfig lsmc_config(const Common& c) {
  if (c.paths < 1 || c.steps < 1) throw ConfigError("--paths and --steps must be positive");
  LsmcConfig cfg;
  cfg.n_paths = c.paths;
  cfg.n_steps = c.steps;
  cfg.degree = c.degree;
  cfg.seed = c.seed;
  cfg.threads = std::max(1u, c.threads);
  cfg.responses = parse_response_mode(c.responses);
  cfg.sharpe_margin = c.margin;
  return cfg;
}

PriceRange default_range(const RegimeSet& m, const Claim& claim) {
  const double scale = claim.scale(m.s0());
  return {std::min(scale, m.s0()) / 5.0, std::max(scale, m.s0()) * 5.0, 101};
}

json condition_block(const RegimeSet& m, const SharpeTarget& L, const PriceRange& range,
                     ConditionReport* arbitrage_out = nullptr,
                     ConditionReport* monotonicity_out = nullptr) {
  const auto arb = check_arbitrage(m, L, range);
  const auto mono = check_monotonicity(m, L, range);
  const auto simple = check_simple_sufficient(m, L, range);
  if (arbitrage_out) *arbitrage_out = arb;
  if (monotonicity_out) *monotonicity_out = mono;
  return {{"arbitrage", to_json(arb)},
          {"monotonicity", to_json(mono)},
          {"simple_sufficient", to_json(simple)}};
}

json diagnostics_json(const BsdeSolution& sol) {
  json steps = json::array();
  for (const auto& d : sol.diagnostics)
    steps.push_back({{"step", d.step},
                     {"nodes", d.nodes},
                     {"mean_residual_risk", d.mean_residual_risk},
                     {"attainable_fraction", d.attainable_fraction},
                     {"small_jump_control_fraction", d.small_jump_control_fraction},
                     {"winsorized", d.winsorized}});
  return steps;
}

int cmd_price(const Common& c, const std::string& mortality_file, double entry_age,
              const std::string& death_claim, std::uint64_t mortality_seed) {
  const RegimeSet m = load_model(c.model);
  const Claim claim = Claim::parse(c.claim);
  const SharpeTarget L = parse_L(c.L, m);
  const PriceRange range = default_range(m, claim);

  ConditionReport arb, mono;
  json doc;
  doc["claim"] = claim.label();
  doc["L"] = L.L;
  doc["method"] = c.method;
  doc["conditions"] = condition_block(m, L, range, &arb, &mono);
  if (arb.verdict == Verdict::fail && !c.force) {
    std::cerr << "arbitrage condition fails at state " << arb.state + 1 << " (slack "
              << arb.worst_slack << "); rerun with --force to price anyway\n";
    write_json(output_dir(c.out) / "price.json", doc);
    return kArbitrageFailure;
  }
  if (mono.verdict == Verdict::fail)
    std::cerr << "warning: monotonicity condition fails at state " << mono.state + 1 << "\n";

  const fs::path dir = output_dir(c.out);
  if (c.method == "lsmc") {
    const LsmcConfig cfg = lsmc_config(c);
    BsdeSolution sol;
    if (!mortality_file.empty()) {
      const MortalityModel mort = MortalityModel::load_csv(mortality_file, entry_age);
      InsuranceClaim ins;
      ins.survival = claim;
      ins.death = Claim::parse(death_claim);
      sol = price_insurance_lsmc(m, mort, ins, L, cfg, mortality_seed);
      doc["mortality"] = {{"table", mortality_file},
                          {"entry_age", entry_age},
                          {"death_claim", ins.death.label()},
                          {"seed", mortality_seed}};
    } else {
      sol = price_lsmc(m, claim, L, cfg);
    }
    doc["price"] = sol.y0;
    doc["std_error"] = sol.se;
    doc["pathwise_price"] = sol.pathwise_y0;
    doc["controls0"] = {{"Z", sol.controls0.z}, {"U", sol.controls0.u}};
    doc["numerics"] = {{"paths", cfg.n_paths},
                       {"steps", cfg.n_steps},
                       {"degree", cfg.degree},
                       {"responses", to_string(cfg.responses)},
                       {"seed", cfg.seed}};
    doc["diagnostics"] = diagnostics_json(sol);
    std::ofstream csv(dir / "solution.csv");
    sol.write_csv(csv);
  } else if (c.method == "pide") {
    PideConfig cfg;
    cfg.n_space = c.grid;
    cfg.n_time = c.grid;
    cfg.sharpe_margin = c.margin;
    const PideResult res = price_pide(m, claim, L, cfg);
    doc["price"] = res.price;
    doc["max_abs_vs"] = res.max_abs_vs;
    doc["numerics"] = {{"space_nodes", cfg.n_space}, {"time_steps", cfg.n_time},
                       {"s_min", res.s().front()}, {"s_max", res.s().back()}};
    std::ofstream csv(dir / "solution.csv");
    res.write_csv(csv);
  } else {
    throw ConfigError("--method must be lsmc or pide");
  }
  write_json(dir / "price.json", doc);
  std::cout << std::setprecision(6) << doc["price"].get<double>() << '\n';
  return kOk;
}

int cmd_reproduce(const Common& c) {
  const RegimeSet m = build_market(table1_config());
  const fs::path dir = output_dir(c.out);
  Common base = c;

  {
    std::ofstream f(dir / "table3.csv");
    f << "strike,bs_state1,bs_state2,seed\n" << std::fixed << std::setprecision(6);
    for (double q : {80.0, 90.0, 100.0, 110.0, 120.0})
      f << q << ',' << bs_call({m.s0(), q, m.r(0), m.sigma(0), m.horizon()}) << ','
        << bs_call({m.s0(), q, m.r(1), m.sigma(1), m.horizon()}) << ',' << kTable3Seed << '\n';
  }

  auto run_table = [&](std::uint64_t seed) {
    base.seed = seed;
    LsmcConfig cfg = lsmc_config(base);
    SimulationOptions sim{cfg.n_steps, cfg.n_paths, cfg.seed, cfg.threads, false};
    return std::make_pair(cfg, simulate_paths(m, m.s0(), m.j0(), m.horizon(), sim));
  };

  {
    auto [cfg, paths] = run_table(kTable2Seed);
    std::ofstream f(dir / "table2.csv");
    f << "strike,price,std_error,seed\n" << std::setprecision(6);
    for (double q : {80.0, 90.0, 100.0, 110.0, 120.0}) {
      const auto sol = price_lsmc(m, Claim::call(q), SharpeTarget{{0.4, 0.2}}, cfg, paths);
      f << q << ',' << sol.y0 << ',' << sol.se << ',' << kTable2Seed << '\n';
    }
  }
  {
    auto [cfg, paths] = run_table(kTable4Seed);
    std::ofstream f(dir / "table4.csv");
    f << "L1,L2,price,std_error,seed\n" << std::setprecision(6);
    const std::vector<std::pair<double, double>> pairs = {
        {0.24, 0.04}, {0.3, 0.1}, {0.5, 0.3}, {0.7, 0.5}, {1.2, 1.2}};
    for (auto [a, b] : pairs) {
      const auto sol = price_lsmc(m, Claim::call(100.0), SharpeTarget{{a, b}}, cfg, paths);
      f << a << ',' << b << ',' << sol.y0 << ',' << sol.se << ',' << kTable4Seed << '\n';
    }
  }
  std::cout << "wrote table2.csv, table3.csv, table4.csv to " << dir.string() << '\n';
  return kOk;
}

int cmd_check(const Common& c, double s_lo, double s_hi) {
  const RegimeSet m = load_model(c.model);
  const SharpeTarget L = parse_L(c.L, m);
  PriceRange range{s_lo, s_hi, 101};
  if (!(s_lo > 0.0) || !(s_hi >= s_lo)) throw ConfigError("invalid --s-range");
  ConditionReport arb, mono;
  json doc;
  doc["L"] = L.L;
  doc["s_range"] = {s_lo, s_hi};
  doc["theta"] = json::array();
  for (std::size_t i = 0; i < m.n_states(); ++i) doc["theta"].push_back(sharpe_theta(m, i, m.s0()));
  doc["conditions"] = condition_block(m, L, range, &arb, &mono);
  std::string margin_problem;
  try {
    check_sharpe_margin(m, L, c.margin, s_lo, s_hi);
  } catch (const SharpeMarginError& e) {
    margin_problem = e.what();
  }
  doc["sharpe_margin"] = {{"margin", c.margin},
                          {"verdict", margin_problem.empty() ? "pass" : "fail"},
                          {"message", margin_problem}};
  write_json(output_dir(c.out) / "check.json", doc);
  if (!margin_problem.empty()) {
    std::cerr << "config error: " << margin_problem << '\n';
    return kConfigError;
  }
  std::cout << "arbitrage: " << to_string(arb.verdict)
            << "\nmonotonicity: " << to_string(mono.verdict)
            << "\nsimple-sufficient: " << doc["conditions"]["simple_sufficient"]["verdict"].get<std::string>()
            << '\n';
  if (arb.verdict == Verdict::fail) return kArbitrageFailure;
  if (mono.verdict == Verdict::fail)
    std::cerr << "warning: monotonicity condition fails at state " << mono.state + 1 << '\n';
  return kOk;
}

int cmd_backtest(const Common& c, std::size_t test_paths, const std::string& strategy,
                 bool dump) {
  const RegimeSet m = load_model(c.model);
  const Claim claim = Claim::parse(c.claim);
  const SharpeTarget L = parse_L(c.L, m);
  const StrategyKind kind = parse_strategy(strategy);
  if (kind == StrategyKind::custom) throw ConfigError("custom strategies are library-only");
  const LsmcConfig cfg = lsmc_config(c);
  SimulationOptions sim{cfg.n_steps, test_paths, c.seed + 1, cfg.threads, false};
  const PathSet fresh = simulate_paths(m, m.s0(), m.j0(), m.horizon(), sim);

  BacktestReport rep;
  if (c.method == "lsmc") {
    const BsdeSolution sol = price_lsmc(m, claim, L, cfg);
    rep = backtest(fresh, LsmcSurface(sol), L, kind, {}, cfg.threads);
  } else if (c.method == "pide") {
    PideConfig pc;
    pc.n_space = c.grid;
    pc.n_time = c.grid;
    pc.sharpe_margin = c.margin;
    const PideResult res = price_pide(m, claim, L, pc);
    rep = backtest(fresh, PideSurface(res, m, claim), L, kind, {}, cfg.threads);
  } else {
    throw ConfigError("--method must be lsmc or pide");
  }

  const fs::path dir = output_dir(c.out);
  json doc;
  doc["strategy"] = rep.strategy;
  doc["claim"] = claim.label();
  doc["L"] = L.L;
  doc["method"] = c.method;
  doc["training_seed"] = c.seed;
  doc["test_seed"] = c.seed + 1;
  doc["test_paths"] = test_paths;
  doc["terminal_surplus"] = {{"mean", rep.terminal_mean},
                             {"mean_se", rep.terminal_mean_se},
                             {"variance", rep.terminal_variance}};
  doc["extrapolated_nodes"] = rep.extrapolated_nodes;
  doc["regimes"] = json::array();
  for (std::size_t i = 0; i < rep.regimes.size(); ++i) {
    const auto& st = rep.regimes[i];
    doc["regimes"].push_back({{"regime", i + 1},
                              {"samples", st.samples},
                              {"drift_rate", st.drift_rate},
                              {"drift_se", st.drift_se},
                              {"qv_rate", st.qv_rate},
                              {"qv_se", st.qv_se},
                              {"sharpe", st.sharpe},
                              {"normalized_sharpe", st.normalized_sharpe},
                              {"normalized_sharpe_se", st.normalized_sharpe_se},
                              {"target", st.target}});
  }
  write_json(dir / "backtest.json", doc);
  std::ofstream csv(dir / "backtest.csv");
  rep.write_csv(csv);
  if (dump) {
    std::ofstream f(dir / "surplus.csv");
    f << "path_id,terminal_surplus\n" << std::setprecision(17);
    for (std::size_t p = 0; p < rep.terminal_surplus.size(); ++p)
      f << p << ',' << rep.terminal_surplus[p] << '\n';
  }
  std::cout << "terminal surplus mean " << rep.terminal_mean << ", variance "
            << rep.terminal_variance << '\n';
  return kOk;
}

int cmd_simulate(const Common& c) {
  const RegimeSet m = load_model(c.model);
  SimulationOptions sim{c.steps, c.paths, c.seed, std::max(1u, c.threads), false};
  const PathSet paths = simulate_paths(m, m.s0(), m.j0(), m.horizon(), sim);
  const fs::path dir = output_dir(c.out);
  std::ofstream f(dir / "paths.csv");
  paths.write_csv(f);
  json doc = {{"paths", c.paths}, {"steps", c.steps}, {"seed", c.seed}, {"model", to_json(m.config())}};
  write_json(dir / "simulate.json", doc);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regime-switching Sharpe-ratio pricing and hedging"};
  app.require_subcommand(1);
  Common c;

  auto add_model = [&](CLI::App* sub) {
    sub->add_option("--model", c.model, "model JSON (default: built-in two-state model)");
  };
  auto add_numerics = [&](CLI::App* sub) {
    sub->add_option("--paths", c.paths, "Monte Carlo paths")->capture_default_str();
    sub->add_option("--steps", c.steps, "time steps")->capture_default_str();
    sub->add_option("--degree", c.degree, "polynomial degree of the regressions")->capture_default_str();
    sub->add_option("--threads", c.threads, "worker threads (results do not depend on it)")
        ->capture_default_str();
    sub->add_option("--responses", c.responses, "regression estimator: joint, centered or raw")
        ->check(CLI::IsMember({"joint", "centered", "raw"}))
        ->capture_default_str();
    sub->add_option("--out", c.out, "output directory")->capture_default_str();
  };

  auto* price = app.add_subcommand("price", "price a claim and write price.json / solution.csv");
  add_model(price);
  add_numerics(price);
  price->add_option("--claim", c.claim, "call:<K>, put:<K>, digital:<K>, stock or constant:<c>")
      ->capture_default_str();
  price->add_option("--L", c.L, "Sharpe ratio per state, comma separated")->required();
  price->add_option("--grid", c.grid, "PIDE nodes in price and in time")->capture_default_str();
  price->add_option("--method", c.method, "lsmc or pide")
      ->check(CLI::IsMember({"lsmc", "pide"}))
      ->capture_default_str();
  price->add_option("--seed", c.seed, "random seed")->capture_default_str();
  price->add_option("--margin", c.margin, "required margin of L over theta")->capture_default_str();
  price->add_flag("--force", c.force, "price even when the arbitrage condition fails");
  std::string mortality_file, death_claim = "constant:0";
  double entry_age = 0.0;
  std::uint64_t mortality_seed = 7;
  price->add_option("--mortality", mortality_file, "mortality CSV (age_from,age_to,intensity)");
  price->add_option("--entry-age", entry_age, "policyholder age at t=0")->capture_default_str();
  price->add_option("--death-claim", death_claim, "benefit on death, paid at maturity")
      ->capture_default_str();
  price->add_option("--mortality-seed", mortality_seed, "seed of the death times")
      ->capture_default_str();

  auto* tables = app.add_subcommand("reproduce-tables", "write table2.csv, table3.csv, table4.csv");
  add_numerics(tables);

  auto* check = app.add_subcommand("check", "evaluate the arbitrage and monotonicity conditions");
  add_model(check);
  check->add_option("--L", c.L, "Sharpe ratio per state, comma separated")->required();
  check->add_option("--out", c.out, "output directory")->capture_default_str();
  check->add_option("--margin", c.margin, "required margin of L over theta")->capture_default_str();
  double s_lo = 20.0, s_hi = 500.0;
  check->add_option("--s-lo", s_lo, "lower end of the price range")->capture_default_str();
  check->add_option("--s-hi", s_hi, "upper end of the price range")->capture_default_str();

  auto* bt = app.add_subcommand("backtest", "hedge along fresh paths and report surplus statistics");
  add_model(bt);
  add_numerics(bt);
  bt->add_option("--claim", c.claim, "claim")->capture_default_str();
  bt->add_option("--L", c.L, "Sharpe ratio per state, comma separated")->required();
  bt->add_option("--grid", c.grid, "PIDE nodes in price and in time")->capture_default_str();
  bt->add_option("--method", c.method, "lsmc or pide")
      ->check(CLI::IsMember({"lsmc", "pide"}))
      ->capture_default_str();
  bt->add_option("--seed", c.seed, "training seed; test paths use seed + 1")->capture_default_str();
  bt->add_option("--margin", c.margin, "required margin of L over theta")->capture_default_str();
  std::size_t test_paths = 20000;
  std::string strategy = "optimal";
  bool dump = false;
  bt->add_option("--test-paths", test_paths, "fresh paths for the hedge")->capture_default_str();
  bt->add_option("--strategy", strategy, "optimal or variance_minimal")
      ->check(CLI::IsMember({"optimal", "variance_minimal"}))
      ->capture_default_str();
  bt->add_flag("--dump-surplus", dump, "write surplus.csv with per-path terminal surplus");

  auto* simulate = app.add_subcommand("simulate", "write simulated (S, J) paths to paths.csv");
  add_model(simulate);
  simulate->add_option("--paths", c.paths, "paths")->capture_default_str();
  simulate->add_option("--steps", c.steps, "time steps")->capture_default_str();
  simulate->add_option("--seed", c.seed, "random seed")->capture_default_str();
  simulate->add_option("--threads", c.threads, "worker threads")->capture_default_str();
  simulate->add_option("--out", c.out, "output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }
  if (c.threads == 0) c.threads = 1;

  try {
    if (price->parsed()) return cmd_price(c, mortality_file, entry_age, death_claim, mortality_seed);
    if (tables->parsed()) return cmd_reproduce(c);
    if (check->parsed()) return cmd_check(c, s_lo, s_hi);
    if (bt->parsed()) return cmd_backtest(c, test_paths, strategy, dump);
    if (simulate->parsed()) {
      if (simulate->count("--paths") == 0) c.paths = 1000;
      return cmd_simulate(c);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const MarketError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const SharpeMarginError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kSolverFailure;
  } catch (const PideDivergenceError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kSolverFailure;
  } catch (const IntensityBoundError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kSolverFailure;
  } catch (const RegressionError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kSolverFailure;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kSolverFailure;
  }
  return kOk;
}
