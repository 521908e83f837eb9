// Command-line front end. Exit codes: 0 success, 1 a checked property
// failed, 2 bad usage or unusable input.

#include "crocodai/monte_carlo.hpp"
#include "crocodai/optimizer.hpp"
#include "crocodai/oracle.hpp"
#include "crocodai/risk_model.hpp"
#include "crocodai/scenarios.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

using namespace crocodai;
using json = nlohmann::json;

namespace {

struct Output {
    std::string path;
    bool as_json = false;
};

std::string digest(const json& config) {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (unsigned char c : config.dump()) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::ostringstream o;
    o << std::hex << std::setw(16) << std::setfill('0') << h;
    return o.str();
}

json stamp(const json& config) { return {{"version", CROCODAI_VERSION}, {"config", config}, {"config_digest", digest(config)}}; }

void emit(const Output& out, const json& config, const json& body, const std::string& text) {
    std::string content;
    if (out.as_json) {
        json j = stamp(config);
        j["result"] = body;
        content = j.dump(2) + "\n";
    } else {
        content = "# crocodai " + std::string(CROCODAI_VERSION) + " config " + digest(config) + "\n" + text;
    }
    if (out.path.empty() || out.path == "-") {
        std::cout << content;
        return;
    }
    std::ofstream f(out.path);
    if (!f) fail(Errc::insufficient_data, "cannot write '" + out.path + "'");
    f << content;
}

// --data, else $CROCODAI_DATA (a CSV file or a directory holding prices.csv)
std::string data_path(const std::string& given) {
    std::string p = given;
    if (p.empty()) {
        const char* env = std::getenv("CROCODAI_DATA");
        if (!env || !*env) fail(Errc::insufficient_data, "no price data: pass --data or set CROCODAI_DATA");
        p = env;
    }
    if (std::filesystem::is_directory(p)) p = (std::filesystem::path(p) / "prices.csv").string();
    if (!std::filesystem::exists(p)) fail(Errc::insufficient_data, "price data '" + p + "' not found");
    return p;
}

std::vector<double> split_doubles(const std::vector<std::string>& items) {
    std::vector<double> out;
    for (const auto& s : items) {
        std::size_t used = 0;
        double v = 0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != s.size()) fail(Errc::invalid_parameter, "'" + s + "' is not a number");
        out.push_back(v);
    }
    return out;
}

std::string fmt(double x, int prec = 6) {
    std::ostringstream o;
    o << std::setprecision(prec) << x;
    return o.str();
}

risk::ReturnModel fit_for(const risk::PriceSet& set, const std::vector<std::string>& symbols, std::size_t min_obs) {
    const auto aligned = risk::aligned_prices(set, symbols);
    return risk::estimate_model(symbols, risk::log_returns(aligned), min_obs);
}

risk::ReturnModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::insufficient_data, "cannot open model '" + path + "'");
    try {
        return risk::model_from_json(json::parse(in));
    } catch (const json::exception& e) {
        fail(Errc::parse_error, path + ": " + e.what());
    }
}

mc::Portfolio portfolio_from(const std::string& name, const std::vector<std::string>& assets,
                             const std::vector<std::string>& weights) {
    if (!assets.empty()) {
        mc::Portfolio p{name.empty() ? "custom" : name, assets, split_doubles(weights)};
        p.validate();
        return p;
    }
    return scen::builtin_portfolio(name);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CroCoDai stablecoin simulator and risk toolkit"};
    app.set_version_flag("--version", std::string(CROCODAI_VERSION));
    app.require_subcommand(1);

    Output out;
    auto add_output = [&](CLI::App* c) {
        c->add_option("-o,--out", out.path, "output file (default stdout)");
        c->add_flag("--json", out.as_json, "emit JSON instead of text/CSV");
    };

    // ingest
    std::string csv;
    auto* ingest = app.add_subcommand("ingest", "validate a price CSV and summarize it");
    ingest->add_option("csv", csv, "wide CSV: timestamp,<SYM>,...");
    add_output(ingest);

    // fit
    std::vector<std::string> symbols;
    std::size_t min_obs = 100;
    bool zero_drift = false;
    auto* fit = app.add_subcommand("fit", "estimate drift, covariance and t degrees of freedom");
    fit->add_option("--data", csv, "price CSV or directory (default $CROCODAI_DATA)");
    fit->add_option("--symbols", symbols, "assets to fit (default all)")->delimiter(',');
    fit->add_option("--min-obs", min_obs, "minimum aligned returns")->capture_default_str();
    fit->add_flag("--zero-drift", zero_drift, "set the fitted drift to zero");
    add_output(fit);

    // simulate / replay
    std::vector<std::string> portfolios, assets, weights, gammas{"1.2"};
    double theta = 1.1;
    std::int64_t runs = 100'000;
    int horizon = 288, jobs = 1;
    std::string method = "t", model_path;
    std::uint64_t seed = 7;
    bool with_ci = false;
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo failure probability");
    simulate->add_option("--portfolio", portfolios, "built-in portfolio name(s)")->delimiter(',');
    simulate->add_option("--assets", assets, "custom portfolio assets")->delimiter(',');
    simulate->add_option("--weights", weights, "custom portfolio weights")->delimiter(',');
    simulate->add_option("--gamma-prime", gammas, "initial over-collateralization(s)")->delimiter(',');
    simulate->add_option("--theta", theta, "safety threshold")->capture_default_str();
    simulate->add_option("--n", runs, "runs")->capture_default_str();
    simulate->add_option("--horizon", horizon, "slots")->capture_default_str();
    simulate->add_option("--method", method, "t or normal")->capture_default_str();
    simulate->add_option("--seed", seed, "seed")->capture_default_str();
    simulate->add_option("--jobs", jobs, "threads")->capture_default_str();
    simulate->add_option("--data", csv, "price CSV or directory (default $CROCODAI_DATA)");
    simulate->add_option("--model", model_path, "fitted model JSON instead of --data");
    simulate->add_option("--min-obs", min_obs, "minimum aligned returns")->capture_default_str();
    simulate->add_flag("--zero-drift", zero_drift, "ignore the fitted drift");
    simulate->add_flag("--ci", with_ci, "add confidence half-width columns");
    add_output(simulate);

    auto* replay = app.add_subcommand("replay", "historical failure frequency");
    replay->add_option("--portfolio", portfolios, "built-in portfolio name(s)")->delimiter(',');
    replay->add_option("--assets", assets, "custom portfolio assets")->delimiter(',');
    replay->add_option("--weights", weights, "custom portfolio weights")->delimiter(',');
    replay->add_option("--gamma-prime", gammas, "initial over-collateralization(s)")->delimiter(',');
    replay->add_option("--theta", theta, "safety threshold")->capture_default_str();
    replay->add_option("--horizon", horizon, "slots")->capture_default_str();
    replay->add_option("--data", csv, "price CSV or directory (default $CROCODAI_DATA)");
    replay->add_flag("--ci", with_ci, "add confidence half-width columns");
    add_output(replay);

    // optimize
    std::string universe = "D";
    double lambda = 1.0, beta = 0.1;
    auto* optimize = app.add_subcommand("optimize", "minimum-variance portfolio under per-asset caps");
    optimize->add_option("--universe", universe, "D, C or A")->capture_default_str();
    optimize->add_option("--symbols", symbols, "explicit asset list instead of a universe")->delimiter(',');
    optimize->add_option("--lambda", lambda, "per-asset cap")->capture_default_str();
    optimize->add_option("--beta", beta, "debt ceiling flexibility margin")->capture_default_str();
    optimize->add_option("--data", csv, "price CSV or directory (default $CROCODAI_DATA)");
    optimize->add_option("--model", model_path, "fitted model JSON instead of --data");
    optimize->add_option("--min-obs", min_obs, "minimum aligned returns")->capture_default_str();
    add_output(optimize);

    // scenario run
    std::string scenario_path;
    auto* scenario = app.add_subcommand("scenario", "protocol and attack scenarios");
    scenario->require_subcommand(1);
    auto* scenario_run = scenario->add_subcommand("run", "execute a scenario file");
    scenario_run->add_option("file", scenario_path, "scenario JSON")->required();
    add_output(scenario_run);

    // oracle-tail
    int feeds = 5, corrupt = 2;
    double sigma = 1.0;
    std::vector<std::string> thresholds{"2", "3", "4", "5"};
    std::int64_t trials = 1'000'000;
    bool check = false;
    auto* tail = app.add_subcommand("oracle-tail", "median deviation tail under corrupted feeds");
    tail->add_option("--feeds", feeds, "oracle feeds O")->capture_default_str();
    tail->add_option("--corrupt", corrupt, "corrupted feeds")->capture_default_str();
    tail->add_option("--sigma", sigma, "honest noise standard deviation")->capture_default_str();
    tail->add_option("--c", thresholds, "deviation thresholds")->delimiter(',');
    tail->add_option("--trials", trials, "trials")->capture_default_str();
    tail->add_option("--seed", seed, "seed")->capture_default_str();
    tail->add_flag("--check", check, "exit 1 unless the estimate is decreasing and under the bound");
    add_output(tail);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*ingest) {
            const std::string path = data_path(csv);
            const auto set = risk::ingest_prices_file(path);
            const auto periods = risk::split_periods(set.times);
            json cfg{{"command", "ingest"}, {"csv", path}};
            json body{{"symbols", set.symbols}, {"observations", set.times.size()}, {"periods", periods.size()}};
            std::ostringstream t;
            t << "symbol,observations,missing\n";
            json per = json::array();
            for (std::size_t i = 0; i < set.symbols.size(); ++i) {
                std::size_t have = 0;
                for (const auto& v : set.columns[i]) have += v.has_value();
                t << set.symbols[i] << ',' << have << ',' << set.times.size() - have << '\n';
                per.push_back({{"symbol", set.symbols[i]}, {"observations", have}});
            }
            body["per_symbol"] = per;
            emit(out, cfg, body, t.str());
        } else if (*fit) {
            const std::string path = data_path(csv);
            const auto set = risk::ingest_prices_file(path);
            const auto syms = symbols.empty() ? set.symbols : symbols;
            auto model = fit_for(set, syms, min_obs);
            if (zero_drift) model.zero_drift();
            json cfg{{"command", "fit"}, {"csv", path}, {"symbols", syms}, {"min_obs", min_obs}, {"zero_drift", zero_drift}};
            json j = stamp(cfg);
            j["model"] = risk::to_json(model);
            const std::string content = j.dump(2) + "\n";
            if (out.path.empty() || out.path == "-") std::cout << content;
            else std::ofstream(out.path) << content;
        } else if (*simulate || *replay) {
            const bool hist = replay->parsed();
            std::vector<mc::Portfolio> ps;
            if (!assets.empty()) ps.push_back(portfolio_from("", assets, weights));
            for (const auto& n : portfolios) ps.push_back(scen::builtin_portfolio(n));
            if (ps.empty()) fail(Errc::invalid_parameter, "give --portfolio or --assets/--weights");
            const auto gps = split_doubles(gammas);
            mc::SimConfig sc{theta, horizon, runs, seed, jobs};
            const mc::Method m = hist ? mc::Method::Historical : mc::method_from(method);
            json cfg{{"command", hist ? "replay" : "simulate"}, {"gamma_prime", gps}, {"theta", theta}, {"horizon", horizon}};
            json pj = json::array();
            for (const auto& p : ps) pj.push_back({{"name", p.name}, {"assets", p.assets}, {"weights", p.weights}});
            cfg["portfolios"] = pj;

            std::optional<risk::PriceSet> set;
            std::optional<risk::ReturnModel> loaded;
            if (hist || model_path.empty()) {
                const std::string path = data_path(csv);
                set = risk::ingest_prices_file(path);
                cfg["csv"] = path;
            } else {
                loaded = load_model(model_path);
                cfg["model"] = model_path;
            }
            if (!hist) {
                cfg["method"] = std::string(mc::to_string(m));
                cfg["n"] = runs;
                cfg["seed"] = seed;
                cfg["zero_drift"] = zero_drift;
                cfg["min_obs"] = min_obs;
            }
            mc::SweepTable all;
            all.gamma_primes = gps;
            all.cells.assign(gps.size(), {});
            for (const auto& p : ps) {
                std::optional<risk::ReturnModel> model = loaded;
                if (!hist && !model) model = fit_for(*set, p.assets, min_obs);
                if (model && zero_drift) model->zero_drift();
                const auto t = mc::table_sweep({p}, gps, m, sc, model ? &*model : nullptr, set ? &*set : nullptr);
                all.portfolios.push_back(p.name);
                for (std::size_t r = 0; r < gps.size(); ++r) all.cells[r].push_back(t.cells[r][0]);
            }
            emit(out, cfg, all.to_json(), all.to_csv(with_ci));
        } else if (*optimize) {
            json cfg{{"command", "optimize"}, {"lambda", lambda}, {"beta", beta}};
            risk::ReturnModel model;
            std::vector<std::string> syms = symbols;
            if (!model_path.empty()) {
                model = load_model(model_path);
                if (syms.empty()) syms = scen::universe(universe, model.symbols);
                model = model.subset(syms);
                cfg["model"] = model_path;
            } else {
                const std::string path = data_path(csv);
                const auto set = risk::ingest_prices_file(path);
                if (syms.empty()) syms = scen::universe(universe, set.symbols);
                model = fit_for(set, syms, min_obs);
                cfg["csv"] = path;
                cfg["min_obs"] = min_obs;
            }
            cfg["symbols"] = syms;
            if (symbols.empty()) cfg["universe"] = universe;
            opt::QpProblem prob{model.cov, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(syms.size()), lambda), syms};
            const auto sol = opt::min_variance(prob);
            const auto ceil = opt::debt_ceilings_from(sol.v, beta);
            json body = opt::to_json(sol, prob);
            mc::Portfolio p{"opt", syms, std::vector<double>(sol.v.data(), sol.v.data() + sol.v.size())};
            body["portfolio"] = {{"name", p.name}, {"assets", p.assets}, {"weights", p.weights}};
            json cj = json::object();
            std::ostringstream t;
            t << "symbol,weight,debt_ceiling\n";
            for (std::size_t i = 0; i < syms.size(); ++i) {
                cj[syms[i]] = ceil[i];
                t << syms[i] << ',' << fmt(sol.v(static_cast<Eigen::Index>(i)), 9) << ',' << fmt(ceil[i], 9) << '\n';
            }
            body["debt_ceilings"] = cj;
            t << "# objective " << fmt(sol.objective, 9) << " kkt " << fmt(sol.kkt, 3) << '\n';
            emit(out, cfg, body, t.str());
        } else if (*scenario_run) {
            const auto rep = scen::run_scenario_file(scenario_path);
            json cfg{{"command", "scenario run"}, {"file", scenario_path}};
            emit(out, cfg, rep.to_json(), rep.to_text());
            return rep.pass ? 0 : 1;
        } else if (*tail) {
            const auto cs = split_doubles(thresholds);
            const auto pts = oracle::tail_probability_experiment(feeds, corrupt, sigma, cs, trials, seed);
            json cfg{{"command", "oracle-tail"}, {"feeds", feeds}, {"corrupt", corrupt}, {"sigma", sigma},
                     {"c", cs}, {"trials", trials}, {"seed", seed}};
            bool ok = true;
            json arr = json::array();
            std::ostringstream t;
            t << "c,exceed,trials,estimate,bound\n";
            for (std::size_t i = 0; i < pts.size(); ++i) {
                const auto& p = pts[i];
                ok = ok && p.estimate <= p.bound && (i == 0 || p.estimate < pts[i - 1].estimate || p.estimate == 0.0);
                arr.push_back({{"c", p.c}, {"exceed", p.exceed}, {"trials", p.trials}, {"estimate", p.estimate}, {"bound", p.bound}});
                t << fmt(p.c) << ',' << p.exceed << ',' << p.trials << ',' << fmt(p.estimate) << ',' << fmt(p.bound) << '\n';
            }
            emit(out, cfg, {{"points", arr}, {"decreasing_and_bounded", ok}}, t.str());
            return check && !ok ? 1 : 0;
        }
    } catch (const Error& e) {
        std::cerr << "error [" << errc_name(e.code()) << "]: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
