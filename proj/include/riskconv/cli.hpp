#pragma once

#include "riskconv/approx.hpp"
#include "riskconv/csv.hpp"
#include "riskconv/fatou.hpp"
#include "riskconv/infconv.hpp"
#include "riskconv/measures.hpp"
#include "riskconv/norms.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace riskconv {

/// Outcome of one in-process CLI invocation: the text that would reach
/// stdout plus the process exit code (0 ok, 1 domain error, 2 usage error).
struct CliResult {
    int exit_code = 0;
    std::string out;
};

namespace cli_detail {

using Json = nlohmann::ordered_json;

/// Reports carry finite numbers or the strings "inf"/"-inf"; NaN is a bug.
inline Json num(double v) {
    if (std::isnan(v)) throw std::logic_error("report numbers must not be NaN");
    if (std::isinf(v)) return Json(v > 0 ? "inf" : "-inf");
    return Json(v);
}

inline Json num_array(const std::vector<double>& vs) {
    Json a = Json::array();
    for (double v : vs) a.push_back(num(v));
    return a;
}

template <class S> Json num_array_of(const std::vector<S>& vs) {
    Json a = Json::array();
    for (const S& v : vs) a.push_back(num(to_double(v)));
    return a;
}

/// 4-atom demo fixture used whenever --scenarios is not given.
template <class S> ScenarioTable<S> demo_table() {
    ScenarioTable<S> t;
    t.names = {"x"};
    t.columns = {{S(-4), S(-2), S(1), S(3)}};
    t.probs.assign(4, scalar_traits<S>::ratio(1, 4));
    t.had_probs = false;
    return t;
}

template <class S>
ScenarioTable<S> load_table(const std::string& path) {
    if (path.empty()) return demo_table<S>();
    return load_scenarios<S>(path);
}

template <class S>
RandomVariable<S> pick_variable(const ScenarioTable<S>& t, const std::string& name) {
    if (name.empty()) return t.variable(0);
    const auto j = t.column_index(name);
    if (!j) throw std::invalid_argument("scenarios: no column named '" + name + "'");
    return t.variable(*j);
}

/// "es:0.5" style measure token; a level may come embedded or via the
/// --alpha/--gamma flags, the embedded form winning.
struct MeasureToken {
    std::string kind;
    std::string level; ///< empty when the measure takes no level
};

inline MeasureToken parse_measure_token(const std::string& text, const std::string& alpha,
                                        const std::string& gamma) {
    MeasureToken tok;
    const auto colon = text.find(':');
    tok.kind = text.substr(0, colon);
    if (colon != std::string::npos) tok.level = text.substr(colon + 1);
    if (tok.kind == "var" || tok.kind == "es") {
        if (tok.level.empty()) tok.level = alpha;
        if (tok.level.empty())
            throw CLI::ValidationError("--measure",
                                       tok.kind + " needs a level: " + tok.kind +
                                           ":0.5 or --alpha 0.5");
    } else if (tok.kind == "entropic") {
        if (tok.level.empty()) tok.level = gamma;
        if (tok.level.empty())
            throw CLI::ValidationError("--measure",
                                       "entropic needs a level: entropic:1 or --gamma 1");
    } else if (tok.kind == "neg_expectation") {
        if (!tok.level.empty())
            throw CLI::ValidationError("--measure", "neg_expectation takes no level");
    } else {
        throw CLI::ValidationError("--measure", "unknown measure '" + tok.kind +
                                                    "' (var, es, entropic, "
                                                    "neg_expectation)");
    }
    return tok;
}

inline std::string token_name(const MeasureToken& tok) {
    return tok.level.empty() ? tok.kind : tok.kind + ":" + tok.level;
}

inline RiskMeasure build_measure(const MeasureToken& tok) {
    if (tok.kind == "var") return make_var(detail::parse_cell<double>(tok.level));
    if (tok.kind == "es") return make_es(detail::parse_cell<double>(tok.level));
    if (tok.kind == "entropic") return make_entropic(detail::parse_cell<double>(tok.level));
    return make_neg_expectation();
}

/// "lp:2", "lp:inf", "orlicz:exp" or "orlicz:square".
inline RiNorm build_norm(const std::string& token) {
    const auto colon = token.find(':');
    const std::string kind = token.substr(0, colon);
    const std::string level = colon == std::string::npos ? "" : token.substr(colon + 1);
    if (kind == "lp") {
        if (level == "inf") return RiNorm::linf();
        if (!level.empty()) return RiNorm::lp(detail::parse_cell<double>(level));
    } else if (kind == "orlicz") {
        if (level == "exp") return RiNorm::orlicz(OrliczFunction::exp_minus_one());
        if (level == "square") return RiNorm::orlicz(OrliczFunction::square());
    }
    throw CLI::ValidationError("--norm", "unknown norm '" + token +
                                             "' (lp:P, lp:inf, orlicz:exp, orlicz:square)");
}

inline void require_float_mode(bool rational, const std::string& command) {
    if (rational)
        throw CLI::ValidationError("--mode",
                                   command + " has no exact rational form; use --mode float");
}

} // namespace cli_detail

/**
 * @brief In-process CLI entry point; `args` excludes the program name.
 *
 * Subcommands: risk eval, norms table, approx localize, infconv solve,
 * infconv surplus, fatou probe, fatou gallery {bigexamp1, bigexamp2}.
 * Reports are JSON with a schema field; identical arguments and inputs
 * produce byte-identical output.  The RISKCONV_SEED environment variable
 * overrides --seed.
 */
inline CliResult run_cli(const std::vector<std::string>& args) {
    using cli_detail::Json;
    CliResult res;

    CLI::App app{"risk measures, approximation schemes and risk sharing on finite "
                 "probability spaces"};
    app.name("riskconv");

    std::uint64_t seed = 1;
    double tol = 1e-9;
    std::string mode = "float";
    std::string out_path;
    std::string scenarios;
    std::string variable;
    app.add_option("--seed", seed, "pseudo-random seed (env RISKCONV_SEED overrides)");
    CLI::Option* tol_opt = app.add_option("--tol", tol, "tolerance override");
    app.add_option("--mode", mode, "arithmetic mode")
        ->check(CLI::IsMember({"float", "rational"}));
    app.add_option("--out", out_path, "write the JSON report to this file");
    app.add_option("--scenarios", scenarios, "scenario CSV (default: built-in 4-atom demo)");
    app.add_option("--variable", variable, "scenario column to use (default: first)");

    std::string measure, alpha, gamma, norm_token = "lp:2", kind, measures_csv, budgets_csv;
    std::string ladder_csv = "6,8,10,12";
    std::size_t nmax = 8, trials = 100, horizon = 200, g1_horizon = 64, atoms = 64;
    std::size_t n_steps = 16, iterations = 0, grid = 41;

    CLI::App* risk = app.add_subcommand("risk", "risk measure evaluation");
    CLI::App* risk_eval = risk->add_subcommand("eval", "evaluate one measure");
    risk_eval->add_option("--measure", measure, "var, es, entropic or neg_expectation")
        ->required();
    risk_eval->add_option("--alpha", alpha, "level for var/es");
    risk_eval->add_option("--gamma", gamma, "aversion for entropic");

    CLI::App* norms = app.add_subcommand("norms", "norm diagnostics");
    CLI::App* ntable =
        norms->add_subcommand("table", "norm values, associates and small-set decay");

    CLI::App* approx = app.add_subcommand("approx", "conditional-expectation schemes");
    CLI::App* localize = approx->add_subcommand("localize",
                                                "measure trace along the refinement scheme");
    localize->add_option("--measure", measure, "law-invariant measure token")->required();
    localize->add_option("--alpha", alpha, "level for var/es");
    localize->add_option("--gamma", gamma, "aversion for entropic");
    localize->add_option("--norm", norm_token, "scheme norm (default lp:2)");
    localize->add_option("--steps", n_steps, "refinement steps (default 16)");

    CLI::App* infconv = app.add_subcommand("infconv", "risk sharing");
    CLI::App* solve = infconv->add_subcommand("solve", "law-invariant inf-convolution");
    solve->add_option("--measures", measures_csv, "comma list, e.g. es:0.3,es:0.6")
        ->required();
    solve->add_option("--iterations", iterations, "subgradient iterations");
    solve->add_option("--grid", grid, "oracle grid per atom (small instances)");
    CLI::App* surplus = infconv->add_subcommand("surplus", "budget acceptance-set sharing");
    surplus->add_option("--budgets", budgets_csv, "two weight:capacity pairs, e.g. 1:0.3,1:0.2")
        ->required();

    CLI::App* fatou = app.add_subcommand("fatou", "lower-semicontinuity probes");
    CLI::App* fprobe = fatou->add_subcommand("probe", "randomized sequence probe");
    fprobe->add_option("--measure", measure, "measure token, e.g. es:0.5")->required();
    fprobe->add_option("--kind", kind, "sequence family kind")
        ->required()
        ->check(CLI::IsMember({"order_dominated", "norm_bounded_as", "as_only"}));
    fprobe->add_option("--trials", trials, "trials (default 100)");
    fprobe->add_option("--horizon", horizon, "sequence length (default 200)");
    fprobe->add_option("--atoms", atoms, "atoms of the uniform space (default 64)");
    fprobe->add_option("--norm", norm_token, "bound norm for norm_bounded_as (default lp:2)");
    CLI::App* gallery = fatou->add_subcommand("gallery", "worked sequence galleries");
    CLI::App* g2 = gallery->add_subcommand("bigexamp2", "constant-norm spikes vs the mean");
    g2->add_option("--nmax", nmax, "last spike index (default 8)");
    CLI::App* g1 = gallery->add_subcommand("bigexamp1", "L2 pairing along a ladder");
    g1->add_option("--ladder", ladder_csv, "space exponents (default 6,8,10,12)");
    g1->add_option("--horizon", g1_horizon, "sequence length per rung (default 64)");

    for (CLI::App* sub : {risk, norms, approx, infconv, fatou})
        sub->require_subcommand(1);
    gallery->require_subcommand(1);
    app.require_subcommand(1);
    // global options may appear after the subcommand name
    for (CLI::App* sub : {risk, risk_eval, norms, ntable, approx, localize, infconv, solve,
                          surplus, fatou, fprobe, gallery, g2, g1})
        sub->fallthrough();

    if (args.empty()) {
        res.out = app.help();
        res.exit_code = 2;
        return res;
    }

    try {
        std::vector<const char*> argv;
        argv.push_back("riskconv");
        for (const std::string& a : args) argv.push_back(a.c_str());
        app.parse(static_cast<int>(argv.size()), argv.data());

        if (const char* env = std::getenv("RISKCONV_SEED")) {
            try {
                seed = static_cast<std::uint64_t>(std::stoull(env));
            } catch (const std::exception&) {
                throw CLI::ValidationError("RISKCONV_SEED",
                                           std::string("not an integer: ") + env);
            }
        }
        const bool rational = mode == "rational";
        const bool tol_set = tol_opt->count() > 0;

        Json report;
        report["schema"] = 1;

        if (risk_eval->parsed()) {
            const auto tok = cli_detail::parse_measure_token(measure, alpha, gamma);
            report["command"] = "risk eval";
            report["measure"] = cli_detail::token_name(tok);
            report["mode"] = mode;
            if (rational) {
                if (tok.kind == "entropic")
                    cli_detail::require_float_mode(true, "entropic");
                const auto table = cli_detail::load_table<Rational>(scenarios);
                const auto x = cli_detail::pick_variable(table, variable);
                Rational value;
                if (tok.kind == "var")
                    value = var_alpha(x, parse_rational(tok.level));
                else if (tok.kind == "es")
                    value = es_alpha(x, parse_rational(tok.level));
                else
                    value = neg_expectation(x);
                report["value"] = cli_detail::num(to_double(value));
                report["value_exact"] = rational_to_string(value);
            } else {
                const RiskMeasure rho = cli_detail::build_measure(tok);
                const auto table = cli_detail::load_table<double>(scenarios);
                report["value"] = cli_detail::num(rho(cli_detail::pick_variable(table,
                                                                                variable)));
            }
        } else if (norms->parsed()) {
            cli_detail::require_float_mode(rational, "norms table");
            const auto table = cli_detail::load_table<double>(scenarios);
            const auto x = cli_detail::pick_variable(table, variable);
            report["command"] = "norms table";
            report["variable"] = variable.empty() ? table.names.front() : variable;
            Json rows = Json::array();
            const std::vector<std::pair<std::string, RiNorm>> entries = {
                {"lp:1", RiNorm::lp(1.0)},
                {"lp:1.5", RiNorm::lp(1.5)},
                {"lp:2", RiNorm::lp(2.0)},
                {"lp:4", RiNorm::lp(4.0)},
                {"lp:inf", RiNorm::linf()},
                {"orlicz:exp", RiNorm::orlicz(OrliczFunction::exp_minus_one())}};
            for (const auto& [name, n] : entries) {
                const auto star =
                    property_star_probe(n, {0.5, 1.0 / 8, 1.0 / 64, 1.0 / 512, 1.0 / 4096});
                Json row;
                row["norm"] = name;
                row["value"] = cli_detail::num(n(x));
                row["associate_value"] = cli_detail::num(associate_norm(n, x));
                row["small_set_decay"] = {{"holds", star.holds},
                                          {"slope", cli_detail::num(star.loglog_slope)}};
                rows.push_back(row);
            }
            report["rows"] = rows;
        } else if (localize->parsed()) {
            cli_detail::require_float_mode(rational, "approx localize");
            const auto tok = cli_detail::parse_measure_token(measure, alpha, gamma);
            const RiskMeasure rho = cli_detail::build_measure(tok);
            if (!rho.flags().law_invariant)
                throw std::invalid_argument("approx localize: measure must be law invariant");
            const RiNorm norm = cli_detail::build_norm(norm_token);
            const auto table = cli_detail::load_table<double>(scenarios);
            const auto x = cli_detail::pick_variable(table, variable);
            const double target = rho(x);
            const RefineResult scheme = refine_scheme(x, norm, n_steps);
            report["command"] = "approx localize";
            report["measure"] = cli_detail::token_name(tok);
            report["norm"] = norm_token;
            report["target"] = cli_detail::num(target);
            Json trace = Json::array();
            double last = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < scheme.steps.size(); ++i) {
                const RefineStep& st = scheme.steps[i];
                last = rho(cond_expect(x, scheme.partitions[i]));
                trace.push_back({{"n", st.n},
                                 {"truncation_level", cli_detail::num(st.truncation_level)},
                                 {"blocks", st.cells},
                                 {"value", cli_detail::num(last)},
                                 {"norm_error", cli_detail::num(st.error)}});
            }
            report["trace"] = trace;
            const double conv_tol = tol_set ? tol : 1e-9;
            report["converged"] = std::abs(last - target) <= conv_tol;
        } else if (solve->parsed()) {
            cli_detail::require_float_mode(rational, "infconv solve");
            std::vector<RiskMeasure> ms;
            Json names = Json::array();
            std::istringstream mstream(measures_csv);
            std::string token;
            while (std::getline(mstream, token, ',')) {
                const auto tok = cli_detail::parse_measure_token(token, "", "");
                ms.push_back(cli_detail::build_measure(tok));
                names.push_back(cli_detail::token_name(tok));
            }
            if (ms.size() < 2)
                throw CLI::ValidationError("--measures", "need at least two measures");
            const auto table = cli_detail::load_table<double>(scenarios);
            const auto x = cli_detail::pick_variable(table, variable);
            InfConvOpts opts;
            if (iterations > 0) opts.iterations = iterations;
            if (tol_set) opts.tol = tol;
            const InfConvResult sol = infconv_law_invariant(ms, x, opts);
            const Certificate cert = certify_exactness(sol, ms, x);
            report["command"] = "infconv solve";
            report["measures"] = names;
            report["value"] = cli_detail::num(sol.value);
            report["gap"] = cli_detail::num(sol.gap);
            report["iterations"] = sol.iterations;
            report["converged"] = sol.converged;
            if (sol.allocation) {
                Json alloc;
                alloc["knots"] = cli_detail::num_array(sol.allocation->knots());
                Json agents = Json::array();
                for (const auto& vals : sol.allocation->values())
                    agents.push_back(cli_detail::num_array(vals));
                alloc["values"] = agents;
                report["allocation"] = alloc;
            }
            report["certificate"] = {{"ok", cert.ok},
                                     {"value_recomputed", cli_detail::num(
                                                              cert.value_recomputed)},
                                     {"failed", cert.failed}};
            if (ms.size() == 2 && x.size() <= 4) {
                const double oracle = infconv_bruteforce(ms[0], ms[1], x, grid);
                report["oracle"] = {
                    {"value", cli_detail::num(oracle)},
                    {"gap", cli_detail::num(std::abs(oracle - sol.value))},
                    {"resolution", cli_detail::num(bruteforce_resolution(x, grid))}};
            }
        } else if (surplus->parsed()) {
            std::vector<std::pair<std::string, std::string>> budgets;
            std::istringstream bstream(budgets_csv);
            std::string token;
            while (std::getline(bstream, token, ',')) {
                const auto colon = token.find(':');
                if (colon == std::string::npos)
                    throw CLI::ValidationError("--budgets",
                                               "expected weight:capacity, got '" + token +
                                                   "'");
                budgets.emplace_back(token.substr(0, colon), token.substr(colon + 1));
            }
            if (budgets.size() != 2)
                throw CLI::ValidationError("--budgets", "need exactly two budgets");
            report["command"] = "infconv surplus";
            report["mode"] = mode;
            const auto run = [&](auto scalar_tag) {
                using S = decltype(scalar_tag);
                const auto table = cli_detail::load_table<S>(scenarios);
                const auto x = cli_detail::pick_variable(table, variable);
                const auto a1 = AcceptanceSet<S>::shortfall_budget(
                    SolidPositiveSet<S>::budget(detail::parse_cell<S>(budgets[0].first),
                                                detail::parse_cell<S>(budgets[0].second)));
                const auto a2 = AcceptanceSet<S>::shortfall_budget(
                    SolidPositiveSet<S>::budget(detail::parse_cell<S>(budgets[1].first),
                                                detail::parse_cell<S>(budgets[1].second)));
                const SurplusResult<S> sres =
                    infconv_surplus(a1, a2, x, {}, tol_set ? tol : 1e-9);
                report["value"] = cli_detail::num(to_double(sres.value));
                if constexpr (scalar_traits<S>::exact)
                    report["value_exact"] = rational_to_string(sres.value);
                report["merged_closed_form"] = sres.merged_closed_form;
                if (sres.merged_capacity)
                    report["merged_capacity"] = cli_detail::num(
                        to_double(*sres.merged_capacity));
                report["iterations"] = sres.iterations;
                report["part1"] = cli_detail::num_array_of(sres.part1.values());
                report["part2"] = cli_detail::num_array_of(sres.part2.values());
            };
            if (rational)
                run(Rational{});
            else
                run(double{});
        } else if (fprobe->parsed()) {
            cli_detail::require_float_mode(rational, "fatou probe");
            const auto tok = cli_detail::parse_measure_token(measure, alpha, gamma);
            const RiskMeasure rho = cli_detail::build_measure(tok);
            const auto sp = uniform_space<double>(atoms);
            SequenceFamily fam = kind == "order_dominated"
                                     ? SequenceFamily::order_dominated(sp, seed)
                                 : kind == "norm_bounded_as"
                                     ? SequenceFamily::norm_bounded_as(
                                           sp, cli_detail::build_norm(norm_token), seed)
                                     : SequenceFamily::as_only(sp, seed);
            const ProbeReport rep =
                probe(rho, fam, trials, horizon, tol_set ? tol : 1e-5);
            report["command"] = "fatou probe";
            report["measure"] = cli_detail::token_name(tok);
            report["kind"] = kind;
            report["seed"] = seed;
            report["trials"] = rep.trials;
            report["horizon"] = rep.horizon;
            report["tol"] = cli_detail::num(rep.tol);
            report["violations"] = rep.violations;
            report["max_violation"] = cli_detail::num(rep.max_violation);
            report["kind_ok"] = rep.kind_ok;
            report["worst_kind_breach"] = cli_detail::num(rep.worst_kind_breach);
        } else if (g2->parsed()) {
            cli_detail::require_float_mode(rational, "fatou gallery");
            const Bigexamp2Report rep = gallery_bigexamp2(nmax);
            report["command"] = "fatou gallery bigexamp2";
            report["atoms"] = rep.atoms;
            report["n_max"] = rep.n_max;
            report["representable"] = rep.representable;
            report["means"] = cli_detail::num_array(rep.means);
            report["l1_norms"] = cli_detail::num_array(rep.l1_norms);
            report["liminf_surrogate"] = cli_detail::num(rep.liminf_surrogate);
            report["gap"] = cli_detail::num(rep.gap);
        } else if (g1->parsed()) {
            cli_detail::require_float_mode(rational, "fatou gallery");
            std::vector<std::size_t> exponents;
            std::istringstream lstream(ladder_csv);
            std::string token;
            while (std::getline(lstream, token, ','))
                exponents.push_back(
                    static_cast<std::size_t>(detail::parse_cell<double>(token)));
            const Bigexamp1Report rep = gallery_bigexamp1(exponents, g1_horizon, seed);
            report["command"] = "fatou gallery bigexamp1";
            report["seed"] = seed;
            Json rungs = Json::array();
            for (std::size_t i = 0; i < rep.ladder.size(); ++i)
                rungs.push_back({{"atoms", rep.ladder[i]},
                                 {"profile_l2", cli_detail::num(rep.z_l2_raw[i])},
                                 {"normalized_sup", cli_detail::num(rep.z_sup[i])},
                                 {"pairing_head", cli_detail::num(rep.pairing_head[i])},
                                 {"pairing_tail", cli_detail::num(rep.pairing_tail[i])}});
            report["rungs"] = rungs;
            report["bound_holds"] = rep.bound_holds;
            report["pairings_vanish"] = rep.pairings_vanish;
        }

        const std::string text = report.dump(2) + "\n";
        if (!out_path.empty()) {
            std::ofstream out(out_path, std::ios::binary);
            if (!out) throw std::runtime_error(out_path + ": cannot write");
            out << text;
        } else {
            res.out = text;
        }
        return res;
    } catch (const CLI::CallForHelp&) {
        res.out = app.help();
        return res;
    } catch (const CLI::ParseError& e) {
        res.out = std::string("usage error: ") + e.what() + "\n";
        res.exit_code = 2;
        return res;
    } catch (const std::logic_error& e) {
        res.out = std::string("error: ") + e.what() + "\n";
        res.exit_code = 1;
        return res;
    } catch (const std::runtime_error& e) {
        res.out = std::string("error: ") + e.what() + "\n";
        res.exit_code = 1;
        return res;
    }
}

} // namespace riskconv
