#include "commands.hpp"

#include "twoscale/bootstrap.hpp"
#include "twoscale/error.hpp"
#include "twoscale/event_data.hpp"
#include "twoscale/io.hpp"
#include "twoscale/parallel.hpp"
#include "twoscale/simulation.hpp"
#include "twoscale/solver.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace twoscale::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";

std::string fmt(double v) { return format_double(v); }

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::ios_base::failure("cannot write '" + path.string() + "'");
    return out;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw std::ios_base::failure("cannot create output directory '" + dir + "'");
}

json config_json(const RunConfig& c) {
    json j;
    j["command"] = c.command;
    j["input"] = c.input;
    j["estimates"] = c.estimates;
    j["out"] = c.out;
    j["grid_time"] = c.grid_time;
    j["grid_age"] = c.grid_age;
    j["t_max"] = c.t_max ? json(*c.t_max) : json(nullptr);
    j["a0"] = c.a0 ? json(*c.a0) : json(nullptr);
    j["a_max"] = c.a_max ? json(*c.a_max) : json(nullptr);
    j["p"] = c.p;
    j["q"] = c.q;
    j["shared_d"] = c.shared_d;
    j["method"] = c.method;
    j["tol"] = c.tol;
    j["max_iter"] = c.max_iter;
    j["boot"] = c.boot;
    j["boot_variant"] = c.boot_variant;
    j["weights"] = c.weights;
    j["alpha"] = c.alpha;
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["dump_operator"] = c.dump_operator;
    j["table"] = c.table;
    j["n"] = c.n;
    j["reps"] = c.reps;
    j["entry_max"] = c.entry_max;
    j["entry_ages"] = c.entry_ages;
    j["x"] = c.x;
    j["z"] = c.z;
    return j;
}

json solve_json(const SolveReport& r) {
    return {{"method", to_string(r.method)},
            {"iterations", r.iterations},
            {"converged", r.converged},
            {"residual", r.residual},
            {"constraint_residual", r.constraint_residual},
            {"condition", r.condition},
            {"spectral_warning", r.spectral_warning}};
}

json spectral_json(const SpectralReport& s) {
    return {{"unit_multiplicity_E", s.unit_multiplicity_E},
            {"unit_multiplicity_E2", s.unit_multiplicity_E2 ? json(*s.unit_multiplicity_E2) : json(nullptr)},
            {"spectral_radius", s.spectral_radius},
            {"power_iterations", s.power_iterations},
            {"power_converged", s.power_converged},
            {"identifiable", s.identifiable},
            {"tol", s.tol}};
}

json base_meta(const RunConfig& c) {
    json meta;
    meta["program"] = "twoscale_cli";
    meta["version"] = kVersion;
    meta["seed"] = c.seed;
    meta["argv"] = c.to_args();
    meta["config"] = config_json(c);
    return meta;
}

void write_meta(const RunConfig& c, const json& meta) {
    auto out = open_out(fs::path(c.out) / "meta.json");
    out << meta.dump(2) << '\n';
}

CohortSchema schema_of(const RunConfig& c) {
    CohortSchema schema;
    schema.p = c.p;
    schema.q = c.q;
    schema.d = c.shared_d;
    schema.t_max = c.t_max;
    schema.a0 = c.a0;
    schema.a_max = c.a_max;
    return schema;
}

FitOptions fit_options(const RunConfig& c) {
    FitOptions opts;
    opts.method = solve_method_from_string(c.method);
    opts.tol = c.tol;
    opts.max_iter = c.max_iter;
    return opts;
}

Fit fit_input(const RunConfig& c, std::ostream& err) {
    const SubjectCohort cohort = parse_subjects_file(c.input, schema_of(c));
    const TwoScaleGrid grid(cohort.t_max, cohort.a0, cohort.a_max, c.grid_time, c.grid_age);
    Fit fit = fit_model(cohort, grid, fit_options(c));
    if (fit.spectral && !fit.spectral->identifiable)
        err << "warning: eigenvalue 1 of E has multiplicity " << fit.spectral->unit_multiplicity_E << ", expected "
            << c.shared_d << "; identification is doubtful\n";
    if (fit.report.method == SolveMethod::backfit && !fit.report.converged)
        err << "warning: backfitting stopped after " << fit.report.iterations << " iterations without converging\n";
    return fit;
}

int cmd_estimate(const RunConfig& c, std::ostream& out, std::ostream& err) {
    const Fit fit = fit_input(c, err);
    ensure_dir(c.out);
    const fs::path dir(c.out);
    std::vector<std::string> files = {"estimates.csv", "marginal.csv", "solve_report.txt", "meta.json"};
    {
        auto f = open_out(dir / "estimates.csv");
        if (c.boot == 0) {
            write_step_csv(f, fit.theta, "estimate");
        } else {
            const auto ens = run_bootstrap(fit, c.boot, c.boot_variant, weight_law_from_string(c.weights), c.seed,
                                           c.threads);
            write_summary_csv(f, summarize_inference(fit.theta, ens, c.alpha));
        }
    }
    {
        auto f = open_out(dir / "marginal.csv");
        write_marginal_csv(f, fit.marginal);
    }
    {
        auto f = open_out(dir / "solve_report.txt");
        write_solve_report(f, fit.report, fit.spectral ? &*fit.spectral : nullptr);
    }
    if (c.dump_operator) {
        auto f = open_out(dir / "operator.bin");
        write_operator_binary(f, fit.op);
        files.push_back("operator.bin");
    }
    json meta = base_meta(c);
    meta["n"] = fit.inc.n;
    meta["events"] = fit.inc.total_events();
    meta["grid"] = {{"t_max", fit.inc.grid.t_max()}, {"a0", fit.inc.grid.a0()}, {"a_max", fit.inc.grid.a_max()},
                    {"j", fit.inc.grid.j()},         {"k", fit.inc.grid.k()}};
    meta["solve_report"] = solve_json(fit.report);
    if (fit.spectral) meta["spectral_report"] = spectral_json(*fit.spectral);
    meta["outputs"] = files;
    write_meta(c, meta);
    out << "estimated " << fit.inc.n << " subjects on a " << fit.inc.grid.j() << "x" << fit.inc.grid.k()
        << " grid; results in " << c.out << '\n';
    return kOk;
}

Scenario scenario_of(const RunConfig& c) {
    Scenario sc;
    sc.grid_time = c.grid_time;
    sc.grid_age = c.grid_age;
    sc.entry_max = c.entry_max;
    if (c.t_max) sc.t_max = *c.t_max;
    if (c.a0) sc.a0 = *c.a0;
    if (c.a_max) sc.a_max = *c.a_max;
    sc.validate();
    return sc;
}

int cmd_simulate(const RunConfig& c, std::ostream& out) {
    const Scenario sc = scenario_of(c);
    if (c.n.empty()) throw std::invalid_argument("simulate needs at least one sample size");
    if (c.reps < 1) throw std::invalid_argument("simulate needs reps >= 1");
    std::vector<StudyResult> studies;
    for (std::size_t n : c.n) {
        const std::uint64_t seed = derive_seed(c.seed, 0, n);
        if (c.table == "bias")
            studies.push_back(bias_study(n, c.reps, sc, seed, c.threads));
        else
            studies.push_back(coverage_study(n, c.reps, c.boot, c.alpha, sc, seed, c.threads, c.boot_variant,
                                             weight_law_from_string(c.weights)));
    }
    ensure_dir(c.out);
    const fs::path dir(c.out);
    std::vector<std::string> files;
    if (c.table == "bias") {
        auto f = open_out(dir / "table1.csv");
        write_bias_table(f, studies);
        files.push_back("table1.csv");
    } else {
        auto f2 = open_out(dir / "table2.csv");
        write_coverage_table(f2, studies);
        auto f3 = open_out(dir / "table3.csv");
        write_band_table(f3, studies);
        files = {"table2.csv", "table3.csv"};
    }
    files.push_back("meta.json");
    json meta = base_meta(c);
    meta["scenario_hash"] = sc.fingerprint();
    meta["scenario"] = {{"beta", sc.beta},
                        {"alpha_breaks", sc.alpha_breaks},
                        {"alpha_rates", sc.alpha_rates},
                        {"zero_entry_prob", sc.zero_entry_prob},
                        {"entry_max", sc.entry_max},
                        {"censor_time", sc.censor_time}};
    meta["grid"] = {{"t_max", sc.t_max}, {"a0", sc.a0}, {"a_max", sc.a_max}, {"j", sc.grid_time}, {"k", sc.grid_age}};
    meta["studies"] = json::array();
    for (const auto& st : studies)
        meta["studies"].push_back(
            {{"n", st.n}, {"reps", st.reps}, {"boot", st.boot}, {"seed", st.seed}, {"alpha", st.alpha}});
    meta["outputs"] = files;
    write_meta(c, meta);
    out << "wrote " << c.table << " study for " << studies.size() << " sample size(s) to " << c.out << '\n';
    return kOk;
}

int cmd_predict(const RunConfig& c, std::ostream& out, std::ostream& err) {
    if (c.entry_ages.empty()) throw std::invalid_argument("predict needs at least one entry age");
    if (c.input.empty() == c.estimates.empty())
        throw std::invalid_argument("predict needs exactly one of --input and --estimates");
    ThetaEstimate theta;
    std::optional<BootstrapEnsemble> ens;
    json meta = base_meta(c);
    if (!c.input.empty()) {
        const Fit fit = fit_input(c, err);
        theta = fit.theta;
        if (c.boot >= 2)
            ens = run_bootstrap(fit, c.boot, c.boot_variant, weight_law_from_string(c.weights), c.seed, c.threads);
        meta["solve_report"] = solve_json(fit.report);
        if (fit.spectral) meta["spectral_report"] = spectral_json(*fit.spectral);
    } else {
        std::ifstream in(c.estimates);
        if (!in) throw std::ios_base::failure("cannot open '" + c.estimates + "'");
        theta = read_step_csv(in);
    }
    const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(c.x.data(), static_cast<Eigen::Index>(c.x.size()));
    const Eigen::VectorXd z = Eigen::Map<const Eigen::VectorXd>(c.z.data(), static_cast<Eigen::Index>(c.z.size()));
    // validate all ages before writing anything
    std::vector<SurvivalCurve> curves;
    for (double age : c.entry_ages)
        curves.push_back(predict_survival(theta, ens ? &*ens : nullptr, age, c.alpha, x, z));
    ensure_dir(c.out);
    std::vector<std::string> files;
    for (std::size_t i = 0; i < curves.size(); ++i) {
        const std::string name = "survival_" + fmt(c.entry_ages[i]) + ".csv";
        auto f = open_out(fs::path(c.out) / name);
        write_survival_csv(f, curves[i]);
        files.push_back(name);
    }
    files.push_back("meta.json");
    meta["outputs"] = files;
    write_meta(c, meta);
    out << "wrote " << curves.size() << " survival curve(s) to " << c.out << '\n';
    return kOk;
}

int cmd_replay(const std::string& meta_path, std::ostream& out, std::ostream& err) {
    std::ifstream in(meta_path);
    if (!in) throw std::ios_base::failure("cannot open '" + meta_path + "'");
    json meta;
    try {
        meta = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(0, std::string("meta file: ") + e.what());
    }
    if (!meta.contains("argv") || !meta["argv"].is_array()) throw ParseError(0, "meta file has no argv array");
    return run(meta["argv"].get<std::vector<std::string>>(), out, err);
}

void add_common(CLI::App* app, RunConfig& c) {
    app->add_option("--grid-time", c.grid_time, "Duration grid points J")->check(CLI::Range(2, 100000));
    app->add_option("--grid-age", c.grid_age, "Age grid points K")->check(CLI::Range(2, 100000));
    app->add_option("--tmax", c.t_max, "Upper end of the duration axis");
    app->add_option("--a0", c.a0, "Lower end of the age axis");
    app->add_option("--amax", c.a_max, "Upper end of the age axis");
    app->add_option("--threads", c.threads, "Worker threads (0 = all cores); results do not depend on it");
    app->add_option("--seed", c.seed, "Master seed");
    app->add_option("--out", c.out, "Output directory");
    app->add_option("--alpha", c.alpha, "Band and interval level")->check(CLI::Range(1e-6, 1.0 - 1e-6));
    app->add_option("--boot", c.boot, "Bootstrap replicates B (0 disables inference)");
    app->add_option("--boot-variant", c.boot_variant, "1: G dN, 2: G (dN - fitted)")->check(CLI::IsMember({1, 2}));
    app->add_option("--weights", c.weights, "Multiplier law")->check(CLI::IsMember({"normal", "rademacher"}));
}

void add_model(CLI::App* app, RunConfig& c) {
    app->add_option("--input", c.input, "Subject CSV");
    app->add_option("--p", c.p, "Columns of X")->check(CLI::PositiveNumber);
    app->add_option("--q", c.q, "Columns of Z")->check(CLI::PositiveNumber);
    app->add_option("--shared-d", c.shared_d, "Leading columns shared by X and Z");
    app->add_option("--method", c.method, "Solver")->check(CLI::IsMember({"direct", "backfit"}));
    app->add_option("--tol", c.tol, "Backfitting tolerance")->check(CLI::PositiveNumber);
    app->add_option("--max-iter", c.max_iter, "Backfitting iteration cap")->check(CLI::PositiveNumber);
}

}  // namespace

std::vector<std::string> RunConfig::to_args() const {
    std::vector<std::string> a = {command};
    auto add = [&a](const std::string& flag, const std::string& v) {
        a.push_back(flag);
        a.push_back(v);
    };
    auto add_list = [&a](const std::string& flag, const auto& values, auto&& conv) {
        if (values.empty()) return;
        a.push_back(flag);
        for (const auto& v : values) a.push_back(conv(v));
    };
    add("--grid-time", std::to_string(grid_time));
    add("--grid-age", std::to_string(grid_age));
    if (t_max) add("--tmax", fmt(*t_max));
    if (a0) add("--a0", fmt(*a0));
    if (a_max) add("--amax", fmt(*a_max));
    add("--threads", std::to_string(threads));
    add("--seed", std::to_string(seed));
    add("--out", out);
    add("--alpha", fmt(alpha));
    add("--boot", std::to_string(boot));
    add("--boot-variant", std::to_string(boot_variant));
    add("--weights", weights);
    if (command == "estimate" || command == "predict") {
        if (!input.empty()) add("--input", input);
        add("--p", std::to_string(p));
        add("--q", std::to_string(q));
        add("--shared-d", std::to_string(shared_d));
        add("--method", method);
        add("--tol", fmt(tol));
        add("--max-iter", std::to_string(max_iter));
    }
    if (command == "estimate" && dump_operator) a.push_back("--dump-operator");
    if (command == "simulate") {
        add("--table", table);
        add_list("--n", n, [](std::size_t v) { return std::to_string(v); });
        add("--reps", std::to_string(reps));
        add("--entry-max", fmt(entry_max));
    }
    if (command == "predict") {
        if (!estimates.empty()) add("--estimates", estimates);
        add_list("--ages", entry_ages, fmt);
        add_list("--x", x, fmt);
        add_list("--z", z, fmt);
    }
    return a;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    RunConfig c;
    std::string replay_path;
    CLI::App app{"Two-time-scale additive hazard estimation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    auto* est = app.add_subcommand("estimate", "Fit the model to a subject CSV");
    add_common(est, c);
    add_model(est, c);
    est->add_flag("--dump-operator", c.dump_operator, "Also write the operator as operator.bin");
    est->get_option("--input")->required();

    auto* sim = app.add_subcommand("simulate", "Monte Carlo bias or coverage study");
    add_common(sim, c);
    sim->add_option("--table", c.table, "Which study")->check(CLI::IsMember({"bias", "coverage"}));
    sim->add_option("--n", c.n, "Sample sizes")->expected(1, -1);
    sim->add_option("--reps", c.reps, "Monte Carlo repetitions")->check(CLI::PositiveNumber);
    sim->add_option("--entry-max", c.entry_max, "Upper end of the uniform entry-age law");

    auto* pred = app.add_subcommand("predict", "Survival curves with bands for given entry ages");
    add_common(pred, c);
    add_model(pred, c);
    pred->add_option("--estimates", c.estimates, "Estimates CSV from a previous run (no bands)");
    pred->add_option("--ages", c.entry_ages, "Entry ages")->required()->expected(1, -1);
    pred->add_option("--x", c.x, "Duration covariate vector (default all ones)")->expected(1, -1);
    pred->add_option("--z", c.z, "Age covariate vector (default all ones)")->expected(1, -1);

    auto* rep = app.add_subcommand("replay", "Re-run the command recorded in a meta.json");
    rep->add_option("meta", replay_path, "meta.json")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kParseError;
    }

    try {
        if (*rep) return cmd_replay(replay_path, out, err);
        if (*est) c.command = "estimate";
        if (*sim) c.command = "simulate";
        if (*pred) c.command = "predict";
        if (c.command == "estimate") return cmd_estimate(c, out, err);
        if (c.command == "simulate") return cmd_simulate(c, out);
        return cmd_predict(c, out, err);
    } catch (const ParseError& e) {
        err << "parse error: " << e.what() << '\n';
        return kParseError;
    } catch (const IdentificationError& e) {
        err << "identification failure: " << e.what() << '\n';
        return kIdentificationError;
    } catch (const DivergenceError& e) {
        err << "identification failure: " << e.what() << '\n';
        return kIdentificationError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kIoError;
    }
}

}  // namespace twoscale::cli
