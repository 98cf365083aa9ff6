// Command-line front end: solve, evaluate, simulate, sweep, validate, gen-source.

#include "aoii/experiments.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace aoii;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitInput = 2;

struct Options {
    std::string config;
    std::string model;
    std::string out;
    std::vector<std::string> families;
    std::vector<double> rates;
    double rate = -1.0;
    std::string policy;
    std::optional<std::uint64_t> seed;
    std::optional<int> delta_cap;
    std::optional<double> tol;
    std::optional<std::int64_t> horizon;
    std::optional<int> replications;
    std::string trajectory;
    bool no_sim = false;
    int gen_n = 4;
    std::uint64_t gen_seed = 1;
};

/// Defaults, then the config file, then explicit flags.
ExperimentSpec build_spec(const Options& o) {
    ExperimentSpec spec;
    if (!o.config.empty()) apply_config(spec, read_json_file(o.config));
    if (!o.model.empty()) spec.model = o.model;
    if (!o.out.empty()) spec.out = o.out;
    if (!o.families.empty()) {
        spec.families.clear();
        for (const auto& f : o.families) spec.families.push_back(parse_family(f));
    }
    if (!o.rates.empty()) spec.rates = o.rates;
    if (o.seed) spec.simulation.seed = *o.seed;
    if (o.delta_cap) spec.solver.delta_cap = *o.delta_cap;
    if (o.tol) spec.solver.rvi.tol = *o.tol;
    if (o.horizon) spec.simulation.horizon = *o.horizon;
    if (o.replications) spec.simulation.replications = *o.replications;
    if (o.no_sim) spec.simulate = false;
    spec.validate();
    return spec;
}

fs::path output_dir(const ExperimentSpec& spec) {
    fs::path dir(spec.out);
    fs::create_directories(dir);
    return dir;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    return f;
}

double require_rate(const Options& o) {
    if (o.rate < 0.0) throw ModelError("--rate is required");
    if (!(o.rate > 0.0 && o.rate <= 1.0)) throw ModelError("--rate must lie in (0,1]");
    return o.rate;
}

Family single_family(const ExperimentSpec& spec, const Options& o) {
    if (o.families.size() > 1) throw ModelError("give a single --family for this command");
    return o.families.empty() ? Family::Multi : spec.families.front();
}

std::string describe_tables(const AnyPolicy& policy) {
    std::ostringstream out;
    if (const auto* mix = std::get_if<RandomizedMixturePolicy>(&policy)) {
        out << "rho = " << format_number(mix->rho()) << " (weight of the minus component)\n\n";
        out << "minus component\n" << threshold_table(mix->minus()) << '\n';
        out << "plus component\n" << threshold_table(mix->plus());
    } else if (const auto* p = std::get_if<PeriodicPolicy>(&policy)) {
        out << "period = " << p->period() << '\n';
    } else {
        std::visit(
            [&](const auto& q) {
                using T = std::decay_t<decltype(q)>;
                if constexpr (!std::is_same_v<T, PeriodicPolicy> && !std::is_same_v<T, RandomizedMixturePolicy>)
                    out << threshold_table(StationaryPolicy(q));
            },
            policy);
    }
    return out.str();
}

/// Policy from --policy, or synthesized from --family and --rate.
AnyPolicy obtain_policy(const ExperimentSpec& spec, const Options& o, const ModelDefinition& m) {
    if (!o.policy.empty()) return load_policy(o.policy);
    return synthesize(single_family(spec, o), m.chain, m.decoder, require_rate(o), spec.solver).policy;
}

int cmd_solve(const Options& o) {
    const ExperimentSpec spec = build_spec(o);
    const Family family = single_family(spec, o);
    const double rate = require_rate(o);
    const ModelDefinition m = resolve_model(spec.model);
    const FamilyPolicy fp = synthesize(family, m.chain, m.decoder, rate, spec.solver);
    const fs::path dir = output_dir(spec);

    save_policy((dir / "policy.json").string(), fp.policy);
    if (fp.trace) {
        auto f = open_out(dir / "trace.csv");
        write_trace_csv(f, *fp.trace);
    }
    {
        auto f = open_out(dir / "thresholds.txt");
        f << "family " << family_name(family) << ", R = " << format_number(rate) << '\n';
        if (fp.trace)
            f << (family == Family::Single ? "n- = " : "lambda- = ") << format_number(fp.trace->lambda_minus)
              << (family == Family::Single ? ", n+ = " : ", lambda+ = ") << format_number(fp.trace->lambda_plus)
              << '\n';
        f << describe_tables(fp.policy);
    }

    std::cout << "family " << family_name(family) << ", R = " << format_number(rate) << '\n'
              << "average AoII " << format_number(fp.avg_aoii) << ", rate " << format_number(fp.avg_rate) << '\n';
    if (fp.trace) {
        std::cout << "bracket [" << format_number(fp.trace->lambda_minus) << ", "
                  << format_number(fp.trace->lambda_plus) << "], rho " << format_number(fp.trace->rho);
        if (fp.trace->delta_cap > 0) std::cout << ", AoII cap " << fp.trace->delta_cap;
        std::cout << '\n';
        for (const auto& w : fp.trace->warnings) std::cerr << "warning: " << w << '\n';
    }
    std::cout << describe_tables(fp.policy) << "wrote " << dir.string() << '\n';
    return 0;
}

int cmd_evaluate(const Options& o) {
    const ExperimentSpec spec = build_spec(o);
    const ModelDefinition m = resolve_model(spec.model);
    const AnyPolicy policy = obtain_policy(spec, o, m);
    const PolicyReport report = evaluate_any(policy, m.chain, m.decoder);
    const fs::path dir = output_dir(spec);
    const std::string label = o.policy.empty() ? family_name(single_family(spec, o)) : fs::path(o.policy).stem().string();
    std::optional<double> target;
    if (o.rate > 0.0) target.emplace(o.rate);
    {
        auto f = open_out(dir / "evaluation.csv");
        write_evaluation_csv(f, label, report, target);
    }
    write_evaluation_csv(std::cout, label, report, target);
    return 0;
}

int cmd_simulate(const Options& o) {
    const ExperimentSpec spec = build_spec(o);
    const ModelDefinition m = resolve_model(spec.model);
    const AnyPolicy policy = obtain_policy(spec, o, m);
    const fs::path dir = output_dir(spec);
    SimulationConfig cfg = spec.simulation;
    cfg.record_cycles = false;
    cfg.validate();

    if (!o.trajectory.empty()) {
        auto f = open_out(o.trajectory);
        write_trajectory_header(f);
        simulate_replication(policy, m.chain, m.decoder, cfg, 0,
                             [&](const TrajectoryRow& row) { write_trajectory_row(f, row); });
    }
    const SimulationResult res = run(policy, m.chain, m.decoder, cfg);
    {
        auto f = open_out(dir / "stats.csv");
        write_stats_csv(f, res);
    }
    write_stats_csv(std::cout, res);
    if (res.few_cycles) std::cerr << "warning: fewer than 30 complete regeneration cycles\n";
    return 0;
}

int cmd_sweep(const Options& o) {
    const ExperimentSpec spec = build_spec(o);
    if (spec.rates.size() < 2) throw ModelError("a sweep needs at least two grid rates");
    const ModelDefinition m = resolve_model(spec.model);
    const std::optional<SimulationConfig> sim =
        spec.simulate ? std::optional<SimulationConfig>(spec.simulation) : std::nullopt;
    const auto rows = estimate_curve(spec.families, m.chain, m.decoder, spec.rates, spec.solver, sim);
    const fs::path dir = output_dir(spec);
    {
        auto f = open_out(dir / "curve.csv");
        write_curve_csv(f, rows);
    }
    {
        auto f = open_out(dir / "curve.svg");
        write_curve_svg(f, rows, "average AoII, model " + spec.model);
    }
    write_curve_csv(std::cout, rows);
    return 0;
}

int cmd_validate(const Options& o) {
    const ExperimentSpec spec = build_spec(o);
    ValidationReport report;
    bool model_ok = true;
    ModelDefinition m{reference_source(), DecoderProfile::standard()};
    if (spec.model == "reference" || spec.model.rfind("random:", 0) == 0) {
        m = resolve_model(spec.model);
    } else {
        const auto doc = read_json_file(spec.model);
        model_ok = validate_model_document(doc, report);
        if (model_ok) m = parse_model(doc);
    }
    if (model_ok) {
        ValidationOptions vo;
        vo.rvi = spec.solver.rvi;
        vo.simulation.seed = spec.simulation.seed;
        const ValidationReport rest = run_validation(m.chain, m.decoder, vo);
        report.checks.insert(report.checks.end(), rest.checks.begin(), rest.checks.end());
    }
    const fs::path dir = output_dir(spec);
    const std::string text = to_json(report).dump(2);
    {
        auto f = open_out(dir / "validation.json");
        f << text << '\n';
    }
    std::cout << text << '\n';
    if (!model_ok) return kExitInput;
    return report.passed() ? 0 : kExitRuntime;
}

int cmd_gen_source(const Options& o) {
    const SourceChain chain = generate_random_source(o.gen_n, o.gen_seed);
    const auto doc = to_json(chain, DecoderProfile::standard());
    if (o.out.empty()) {
        std::cout << doc.dump(2) << '\n';
    } else {
        const fs::path path(o.out);
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        auto f = open_out(path);
        f << doc.dump(2) << '\n';
    }
    return 0;
}

void print_defaults() {
    nlohmann::json doc = to_json(ExperimentSpec{});
    const ValidationOptions v;
    doc["validation"] = {{"rate", v.rate_target}, {"lambdas", v.lambdas}, {"delta_cap", v.delta_cap},
                         {"simulation_horizon", v.simulation.horizon}};
    doc["simulation"]["burn_in_default"] = "1% of the horizon";
    std::cout << doc.dump(2) << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Threshold transmission policies for AoII over HARQ links"};
    app.require_subcommand(0, 1);
    Options o;
    bool defaults = false;
    app.add_flag("--print-defaults", defaults, "Print every configurable default and exit");

    auto common = [&](CLI::App* sub, bool solver, bool simulation) {
        sub->add_option("--config", o.config, "JSON experiment config; flags override it")->check(CLI::ExistingFile);
        sub->add_option("--model", o.model, "Model file, 'reference', or 'random:N:SEED'");
        sub->add_option("--out", o.out, "Output directory");
        if (solver) {
            sub->add_option("--delta-cap", o.delta_cap, "AoII cap for RVI (0 selects it automatically)")
                ->check(CLI::NonNegativeNumber);
            sub->add_option("--tol", o.tol, "RVI span tolerance")->check(CLI::PositiveNumber);
        }
        if (simulation) {
            sub->add_option("--seed", o.seed, "Simulation seed");
            sub->add_option("--horizon", o.horizon, "Simulated slots per replication");
            sub->add_option("--replications", o.replications, "Independent replications");
        }
    };

    auto* solve = app.add_subcommand("solve", "Synthesize a policy for a rate constraint");
    common(solve, true, false);
    solve->add_option("--rate", o.rate, "Rate constraint R in (0,1]")->required();
    solve->add_option("--family", o.families, "multi | single | periodic | optimal-oracle")->expected(1);

    auto* evaluate = app.add_subcommand("evaluate", "Closed-form AoII and rate of a policy");
    common(evaluate, true, false);
    evaluate->add_option("--policy", o.policy, "Policy file")->check(CLI::ExistingFile);
    evaluate->add_option("--rate", o.rate, "Rate constraint, when synthesizing");
    evaluate->add_option("--family", o.families, "Family, when synthesizing")->expected(1);

    auto* simulate = app.add_subcommand("simulate", "Monte-Carlo estimate of a policy");
    common(simulate, true, true);
    simulate->add_option("--policy", o.policy, "Policy file")->check(CLI::ExistingFile);
    simulate->add_option("--rate", o.rate, "Rate constraint, when synthesizing");
    simulate->add_option("--family", o.families, "Family, when synthesizing")->expected(1);
    simulate->add_option("--trajectory", o.trajectory, "Also write replication 0's trajectory CSV here");

    auto* sweep = app.add_subcommand("sweep", "AoII versus rate curves for several families");
    common(sweep, true, true);
    sweep->add_option("--family", o.families, "Families to include")->delimiter(',');
    sweep->add_option("--rates", o.rates, "Rate grid")->delimiter(',');
    sweep->add_flag("--no-sim", o.no_sim, "Skip the Monte-Carlo column");

    auto* validate = app.add_subcommand("validate", "Run the cross-check suite on a model");
    common(validate, true, true);

    auto* gen = app.add_subcommand("gen-source", "Write a random biased-diagonal source model");
    gen->add_option("--n", o.gen_n, "Number of source values")->check(CLI::Range(2, 4096));
    gen->add_option("--seed", o.gen_seed, "Generator seed");
    gen->add_option("--out", o.out, "Output file (stdout if omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitInput;
    }
    if (defaults) {
        print_defaults();
        return 0;
    }

    try {
        if (solve->parsed()) return cmd_solve(o);
        if (evaluate->parsed()) return cmd_evaluate(o);
        if (simulate->parsed()) return cmd_simulate(o);
        if (sweep->parsed()) return cmd_sweep(o);
        if (validate->parsed()) return cmd_validate(o);
        if (gen->parsed()) return cmd_gen_source(o);
        std::cout << app.help();
        return kExitInput;
    } catch (const ModelError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}
