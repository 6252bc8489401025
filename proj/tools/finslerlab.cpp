// Command-line front end: report | verify | classify | geodesic | catalog.
// Exit codes: 0 pass, 1 identity failure, 2 config error, 3 domain/numeric
// error.  A config file (key = value, [subcommand] sections) can pre-set any
// flag; explicit flags win.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "finsler/finsler.hpp"

namespace {

using namespace finsler;

void add_common(CLI::App* sub, RunConfig& cfg) {
    sub->fallthrough();  // lets app-level flags like --config follow the subcommand
    sub->add_option("--metric", cfg.metric, "catalog entry under test")
        ->capture_default_str();
    sub->add_option("--metric-file", cfg.metric_file,
                    "expression file (F = <expr>, optional guard = <expr>); "
                    "overrides --metric");
    sub->add_option("--dim", cfg.dim, "base dimension, 2 to 4 (required)");
    sub->add_option("--samples", cfg.samples, "number of seeded samples")
        ->capture_default_str();
    sub->add_option("--seed", cfg.seed, "sampling seed")->capture_default_str();
    sub->add_option("--out", cfg.out_path,
                    "write the report to this file instead of stdout");
}

void add_fields(CLI::App* sub, RunConfig& cfg) {
    sub->add_option("--field", cfg.fields,
                    "vector fields to test (repeatable)")
        ->capture_default_str();
}

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream os(out_path, std::ios::binary);
    if (!os) throw ConfigError("cannot open output file: " + out_path);
    os << text;
}

int run_geodesic(RunConfig& cfg, const std::vector<double>& x0in,
                 const std::vector<double>& y0in, const std::string& probe) {
    cfg.validate();
    CatalogEntry entry = load_entry(cfg);
    const int n = entry.metric.dim;
    if (static_cast<int>(x0in.size()) != n ||
        static_cast<int>(y0in.size()) != n)
        throw ConfigError("--x0 and --y0 need exactly dim components");
    Vec x0{}, y0{};
    for (int i = 0; i < n; ++i) {
        x0[i] = x0in[i];
        y0[i] = y0in[i];
    }

    ProbeQuantity q = ProbeQuantity::FlagCurvature;
    if (probe == "ricci") q = ProbeQuantity::RicciOverF2;
    else if (probe == "s-over-f") q = ProbeQuantity::SOverF;
    else if (probe == "distortion") q = ProbeQuantity::Distortion;
    else if (probe != "flag") throw ConfigError("unknown probe '" + probe + "'");

    Trajectory tr =
        integrate_geodesic(entry.metric, x0, y0, cfg.t_end, cfg.steps);

    // one probed scalar per logged point for the extra CSV column
    std::vector<double> col;
    col.reserve(tr.samples.size());
    Rng rng(cfg.seed ^ 0xf1a6ULL);
    for (const auto& p : tr.samples) {
        TangentSample s{n, p.x, p.y, domain_margin(entry.metric, p.x)};
        switch (q) {
            case ProbeQuantity::FlagCurvature: {
                PointEval pe(entry.metric, s, PointEval::Depth::Riemann);
                CurvatureEval cv(pe);
                col.push_back(cv.flag_curvature(draw_flag_vector(pe, rng)));
                break;
            }
            case ProbeQuantity::RicciOverF2: {
                PointEval pe(entry.metric, s, PointEval::Depth::Riemann);
                CurvatureEval cv(pe);
                double F = pe.F_jet().value();
                col.push_back(cv.ric_scalar() / (F * F));
                break;
            }
            case ProbeQuantity::SOverF: {
                PointEval pe(entry.metric, s, PointEval::Depth::Spray);
                NonRiemEval nr(pe);
                col.push_back(nr.s_curvature() / pe.F_jet().value());
                break;
            }
            case ProbeQuantity::Distortion: {
                PointEval pe(entry.metric, s, PointEval::Depth::Spray);
                NonRiemEval nr(pe);
                col.push_back(nr.distortion());
                break;
            }
        }
    }

    std::ostringstream csv;
    write_trajectory_csv(csv, tr, &col, probe);
    emit(csv.str(), cfg.out_path);

    ProbeStats st = probe_constancy(entry.metric, tr, q, cfg.seed);
    // keep the CSV stream clean: stats go to the other channel
    std::ostream& os = cfg.out_path.empty() ? std::cerr : std::cout;
    os << "probe " << probe << ": mean " << fmt_double(st.mean)
       << " max_deviation " << fmt_double(st.max_deviation) << " points "
       << st.points << " values " << st.values << "\n";
    os << "F drift " << fmt_double(tr.f_drift()) << "\n";
    return 0;
}

int run_catalog() {
    std::cout << "catalog entries:\n";
    for (const auto& name : catalog_names()) {
        CatalogEntry e = catalog_build(name, 2);
        std::cout << "  " << name << ": " << e.summary;
        std::string flags;
        if (e.riemannian) flags += " riemannian";
        if (e.berwald) flags += " berwald";
        if (e.landsberg) flags += " landsberg";
        if (e.projectively_flat) flags += " projectively-flat";
        if (!flags.empty()) std::cout << " [" << flags.substr(1) << "]";
        std::cout << "\n";
    }
    std::cout << "vector fields:\n";
    for (const auto& name : catalog_field_names())
        std::cout << "  " << name << "\n";
    std::cout << "suites:\n  all\n";
    for (const auto& name : suite_names()) std::cout << "  " << name << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"finslerlab: numerical Finsler geometry engine"};
    app.require_subcommand(1);
    app.set_config("--config", "",
                   "config file (key = value, [subcommand] sections); "
                   "explicit flags win");

    RunConfig cfg;
    std::vector<double> x0, y0;
    std::string probe = "flag";

    auto* rep = app.add_subcommand(
        "report", "dump metric, connection, and curvature tensors at samples");
    add_common(rep, cfg);

    auto* ver =
        app.add_subcommand("verify", "run identity suites and report residuals");
    add_common(ver, cfg);
    add_fields(ver, cfg);
    {
        std::vector<std::string> allowed = suite_names();
        allowed.insert(allowed.begin(), "all");
        ver->add_option("--suite", cfg.suite, "suite to run")
            ->capture_default_str()
            ->check(CLI::IsMember(allowed));
    }
    ver->add_option("--tol-jet", cfg.tol_jet,
                    "tolerance for jet-exact identities")
        ->capture_default_str();
    ver->add_option("--tol-flow", cfg.tol_flow,
                    "tolerance for flow and stencil based identities")
        ->capture_default_str();
    ver->add_option("--tol-quad", cfg.tol_quad,
                    "tolerance for quadrature-backed comparisons")
        ->capture_default_str();

    auto* cls = app.add_subcommand(
        "classify", "classify vector fields against the symmetry ladder");
    add_common(cls, cfg);
    add_fields(cls, cfg);

    auto* geo = app.add_subcommand(
        "geodesic", "integrate a geodesic, write CSV, probe constancy");
    add_common(geo, cfg);
    geo->add_option("--x0", x0, "start point (comma separated)")
        ->delimiter(',');
    geo->add_option("--y0", y0, "start velocity (comma separated)")
        ->delimiter(',');
    geo->add_option("--t-end", cfg.t_end, "integration time")
        ->capture_default_str();
    geo->add_option("--steps", cfg.steps, "fixed RK4 step count")
        ->capture_default_str();
    geo->add_option("--probe", probe,
                    "probed scalar: flag, ricci, s-over-f, distortion")
        ->capture_default_str()
        ->check(CLI::IsMember({"flag", "ricci", "s-over-f", "distortion"}));

    auto* cat = app.add_subcommand("catalog",
                                   "list catalog entries, fields, and suites");
    cat->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (rep->parsed()) {
            cfg.validate();
            emit(run_tensor_report(cfg).serialize(), cfg.out_path);
            return 0;
        }
        if (ver->parsed()) {
            VerifyOutcome out = run_verify(cfg);
            emit(out.report.serialize(), cfg.out_path);
            if (out.exit_code != 0)
                std::cerr << "worst failing check: " << out.worst << "\n";
            return out.exit_code;
        }
        if (cls->parsed()) {
            emit(run_classify_report(cfg).serialize(), cfg.out_path);
            return 0;
        }
        if (geo->parsed()) return run_geodesic(cfg, x0, y0, probe);
        if (cat->parsed()) return run_catalog();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        for (const auto* sub : app.get_subcommands())
            std::cerr << sub->help();
        return 2;
    } catch (const SyntaxError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const UnknownIdentifier& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const IndexOutOfRange& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const YVariableInVectorField& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
