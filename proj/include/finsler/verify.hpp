#pragma once

// Verification harness: named suites of identity checks over seeded samples,
// with pass/fail/skip rows collected into a ReportDocument.  Residuals are
// deterministic functions of (config, engine version); wall-clock data stays
// in meta sections.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <string>
#include <vector>

#include "finsler/catalog.hpp"
#include "finsler/core.hpp"
#include "finsler/curvature.hpp"
#include "finsler/errors.hpp"
#include "finsler/geodesics.hpp"
#include "finsler/nonriem.hpp"
#include "finsler/parallel.hpp"
#include "finsler/report.hpp"
#include "finsler/symmetry.hpp"

namespace finsler {

// ---------------------------------------------------------------------------
// Run configuration

struct RunConfig {
    std::string metric = "euclidean";  // catalog label
    std::string metric_file;           // overrides metric: expression file
    int dim = 0;                       // required
    std::vector<std::string> fields{"rotation", "translation", "c-projective"};
    int samples = 40;
    std::uint64_t seed = 1;
    double tol_jet = 1e-8;   // jet-exact identities
    double tol_flow = 1e-5;  // flow/FD-based identities
    double tol_quad = 1e-3;  // quadrature-based comparisons
    std::string suite = "all";
    std::string out_path;
    // geodesic subcommand
    std::vector<double> x0, y0;
    double t_end = 1.0;
    int steps = 400;

    void validate() const {
        if (dim < 2 || dim > kMaxDim)
            throw ConfigError("dim must be given and lie in [2, " +
                              std::to_string(kMaxDim) + "]");
        if (samples < 1) throw ConfigError("samples must be positive");
        if (!(tol_jet < tol_flow && tol_flow < tol_quad))
            throw ConfigError("tolerance tiers must be ordered jet < flow < quadrature");
    }
};


// Build the metric under test: catalog label, or an expression file with
// `F = <expr>` and optional `guard = <expr>` lines.
inline CatalogEntry load_entry(const RunConfig& cfg) {
    if (cfg.metric_file.empty()) return catalog_build(cfg.metric, cfg.dim);
    FILE* fp = std::fopen(cfg.metric_file.c_str(), "rb");
    if (!fp) throw ConfigError("cannot open metric file: " + cfg.metric_file);
    std::string text;
    char buf[4096];
    std::size_t got;
    while ((got = std::fread(buf, 1, sizeof buf, fp)) > 0) text.append(buf, got);
    std::fclose(fp);
    std::string fexpr, gexpr;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        std::size_t eq = line.find('=');
        if (line.empty() || line[0] == '#' || eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            std::size_t a = s.find_first_not_of(" \t\r");
            std::size_t b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key == "F") fexpr = val;
        else if (key == "guard") gexpr = val;
        else throw ConfigError("unknown key in metric file: " + key);
    }
    if (fexpr.empty())
        throw ConfigError("metric file must define F = <expression>");
    CatalogEntry e;
    e.name = cfg.metric_file;
    e.summary = "user expression file";
    e.metric = MetricField::parse(fexpr, cfg.dim, gexpr, "user");
    return e;
}

// ---------------------------------------------------------------------------
// Suite results

struct CheckRow {
    enum class Status { Pass, Fail, Skip };
    std::string name;
    double residual = 0.0;
    double tol = 0.0;
    Status status = Status::Pass;
    std::string note;  // skip reason or context
    Vec worst_x{}, worst_y{};
    int n = 0;
};

struct SuiteResult {
    std::string name;
    std::vector<CheckRow> rows;
    long long elapsed_ms = 0;

    bool pass() const {
        for (const auto& r : rows)
            if (r.status == CheckRow::Status::Fail) return false;
        return true;
    }
};

namespace detail {

// Track a named residual maximized over samples, remembering the worst sample.
struct RowAccum {
    CheckRow row;
    explicit RowAccum(std::string name, double tol) {
        row.name = std::move(name);
        row.tol = tol;
    }
    void feed(double r, const TangentSample& s) {
        if (r >= row.residual) {
            row.residual = r;
            row.worst_x = s.x;
            row.worst_y = s.y;
            row.n = s.n;
        }
    }
    CheckRow done() {
        row.status = row.residual <= row.tol ? CheckRow::Status::Pass
                                             : CheckRow::Status::Fail;
        return row;
    }
};

inline CheckRow skip_row(std::string name, std::string why) {
    CheckRow r;
    r.name = std::move(name);
    r.status = CheckRow::Status::Skip;
    r.note = std::move(why);
    return r;
}

// Samples clear of the chart boundary: the x-stencils behind the flow-based
// suites shrink with the margin, and residual quality goes with them.
inline std::vector<TangentSample> margin_samples(const CatalogEntry& e,
                                                 int count, std::uint64_t seed,
                                                 double min_margin) {
    std::vector<TangentSample> out;
    for (std::uint64_t salt = 0; static_cast<int>(out.size()) < count; ++salt) {
        if (salt >= 64)
            throw InsufficientSamples(
                "cannot draw enough samples away from the chart boundary");
        for (auto& s : draw_samples(e, count, seed + 1000 * salt)) {
            if (s.margin < min_margin) continue;
            out.push_back(s);
            if (static_cast<int>(out.size()) == count) break;
        }
    }
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Suite: core-identities

inline SuiteResult run_core_identities(const CatalogEntry& e,
                                       const RunConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    SuiteResult out{"core-identities", {}, 0};
    const int n = e.metric.dim;
    detail::RowAccum product("g_product_form", cfg.tol_jet);
    detail::RowAccum flagpole_c("cartan_flagpole_contraction", cfg.tol_jet);
    detail::RowAccum flagpole_a("torsion_flagpole_contraction", cfg.tol_jet);
    detail::RowAccum unit("unit_flagpole_norm", cfg.tol_jet);
    detail::RowAccum ladder("homogeneity_ladder", cfg.tol_jet);

    auto samples = draw_samples(e, cfg.samples, cfg.seed);
    for (const auto& s : samples) {
        PointEval pe(e.metric, s, PointEval::Depth::Spray);
        const Jet& F = pe.F_jet();
        TensorValue g = pe.fundamental_tensor();
        auto fam = pe.cartan();
        auto cs = pe.canonical_section();

        double rp = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                MultiIndex mi, mj, mij;
                mi.y[i] = 1;
                mj.y[j] = 1;
                mij.y[i] += 1;
                mij.y[j] += 1;
                double form = F.value() * F.partial(mij) +
                              F.partial(mi) * F.partial(mj);
                rp = std::max(rp, std::abs(g(i, j) - form));
            }
        product.feed(rp, s);

        double rc = 0.0, ra = 0.0;
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                double ac = 0.0, aa = 0.0;
                for (int i = 0; i < n; ++i) {
                    ac += s.y[i] * fam.C(i, j, k);
                    aa += fam.A(j, k, i) * cs.ell_up(i);
                }
                rc = std::max(rc, std::abs(ac));
                ra = std::max(ra, std::abs(aa));
            }
        flagpole_c.feed(rc, s);
        flagpole_a.feed(ra, s);

        double gll = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                gll += g(i, j) * cs.ell_up(i) * cs.ell_up(j);
        unit.feed(std::abs(gll - 1.0), s);

        // scale y and walk the ladder: F ~ lam, g ~ 1, C ~ 1/lam, G ~ lam^2
        const double lam = 1.7;
        TangentSample sl = s;
        for (int i = 0; i < n; ++i) sl.y[i] *= lam;
        PointEval pl(e.metric, sl, PointEval::Depth::Spray);
        double rl = std::abs(pl.F_jet().value() - lam * F.value());
        TensorValue gl = pl.fundamental_tensor();
        auto faml = pl.cartan();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                rl = std::max(rl, std::abs(gl(i, j) - g(i, j)));
        for (std::size_t r = 0; r < fam.C.data().size(); ++r)
            rl = std::max(rl, std::abs(faml.C.data()[r] -
                                       fam.C.data()[r] / lam));
        const auto& G = pe.spray_jets();
        const auto& Gl = pl.spray_jets();
        for (int i = 0; i < n; ++i)
            rl = std::max(rl, std::abs(Gl[i].value() - lam * lam * G[i].value()) /
                                  (1.0 + std::abs(G[i].value())));
        ladder.feed(rl, s);
    }
    out.rows = {product.done(), flagpole_c.done(), flagpole_a.done(),
                unit.done(), ladder.done()};
    out.elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
    return out;
}

// ---------------------------------------------------------------------------
// Suite: curvature-identities

inline SuiteResult run_curvature_identities(const CatalogEntry& e,
                                            const RunConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    SuiteResult out{"curvature-identities", {}, 0};
    const int n = e.metric.dim;
    detail::RowAccum flagtrace("berwald_double_contraction", cfg.tol_flow);
    detail::RowAccum ricci_id("ricci_exchange_identity", cfg.tol_flow);
    detail::RowAccum commut("berwald_commutation", cfg.tol_flow);
    detail::RowAccum bianchi1("trace_contraction_first", cfg.tol_flow);
    detail::RowAccum bianchi2("trace_contraction_second", cfg.tol_flow);
    detail::RowAccum scalarpole("ricci_scalar_flagpole", cfg.tol_flow);
    detail::RowAccum decomp("ricci_decomposition", cfg.tol_flow);

    auto samples = draw_samples(e, cfg.samples, cfg.seed + 1);
    for (const auto& s : samples) {
        PointEval pe(e.metric, s, PointEval::Depth::Full);
        CurvatureEval cv(pe);
        NonRiemEval nr(pe);

        TensorValue R = cv.riemann_trace();
        const auto& K = cv.K_jets();
        double scale = 1.0 + R.max_abs();
        double rr = 0.0;
        for (int i = 0; i < n; ++i)
            for (int mm = 0; mm < n; ++mm) {
                double acc = 0.0;
                for (int j = 0; j < n; ++j)
                    for (int l = 0; l < n; ++l)
                        acc += s.y[j] * s.y[l] * K[pe.i4(i, j, mm, l)].value();
                rr = std::max(rr, std::abs(acc - R(i, mm)) / scale);
            }
        flagtrace.feed(rr, s);

        std::vector<Jet> psi_y;
        psi_y.reserve(n);
        for (int i = 0; i < n; ++i) psi_y.push_back(pe.ycoord(i));
        ricci_id.feed(cv.ricci_identity_residual(psi_y).max_abs(), s);
        commut.feed(cv.berwald_commutation_residual(pe.F_jet()).max_abs(), s);

        const auto& Ktr = cv.K_trace_jets();
        TensorValue H = nr.h_curvature();
        double b1 = 0.0, b2 = 0.0;
        for (int l = 0; l < n; ++l)
            for (int mm = 0; mm < n; ++mm) {
                double a1 = 0.0;
                for (int j = 0; j < n; ++j)
                    a1 += s.y[j] * Ktr[pe.i2(j, l)].derivative(true, mm).value();
                b1 = std::max(b1, std::abs(a1));
            }
        for (int j = 0; j < n; ++j)
            for (int mm = 0; mm < n; ++mm) {
                double a2 = 0.0;
                for (int l = 0; l < n; ++l)
                    a2 += s.y[l] * Ktr[pe.i2(j, l)].derivative(true, mm).value();
                b2 = std::max(b2, std::abs(a2 + 2.0 * H(j, mm)));
            }
        bianchi1.feed(b1, s);
        bianchi2.feed(b2, s);

        TensorValue ric = cv.ricci_lower();
        auto cs = pe.canonical_section();
        double acc = 0.0;
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k)
                acc += cs.ell_up(i) * cs.ell_up(k) * ric(i, k);
        double F2 = pe.F_jet().value() * pe.F_jet().value();
        scalarpole.feed(std::abs(acc - cv.ric_scalar() / F2), s);

        TensorValue rsym = cv.ricci_symmetrized();
        double rd = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                rd = std::max(rd,
                              std::abs(ric(i, j) - (rsym(i, j) - H(i, j))) /
                                  (1.0 + std::abs(ric(i, j))));
        decomp.feed(rd, s);
    }
    out.rows = {flagtrace.done(), ricci_id.done(), commut.done(),
                bianchi1.done(), bianchi2.done(), scalarpole.done(),
                decomp.done()};
    out.elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
    return out;
}

// ---------------------------------------------------------------------------
// Suite: nonriemannian

inline SuiteResult run_nonriemannian(const CatalogEntry& e,
                                     const RunConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    SuiteResult out{"nonriemannian", {}, 0};
    const int n = e.metric.dim;

    // two routes to the mean Berwald curvature: jet trace vs y-differenced
    // S-curvature with the quadrature volume term live in every evaluation
    {
        detail::RowAccum two_path("mean_berwald_two_path", cfg.tol_quad);
        auto samples =
            draw_samples(e, std::min(cfg.samples, 10), cfg.seed + 2);
        for (const auto& s : samples) {
            PointEval pe(e.metric, s, PointEval::Depth::SprayDeep);
            NonRiemEval nr(pe);
            TensorValue a = nr.mean_berwald_fd();
            TensorValue b = nr.mean_berwald();
            two_path.feed(max_abs_diff(a, b) / (1.0 + b.max_abs()), s);
        }
        out.rows.push_back(two_path.done());
    }

    // S vanishes identically on Berwald-type entries
    if (e.berwald) {
        detail::RowAccum svan("s_curvature_berwald_zero", 2e-6);
        auto samples =
            draw_samples(e, std::min(cfg.samples, 10), cfg.seed + 3);
        for (const auto& s : samples) {
            PointEval pe(e.metric, s, PointEval::Depth::Spray);
            NonRiemEval nr(pe);
            svan.feed(std::abs(nr.s_curvature()), s);
        }
        out.rows.push_back(svan.done());
    } else {
        out.rows.push_back(detail::skip_row("s_curvature_berwald_zero",
                                            "entry is not Berwald type"));
    }

    // S equals the rate of the distortion along a geodesic
    {
        auto samples = draw_samples(e, 8, cfg.seed + 4);
        const TangentSample* pick = nullptr;
        for (const auto& s : samples)
            if (!pick || s.margin > pick->margin) pick = &s;
        TangentSample s0 = *pick;
        double F0 = e.metric(s0.x.data(), s0.y.data());
        Vec yu{};
        for (int i = 0; i < n; ++i) yu[i] = s0.y[i] / F0;
        double T = 0.5 * std::min(0.6, s0.margin);
        const int steps = 64, stride = 4;
        try {
            Trajectory tr = integrate_geodesic(e.metric, s0.x, yu, T, steps);
            std::vector<double> tau, sval;
            for (int k = 0; k <= steps; k += stride) {
                const auto& p = tr.samples[k];
                TangentSample sp{n, p.x, p.y, domain_margin(e.metric, p.x)};
                PointEval pe(e.metric, sp, PointEval::Depth::Spray);
                NonRiemEval nr(pe);
                tau.push_back(nr.distortion());
                sval.push_back(nr.s_curvature());
            }
            double hstep = stride * tr.step;
            detail::RowAccum rate("s_equals_distortion_rate", 1e-4);
            for (std::size_t k = 2; k + 2 < tau.size(); ++k) {
                double d = (tau[k - 2] - 8.0 * tau[k - 1] + 8.0 * tau[k + 1] -
                            tau[k + 2]) /
                           (12.0 * hstep);
                TangentSample at{n, tr.samples[k * stride].x,
                                 tr.samples[k * stride].y, 0.0};
                rate.feed(std::abs(d - sval[k]), at);
            }
            out.rows.push_back(rate.done());
        } catch (const LeftDomain&) {
            out.rows.push_back(detail::skip_row(
                "s_equals_distortion_rate", "geodesic left the chart"));
        }
    }

    // isotropic mean Landsberg fit: an identity for the ball entry and
    // trivially for mean-Landsberg-free entries; informational elsewhere
    {
        bool claimed = e.projectively_flat || e.landsberg;
        auto samples =
            draw_samples(e, std::min(cfg.samples, 10), cfg.seed + 5);
        detail::RowAccum fit("mean_landsberg_fit_residual", cfg.tol_flow);
        std::vector<double> ratio;
        bool undetermined = false;
        for (const auto& s : samples) {
            PointEval pe(e.metric, s, PointEval::Depth::Full);
            NonRiemEval nr(pe);
            try {
                auto f = nr.iml_fit();
                fit.feed(f.residual, s);
                ratio.push_back(f.lambda_hat / pe.F_jet().value());
            } catch (const MeanCartanVanishes&) {
                undetermined = true;
                break;
            }
        }
        if (undetermined) {
            out.rows.push_back(detail::skip_row(
                "mean_landsberg_fit_residual", "mean Cartan form vanishes"));
        } else if (!claimed) {
            CheckRow r = fit.done();
            r.status = CheckRow::Status::Skip;
            r.note = "entry does not claim an isotropic mean Landsberg form";
            out.rows.push_back(r);
        } else {
            out.rows.push_back(fit.done());
            double mean = 0.0;
            for (double v : ratio) mean += v;
            mean /= ratio.size();
            double var = 0.0;
            for (double v : ratio) var += (v - mean) * (v - mean);
            CheckRow r;
            r.name = "mean_landsberg_multiple_spread";
            r.residual = std::sqrt(var / ratio.size());
            r.tol = 1e-4;
            r.status = r.residual <= r.tol ? CheckRow::Status::Pass
                                           : CheckRow::Status::Fail;
            r.note = "multiple over F, sample standard deviation; mean " +
                     fmt_double(mean);
            out.rows.push_back(r);
        }
    }

    out.elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
    return out;
}

// ---------------------------------------------------------------------------
// Symmetry suites

inline SuiteResult run_lie_identities(const CatalogEntry& e,
                                      const RunConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    SuiteResult out{"lie-identities", {}, 0};
    auto samples =
        detail::margin_samples(e, std::min(cfg.samples, 6), cfg.seed + 6, 0.2);
    for (const auto& fname : cfg.fields) {
        VectorFieldExpr X = catalog_field(fname, e.metric.dim, cfg.seed);
        try {
            LieIdentityReport rep =
                verify_lie_identities(e.metric, X, samples);
            for (int i = 0; i < 9; ++i) {
                CheckRow r;
                r.name = "item" + std::to_string(i + 1) + " " + fname;
                r.residual = rep.residual[i];
                r.tol = cfg.tol_flow;
                r.status = r.residual <= r.tol ? CheckRow::Status::Pass
                                               : CheckRow::Status::Fail;
                out.rows.push_back(r);
            }
            CheckRow g;
            g.name = "gradient_consistency " + fname;
            g.residual = rep.psi_cross_residual;
            g.tol = cfg.tol_flow;
            g.status = g.residual <= g.tol ? CheckRow::Status::Pass
                                           : CheckRow::Status::Fail;
            out.rows.push_back(g);
        } catch (const NotProjective& np) {
            out.rows.push_back(detail::skip_row(
                "items " + fname,
                "field is not projective here (residual " +
                    fmt_double(np.residual) + ")"));
        }
    }
    out.elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
    return out;
}

inline SuiteResult run_invariance_transfer(const CatalogEntry& e,
                                           const RunConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    SuiteResult out{"invariance-transfer", {}, 0};
    auto samples =
        detail::margin_samples(e, std::min(cfg.samples, 4), cfg.seed + 7, 0.2);
    int qualified = 0;
    for (const auto& fname : cfg.fields) {
        VectorFieldExpr X = catalog_field(fname, e.metric.dim, cfg.seed);
        try {
            InvarianceTransferReport rep =
                verify_invariance_transfer(e.metric, X, samples);
            ++qualified;
            auto push = [&](const char* what, double v) {
                CheckRow r;
                r.name = std::string(what) + " " + fname;
                r.residual = v;
                r.tol = cfg.tol_flow;
                r.status = v <= r.tol ? CheckRow::Status::Pass
                                      : CheckRow::Status::Fail;
                out.rows.push_back(r);
            };
            push("mean_berwald_rate", rep.lie_mean_berwald);
            push("h_curvature_rate", rep.lie_h_curvature);
            push("berwald_rate", rep.lie_berwald);
        } catch (const NotProjective& np) {
            out.rows.push_back(detail::skip_row(
                "rates " + fname, "field is not projective here (residual " +
                                      fmt_double(np.residual) + ")"));
        } catch (const NotIInvariant& ni) {
            out.rows.push_back(detail::skip_row(
                "rates " + fname,
                "field does not preserve the mean Cartan form (residual " +
                    fmt_double(ni.residual) + ")"));
        }
    }
    CheckRow cov;
    cov.name = "qualified_fields";
    cov.residual = qualified;
    cov.tol = 0;
    cov.status = CheckRow::Status::Skip;
    cov.note = qualified ? "informational"
                         : "no config field satisfies the preconditions";
    out.rows.push_back(cov);
    out.elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
    return out;
}

inline SuiteResult run_ricci_compare(const CatalogEntry& e,
                                     const RunConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    SuiteResult out{"ricci-compare", {}, 0};
    auto samples =
        detail::margin_samples(e, std::min(cfg.samples, 4), cfg.seed + 8, 0.2);
    for (const auto& fname : cfg.fields) {
        VectorFieldExpr X = catalog_field(fname, e.metric.dim, cfg.seed);
        try {
            RicciCompareReport rep = lie_ricci_compare(e.metric, X, samples);
            CheckRow r;
            r.name = "ricci_rate_match " + fname;
            r.residual = rep.residual;
            r.tol = cfg.tol_flow;
            r.status = r.residual <= r.tol ? CheckRow::Status::Pass
                                           : CheckRow::Status::Fail;
            r.note = "rate maxima " + fmt_double(rep.lie_ricci_max) + " and " +
                     fmt_double(rep.lie_symmetrized_max);
            out.rows.push_back(r);
        } catch (const NotProjective& np) {
            out.rows.push_back(detail::skip_row(
                "ricci_rate_match " + fname,
                "field is not projective here (residual " +
                    fmt_double(np.residual) + ")"));
        } catch (const NotIInvariant& ni) {
            out.rows.push_back(detail::skip_row(
                "ricci_rate_match " + fname,
                "field does not preserve the mean Cartan form (residual " +
                    fmt_double(ni.residual) + ")"));
        }
    }
    out.elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
    return out;
}

// ---------------------------------------------------------------------------
// Orchestration

inline const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> names{
        "core-identities",  "curvature-identities", "nonriemannian",
        "lie-identities",   "invariance-transfer",  "ricci-compare"};
    return names;
}

inline SuiteResult run_suite(const std::string& name, const CatalogEntry& e,
                             const RunConfig& cfg) {
    if (name == "core-identities") return run_core_identities(e, cfg);
    if (name == "curvature-identities") return run_curvature_identities(e, cfg);
    if (name == "nonriemannian") return run_nonriemannian(e, cfg);
    if (name == "lie-identities") return run_lie_identities(e, cfg);
    if (name == "invariance-transfer") return run_invariance_transfer(e, cfg);
    if (name == "ricci-compare") return run_ricci_compare(e, cfg);
    throw ConfigError("unknown suite '" + name + "'");
}

// Runs the requested suite (or all of them) with at most cfg.threads workers.
// Results come back in declaration order regardless of worker count.
inline std::vector<SuiteResult> run_suites(const CatalogEntry& e,
                                           const RunConfig& cfg) {
    std::vector<std::string> todo;
    if (cfg.suite == "all") todo = suite_names();
    else todo.push_back(cfg.suite);
    for (const auto& s : todo)
        if (std::find(suite_names().begin(), suite_names().end(), s) ==
            suite_names().end())
            throw ConfigError("unknown suite '" + s + "'");

    // per-suite shards; each result lands in its own slot, so pool size never
    // affects the numbers
    std::vector<SuiteResult> results(todo.size());
    parallel_for(todo.size(),
                 [&](std::size_t i) { results[i] = run_suite(todo[i], e, cfg); });
    return results;
}

// ---------------------------------------------------------------------------
// Report assembly

inline void write_config_section(ReportDocument& doc, const RunConfig& cfg,
                                 const std::string& command,
                                 const CatalogEntry& e) {
    auto& sec = doc.add("config");
    sec.put("command", command);
    sec.put("metric", e.name);
    sec.put("dim", e.metric.dim);
    sec.put("samples", cfg.samples);
    sec.put("seed", static_cast<long long>(cfg.seed));
    if (command == "verify") sec.put("suite", cfg.suite);
    if (command == "verify" || command == "classify") {
        std::string fs;
        for (const auto& f : cfg.fields) {
            if (!fs.empty()) fs += ' ';
            fs += f;
        }
        sec.put("fields", fs);
    }
    sec.put("tol_jet", cfg.tol_jet);
    sec.put("tol_flow", cfg.tol_flow);
    sec.put("tol_quad", cfg.tol_quad);
}

inline void write_suite_section(ReportDocument& doc, const SuiteResult& r) {
    auto& sec = doc.add("suite " + r.name);
    sec.put("status", r.pass() ? "pass" : "fail");
    int checks = 0, skips = 0;
    for (const auto& row : r.rows)
        (row.status == CheckRow::Status::Skip ? skips : checks)++;
    sec.put("checks", checks);
    sec.put("skips", skips);
    for (const auto& row : r.rows) {
        if (row.status == CheckRow::Status::Skip) {
            sec.put("skip " + row.name, row.note);
            continue;
        }
        std::string v = fmt_double(row.residual) + " tol " +
                        fmt_double(row.tol) + " " +
                        (row.status == CheckRow::Status::Pass ? "pass" : "fail");
        sec.put("check " + row.name, v);
        if (!row.note.empty()) sec.put("note " + row.name, row.note);
        if (row.status == CheckRow::Status::Fail && row.n > 0)
            sec.put("worst " + row.name,
                    "x " + fmt_doubles(row.worst_x.data(), row.n) + " y " +
                        fmt_doubles(row.worst_y.data(), row.n));
    }
}

struct VerifyOutcome {
    ReportDocument report;
    int exit_code = 0;
    std::string worst;  // printable description of the worst failing check
};

inline VerifyOutcome run_verify(const RunConfig& cfg) {
    cfg.validate();
    CatalogEntry entry = load_entry(cfg);
    auto t0 = std::chrono::steady_clock::now();
    std::vector<SuiteResult> results = run_suites(entry, cfg);
    long long total_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - t0)
            .count();

    VerifyOutcome out;
    write_config_section(out.report, cfg, "verify", entry);
    int failures = 0;
    double worst_excess = -1.0;
    for (const auto& r : results) {
        write_suite_section(out.report, r);
        for (const auto& row : r.rows)
            if (row.status == CheckRow::Status::Fail) {
                ++failures;
                double excess = row.residual / std::max(row.tol, 1e-300);
                if (excess > worst_excess) {
                    worst_excess = excess;
                    out.worst = r.name + " / " + row.name + ": residual " +
                                fmt_double(row.residual) + " tol " +
                                fmt_double(row.tol);
                    if (row.n > 0)
                        out.worst +=
                            " at x " + fmt_doubles(row.worst_x.data(), row.n) +
                            " y " + fmt_doubles(row.worst_y.data(), row.n);
                }
            }
    }
    auto& verdict = out.report.add("verdict");
    verdict.put("suites", static_cast<int>(results.size()));
    verdict.put("failures", failures);
    verdict.put("status", failures == 0 ? "pass" : "fail");

    auto& meta = out.report.add("meta", /*meta=*/true);
    std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ",
                  std::gmtime(&now));
    meta.put("generated_utc", stamp);
    meta.put("threads", thread_budget());
    for (const auto& r : results)
        meta.put("elapsed_ms " + r.name, r.elapsed_ms);
    meta.put("elapsed_ms total", total_ms);

    out.exit_code = failures == 0 ? 0 : 1;
    return out;
}

// ---------------------------------------------------------------------------
// Classification report

inline ReportDocument run_classify_report(const RunConfig& cfg) {
    cfg.validate();
    CatalogEntry entry = load_entry(cfg);
    ReportDocument doc;
    write_config_section(doc, cfg, "classify", entry);
    auto samples = draw_samples(entry, cfg.samples, cfg.seed);
    for (const auto& fname : cfg.fields) {
        VectorFieldExpr X = catalog_field(fname, entry.metric.dim, cfg.seed);
        ClassificationReport rep = classify(entry.metric, X, samples);
        auto& sec = doc.add("classify " + fname);
        sec.put("samples", rep.samples_used);
        sec.put("tolerance", rep.tolerance);
        auto put = [&](const char* name, const Verdict& v) {
            sec.put(std::string("verdict ") + name,
                    std::string(v.pass ? "yes" : "no") + " residual " +
                        fmt_double(v.residual));
        };
        put("projective", rep.projective);
        put("affine", rep.affine);
        put("killing", rep.killing);
        put("mean_cartan_invariant", rep.mean_cartan_invariant);
        put("mean_berwald_invariant", rep.mean_berwald_invariant);
        put("psi_curl_free", rep.psi_curl_free);
        put("psi_hessian_curl_free", rep.psi_hessian_curl_free);
        sec.put("rate_consistency", rep.lie_metric_rate_residual);
        sec.put("euler_residual", rep.euler_residual);
        double pmax = 0.0, fmax = 0.0;
        for (double v : rep.psi_values) pmax = std::max(pmax, std::abs(v));
        for (double v : rep.f_values) fmax = std::max(fmax, std::abs(v));
        sec.put("psi_max", pmax);
        sec.put("f_max", fmax);
    }
    return doc;
}

// ---------------------------------------------------------------------------
// Tensor dump report

inline ReportDocument run_tensor_report(const RunConfig& cfg) {
    cfg.validate();
    CatalogEntry entry = load_entry(cfg);
    ReportDocument doc;
    write_config_section(doc, cfg, "report", entry);
    auto samples = draw_samples(entry, cfg.samples, cfg.seed);
    const int n = entry.metric.dim;
    Rng flag_rng(cfg.seed ^ 0x5eedULL);
    int idx = 0;
    for (const auto& s : samples) {
        PointEval pe(entry.metric, s, PointEval::Depth::Full);
        CurvatureEval cv(pe);
        NonRiemEval nr(pe);
        auto& sec = doc.add("sample " + std::to_string(idx++));
        sec.put("x", fmt_doubles(s.x.data(), n));
        sec.put("y", fmt_doubles(s.y.data(), n));
        sec.put("F", pe.F_jet().value());
        auto tensor = [&](const char* key, const TensorValue& t) {
            sec.put(key, fmt_doubles(t.data().data(),
                                     static_cast<int>(t.data().size())));
        };
        tensor("g", pe.fundamental_tensor());
        auto fam = pe.cartan();
        tensor("cartan", fam.C);
        tensor("mean_cartan", fam.I);
        tensor("spray", pe.spray());
        tensor("nonlinear_connection", pe.nonlinear_connection());
        tensor("berwald_connection", pe.berwald_coeffs());
        tensor("cartan_connection", pe.cartan_coeffs());
        tensor("berwald_curvature", pe.berwald_curvature());
        tensor("riemann_trace", cv.riemann_trace());
        tensor("berwald_hh", cv.berwald_hh());
        tensor("ricci_lower", cv.ricci_lower());
        tensor("ricci_symmetrized", cv.ricci_symmetrized());
        tensor("mean_berwald", nr.mean_berwald());
        tensor("h_curvature", nr.h_curvature());
        tensor("landsberg", nr.landsberg());
        tensor("mean_landsberg", nr.mean_landsberg());
        sec.put("distortion", nr.distortion());
        sec.put("s_curvature", nr.s_curvature());
        for (int f = 0; f < 5; ++f) {
            Vec v = draw_flag_vector(pe, flag_rng);
            sec.put("flag " + std::to_string(f), cv.flag_curvature(v));
        }
    }
    return doc;
}

}  // namespace finsler
