#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "vtf/active_sets.hpp"
#include "vtf/certify.hpp"
#include "vtf/dictionary.hpp"
#include "vtf/harness.hpp"
#include "vtf/io.hpp"
#include "vtf/solver.hpp"

namespace {

constexpr int kValidationError = 1;
constexpr int kCertificationFailure = 2;

vtf::SolverKind solver_from(const std::string& s) {
    if (s == "active_set") return vtf::SolverKind::active_set;
    if (s == "fista") return vtf::SolverKind::accelerated_proximal_gradient;
    if (s == "cd") return vtf::SolverKind::coordinate_descent;
    throw vtf::FormatError("unknown solver '" + s + "'");
}

vtf::Shape parse_shape(const std::string& s) {
    vtf::Shape out;
    std::stringstream ss(s);
    for (std::string t; std::getline(ss, t, ',');) {
        std::size_t used = 0;
        long long v = -1;
        try {
            v = std::stoll(t, &used);
        } catch (const std::logic_error&) {
        }
        if (v < 1 || used != t.size()) throw vtf::FormatError("bad shape '" + s + "'");
        out.push_back(static_cast<std::size_t>(v));
    }
    vtf::check_shape(out);
    return out;
}

// Writes to the named file, or stdout for "-" / empty.
template <class F>
void emit(const std::string& path, F&& write) {
    if (path.empty() || path == "-") {
        write(std::cout);
        return;
    }
    std::ofstream os(path);
    if (!os) throw vtf::FormatError("cannot write " + path);
    write(os);
}

struct DenoiseArgs {
    int k = 1;
    double lambda = -1.0;
    double sigma = -1.0;
    std::string solver = "active_set";
    std::string input, output, summary;
};

int run_denoise(const DenoiseArgs& a) {
    const vtf::Tensor y = vtf::read_vtf_file(a.input);
    double lambda = a.lambda;
    if (lambda < 0) {
        if (a.sigma < 0) throw vtf::DomainError("give --lambda or --sigma");
        const double n = static_cast<double>(y.size());
        lambda = vtf::universal_lambda(a.sigma, n, std::log(2.0 * n));
    }
    vtf::FitConfig fc;
    fc.lambda = lambda;
    fc.solver_kind = solver_from(a.solver);
    const vtf::FitResult r = vtf::fit_margin(y, a.k, fc);
    // the unpenalized nullspace part is kept as observed
    vtf::Tensor out = y - vtf::project_nullspace_complement(y, a.k) + r.fitted;
    vtf::write_vtf_file(a.output, out);
    std::size_t active = 0;
    for (double b : r.coefficients.data()) active += b != 0.0;
    nlohmann::json j;
    j["shape"] = y.shape();
    j["k"] = a.k;
    j["lambda"] = lambda;
    j["objective"] = r.objective;
    j["kkt_residual"] = r.kkt_residual;
    j["iterations"] = r.iterations;
    j["active_coefficients"] = active;
    j["tv_k"] = vtf::l1_norm(r.coefficients);
    const std::string text = j.dump(2) + "\n";
    if (a.summary.empty())
        std::cout << text;
    else
        emit(a.summary, [&](std::ostream& os) { os << text; });
    return 0;
}

struct AnovaArgs {
    int k = 1;
    double sigma = -1.0;
    double scale = 1.0;
    std::string input, out;
};

int run_anova(const AnovaArgs& a) {
    const vtf::Tensor y = vtf::read_vtf_file(a.input);
    std::map<vtf::MarginKey, vtf::Tensor> comps;
    if (a.sigma >= 0) {
        comps = vtf::fit_all_margins(y, a.k, a.sigma, a.scale).components;
    } else {
        comps = vtf::anova_decompose(y, a.k);
    }
    emit(a.out, [&](std::ostream& os) {
        os << "axes,h,norm_sq\n";
        for (const auto& [key, c] : comps) {
            std::string axes, h;
            for (std::size_t i = 0; i < key.axes.size(); ++i) axes += (i ? " " : "") + std::to_string(key.axes[i]);
            for (std::size_t i = 0; i < key.h.size(); ++i) h += (i ? " " : "") + std::to_string(key.h[i]);
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.17g", vtf::frobenius_sq(c));
            os << '"' << axes << "\",\"" << h << "\"," << buf << '\n';
        }
    });
    return 0;
}

struct RatesArgs {
    std::string config, out, svg;
};

int run_rates(const RatesArgs& a) {
    const vtf::ExperimentConfig c = vtf::read_experiment_config(a.config);
    const vtf::RateResult r = vtf::run_rate_experiment(c);
    emit(a.out, [&](std::ostream& os) { vtf::write_rates_csv(os, r); });
    if (!a.svg.empty()) emit(a.svg, [&](std::ostream& os) { vtf::write_rates_svg(os, r); });
    for (const auto& p : r.points)
        std::cerr << "n=" << p.n << " mean_mse=" << p.mean_mse << " se=" << p.se << " q10=" << p.q10
                  << " median=" << p.median << " q90=" << p.q90 << " failures=" << p.failures << '\n';
    auto show = [](const vtf::LineFit& f) {
        std::ostringstream s;
        s << f.slope;
        if (f.points > 2) s << " +/- " << f.half_width;
        else s << " (two points, no interval)";
        return s.str();
    };
    if (r.has_fit) std::cerr << "slope=" << show(r.full) << "  largest-half slope=" << show(r.half) << '\n';
    return 0;
}

struct CertifyArgs {
    vtf::CertifyOptions o;
    bool no_oracle = false;
    std::string out;
};

int run_certify(CertifyArgs a) {
    a.o.oracle = !a.no_oracle;
    const auto rows = vtf::run_certify_suite(a.o);
    emit(a.out, [&](std::ostream& os) { vtf::write_certify_csv(os, rows); });
    std::size_t failed = 0;
    for (const auto& r : rows)
        if (!r.pass) {
            ++failed;
            std::cerr << "FAIL " << r.check_name << " [" << r.params << "] lhs=" << r.lhs << " rhs=" << r.rhs << '\n';
        }
    return failed ? kCertificationFailure : 0;
}

struct GridsArgs {
    std::string kind = "regular";
    std::string shape;
    int k = 1;
    std::size_t count = 2;
    std::size_t delta = 2;
    bool enlarged = false;
    bool matching = false;
    std::string out;
};

int run_grids(const GridsArgs& a) {
    const vtf::Shape shape = parse_shape(a.shape);
    std::vector<vtf::MultiIndex> pts;
    if (a.kind == "regular") {
        auto s = vtf::regular_grid(shape, a.k, a.count, a.matching ? vtf::JumpBox::matching : vtf::JumpBox::admissible);
        pts = a.enlarged ? vtf::enlarge(s) : s.jumps;
    } else if (a.kind == "mesh") {
        auto g = vtf::mesh_grid(shape, a.k, a.delta);
        pts = a.enlarged ? g.enlarged : g.points;
    } else {
        throw vtf::FormatError("grid kind must be regular or mesh");
    }
    emit(a.out, [&](std::ostream& os) { vtf::write_index_set(os, pts); });
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Vitali trend filtering: denoising, rate experiments and certification"};
    app.require_subcommand(1);

    DenoiseArgs da;
    auto* den = app.add_subcommand("denoise", "fit the k-th order trend filter to a VTF1 tensor");
    den->add_option("--k", da.k, "difference order")->check(CLI::PositiveNumber);
    den->add_option("--lambda", da.lambda, "tuning parameter");
    den->add_option("--sigma", da.sigma, "noise level; sets the universal lambda when --lambda is absent");
    den->add_option("--solver", da.solver, "active_set | fista | cd");
    den->add_option("--summary", da.summary, "JSON summary path (default stdout)");
    den->add_option("input", da.input)->required();
    den->add_option("output", da.output)->required();

    AnovaArgs aa;
    auto* an = app.add_subcommand("anova", "per-margin squared norms of a VTF1 tensor");
    an->add_option("--k", aa.k)->check(CLI::PositiveNumber);
    an->add_option("--sigma", aa.sigma, "fit every margin with default lambdas for this noise level");
    an->add_option("--scale", aa.scale, "lambda multiplier for the fitted margins");
    an->add_option("--out", aa.out, "CSV path (default stdout)");
    an->add_option("input", aa.input)->required();

    RatesArgs ra;
    auto* rt = app.add_subcommand("rates", "run a Monte Carlo rate experiment");
    rt->add_option("--config", ra.config, "key = value experiment file")->required();
    rt->add_option("--out", ra.out, "CSV path (default stdout)");
    rt->add_option("--svg", ra.svg, "optional log-log plot");

    CertifyArgs ca;
    auto* ce = app.add_subcommand("certify", "run the certification checks");
    ce->add_option("--k", ca.o.k)->check(CLI::PositiveNumber);
    ce->add_option("--d", ca.o.d)->check(CLI::PositiveNumber);
    ce->add_option("--n", ca.o.n)->check(CLI::PositiveNumber);
    ce->add_option("--instances", ca.o.instances, "random antiprojection instances");
    ce->add_option("--seed", ca.o.seed);
    ce->add_flag("--sqrt-variant", ca.o.include_sqrt_variant, "also check the square-root weight form");
    ce->add_flag("--printed", ca.o.printed_polys, "use the printed interpolating pieces for every k");
    ce->add_flag("--no-oracle", ca.no_oracle, "skip the effective-sparsity ascent");
    ce->add_option("--out", ca.out, "CSV path (default stdout)");

    GridsArgs ga;
    auto* gr = app.add_subcommand("grids", "write a regular or mesh active set");
    gr->add_option("--kind", ga.kind, "regular | mesh");
    gr->add_option("--shape", ga.shape, "comma separated extents")->required();
    gr->add_option("--k", ga.k)->check(CLI::PositiveNumber);
    gr->add_option("--count", ga.count, "jumps per axis (regular)");
    gr->add_option("--delta", ga.delta, "resolution (mesh)");
    gr->add_flag("--enlarged", ga.enlarged, "write the enlarged set");
    gr->add_flag("--matching", ga.matching, "use the matching jump box (regular)");
    gr->add_option("--out", ga.out, "output path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kValidationError;
    }
    try {
        if (*den) return run_denoise(da);
        if (*an) return run_anova(aa);
        if (*rt) return run_rates(ra);
        if (*ce) return run_certify(ca);
        if (*gr) return run_grids(ga);
    } catch (const vtf::CertificationError& e) {
        std::cerr << "certification failure: " << e.what() << '\n';
        return kCertificationFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidationError;
    }
    return kValidationError;
}
