#include "predsub/eval.hpp"

#include "predsub/detail/bernoulli.hpp"
#include "predsub/error.hpp"
#include "predsub/lowrank.hpp"
#include "predsub/predsub.hpp"
#include "predsub/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

namespace predsub {

namespace {

std::pair<VectorXd, MatrixXd> factored_eigen(const MatrixXd& z, const MatrixXd& middle) {
    const auto core = detail::factored_core<double>(z, middle);
    if (core.core.size() == 0) {
        return {VectorXd(0), MatrixXd(z.rows(), 0)};
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> solver(core.core);
    return {solver.eigenvalues(), core.q * solver.eigenvectors()};
}

// Singular values of Z M Z^T, descending, padded with zeros to `count`.
VectorXd factored_singular_values(const MatrixXd& z, const MatrixXd& middle, Index count) {
    VectorXd s = VectorXd::Zero(count);
    if (z.rows() == 0) {
        return s;
    }
    VectorXd values = factored_eigen(z, middle).first.cwiseAbs();
    std::sort(values.data(), values.data() + values.size(), std::greater<>());
    const Index k = std::min<Index>(count, static_cast<Index>(values.size()));
    s.head(k) = values.head(k);
    return s;
}

MatrixXd rows_of(const MatrixXd& m, std::span<const Index> rows) {
    MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (Eigen::Index k = 0; k < out.rows(); ++k) {
        out.row(k) = m.row(rows[static_cast<std::size_t>(k)]);
    }
    return out;
}

double mean_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
    if (v.size() < 2) {
        return 0.0;
    }
    const double mu = mean_of(v);
    double ss = 0.0;
    for (double x : v) {
        ss += (x - mu) * (x - mu);
    }
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Aligns on the listed rows, then measures the row error over all rows.
double aligned_two_inf(const MatrixXd& x_hat, const MatrixXd& x_ref, std::span<const Index> fit_rows) {
    const auto fit = align_orthogonal<double>(rows_of(x_hat, fit_rows), rows_of(x_ref, fit_rows));
    return two_to_infinity(x_hat * fit.W - x_ref);
}

}  // namespace

void DiagnosticsReport::add(const std::string& key, double value, std::string tag) {
    if (!std::isfinite(value)) {
        throw InvalidArgument("DiagnosticsReport: non-finite value for '" + key + "'");
    }
    scalars[key] = {value, std::move(tag)};
}

void DiagnosticsReport::add(const std::string& key, Curve curve, std::string tag) {
    if (curve.x.size() != curve.y.size()) {
        throw InvalidArgument("DiagnosticsReport: curve '" + key + "' has unequal x and y lengths");
    }
    for (double v : curve.x) {
        if (!std::isfinite(v)) {
            throw InvalidArgument("DiagnosticsReport: non-finite x in curve '" + key + "'");
        }
    }
    for (double v : curve.y) {
        if (!std::isfinite(v)) {
            throw InvalidArgument("DiagnosticsReport: non-finite y in curve '" + key + "'");
        }
    }
    curves[key] = {std::move(curve), std::move(tag)};
}

void DiagnosticsReport::flag(const std::string& key, bool violated, std::string tag) {
    flags[key] = {violated, std::move(tag)};
}

bool DiagnosticsReport::contains(const std::string& key) const {
    return scalars.contains(key) || curves.contains(key) || flags.contains(key);
}

bool DiagnosticsReport::any_violation() const {
    return std::any_of(flags.begin(), flags.end(), [](const auto& kv) { return kv.second.violated; });
}

double coherence(const MatrixXd& U) {
    const Eigen::Index d = U.cols();
    if ((U.transpose() * U - MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff() > 1e-8) {
        throw InvalidArgument("coherence: columns are not orthonormal");
    }
    return std::sqrt(static_cast<double>(U.rows())) * two_to_infinity(U);
}

double condition_number(std::span<const double> values) {
    if (values.empty()) {
        throw InvalidArgument("condition_number: no values");
    }
    double hi = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    for (double v : values) {
        hi = std::max(hi, std::abs(v));
        lo = std::min(lo, std::abs(v));
    }
    if (lo == 0.0) {
        throw InvalidArgument("condition_number: zero eigenvalue");
    }
    return hi / lo;
}

double condition_number(const VectorXd& values) {
    return condition_number(std::span<const double>(values.data(), static_cast<std::size_t>(values.size())));
}

SpectralPair<double> model_spectrum(const ProbabilityModel& model) {
    auto [values, vectors] = factored_eigen(model.memberships(), model.rho() * model.mixing());
    SpectralPair<double> pairs{std::move(values), std::move(vectors)};
    detail::canonicalize_signs(pairs.vectors);
    return split_signature(pairs).second;
}

Embedding model_embedding(const ProbabilityModel& model) {
    return embedding_from_pairs(model_spectrum(model));
}

std::vector<Index> inclusion_subsample(Index n, Index m, Seed seed) {
    if (m < 0 || m > n) {
        throw InvalidArgument("inclusion_subsample: need 0 <= m <= n");
    }
    std::vector<Index> kept;
    if (m == n) {
        kept.resize(static_cast<std::size_t>(n));
        std::iota(kept.begin(), kept.end(), Index{0});
        return kept;
    }
    Engine engine = make_engine(seed, {stream::kInclusion});
    detail::for_each_bernoulli_hit(engine, static_cast<Offset>(n), static_cast<double>(m) / n,
                                   [&](Offset k) { kept.push_back(static_cast<Index>(k)); });
    return kept;
}

double EigenScalingResult::max() const {
    return deviations.empty() ? 0.0 : *std::max_element(deviations.begin(), deviations.end());
}

double EigenScalingResult::mean() const { return mean_of(deviations); }

Index EigenScalingResult::count_within(double epsilon) const {
    return static_cast<Index>(std::count_if(deviations.begin(), deviations.end(),
                                            [epsilon](double v) { return v <= epsilon; }));
}

EigenScalingResult eigen_scaling_check(const ProbabilityModel& truth, Index m, Index trials, Seed seed) {
    const Index n = truth.n();
    const Index d = truth.d();
    if (m < 1 || m > n) {
        throw InvalidArgument("eigen_scaling_check: need 1 <= m <= n");
    }
    if (trials < 1) {
        throw InvalidArgument("eigen_scaling_check: trials must be positive");
    }
    const MatrixXd middle = truth.rho() * truth.mixing();
    const VectorXd full = factored_singular_values(truth.memberships(), middle, d);
    const double scale = static_cast<double>(n) / m;
    const double norm = static_cast<double>(n) * truth.rho();

    EigenScalingResult out;
    out.deviations.resize(static_cast<std::size_t>(trials));
    out.sample_sizes.resize(static_cast<std::size_t>(trials));
#pragma omp parallel for schedule(dynamic, 1)
    for (Index t = 0; t < trials; ++t) {
        const auto kept = inclusion_subsample(n, m, derive_seed(seed, {stream::kReplicate, std::uint64_t(t)}));
        const VectorXd sub = factored_singular_values(rows_of(truth.memberships(), kept), middle, d);
        out.deviations[static_cast<std::size_t>(t)] = (full - scale * sub).cwiseAbs().maxCoeff() / norm;
        out.sample_sizes[static_cast<std::size_t>(t)] = static_cast<Index>(kept.size());
    }
    return out;
}

Index subsample_size(Index n, double a) {
    if (n < 1 || !(a >= 0.0)) {
        throw InvalidArgument("subsample_size: need n >= 1 and a >= 0");
    }
    const double m = std::ceil(std::pow(std::log(static_cast<double>(n)), 1.0 + a));
    return static_cast<Index>(std::clamp(m, 1.0, static_cast<double>(n)));
}

double log_log_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw InvalidArgument("log_log_slope: need at least two paired points");
    }
    const auto k = static_cast<double>(x.size());
    double sx = 0.0;
    double sy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) {
            throw InvalidArgument("log_log_slope: values must be positive");
        }
        sx += std::log(x[i]);
        sy += std::log(y[i]);
    }
    const double mx = sx / k;
    const double my = sy / k;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    if (sxx == 0.0) {
        throw InvalidArgument("log_log_slope: x values are all equal");
    }
    return sxy / sxx;
}

double ErrorCurveResult::two_inf_slope() const {
    std::vector<double> ms;
    std::vector<double> errs;
    for (const auto& p : points) {
        ms.push_back(p.m);
        errs.push_back(p.mean_two_inf);
    }
    return log_log_slope(ms, errs);
}

ErrorCurveResult error_curve(const ProbabilityModel& model, Index d, std::span<const double> a_grid, Seed seed,
                             const ErrorCurveOptions& options) {
    if (a_grid.empty()) {
        throw InvalidArgument("error_curve: empty grid");
    }
    if (options.reps < 1) {
        throw InvalidArgument("error_curve: reps must be positive");
    }
    const Index n = model.n();
    const auto reps = static_cast<std::size_t>(options.reps);
    ErrorCurveResult out;
    out.points.resize(a_grid.size());
    for (std::size_t g = 0; g < a_grid.size(); ++g) {
        out.points[g].a = a_grid[g];
        out.points[g].m = subsample_size(n, a_grid[g]);
    }
    std::vector<std::vector<double>> two_inf(a_grid.size(), std::vector<double>(reps));
    std::vector<std::vector<double>> seconds(a_grid.size(), std::vector<double>(reps));
    for (auto& p : out.points) {
        p.errors.resize(reps);
    }
    ErrorPoint base;
    base.a = std::numeric_limits<double>::quiet_NaN();
    base.m = n;
    base.errors.resize(reps);
    std::vector<double> base_two_inf(reps);
    std::vector<double> base_seconds(reps);
    const Embedding truth_embedding = options.baseline ? model_embedding(model) : Embedding{};
    std::vector<Index> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), Index{0});

    for (std::size_t r = 0; r < reps; ++r) {
        const Seed rep_seed = derive_seed(seed, {stream::kReplicate, r});
        std::optional<SparseGraph> graph;
        if (!options.noiseless) {
            graph = sample_adjacency(model, rep_seed);
        }
        for (std::size_t g = 0; g < a_grid.size(); ++g) {
            auto& point = out.points[g];
            const SubsampleIndex S = uniform_subsample(n, point.m, derive_seed(rep_seed, {g}));
            const PredSubResult reference = predsub_noiseless(model, S, d, options.eig);
            const auto start = std::chrono::steady_clock::now();
            const PredSubResult fit =
                options.noiseless ? reference : predsub_estimate(*graph, S, d, options.eig);
            seconds[g][r] = seconds_since(start);
            point.errors[r] = relative_frob_error(fit.estimate(), model);
            two_inf[g][r] = aligned_two_inf(fit.embedding.X, reference.embedding.X, S.sample());
        }
        if (options.baseline) {
            const auto start = std::chrono::steady_clock::now();
            const Embedding full = options.noiseless ? ase(model_operator(model), d, options.eig)
                                                     : ase(*graph, d, options.eig);
            base_seconds[r] = seconds_since(start);
            base.errors[r] = relative_frob_error(LowRankP(full), model);
            base_two_inf[r] = aligned_two_inf(full.X, truth_embedding.X, all);
        }
    }
    for (std::size_t g = 0; g < a_grid.size(); ++g) {
        auto& point = out.points[g];
        point.mean_error = mean_of(point.errors);
        point.sd_error = sd_of(point.errors);
        point.mean_two_inf = mean_of(two_inf[g]);
        point.mean_seconds = mean_of(seconds[g]);
    }
    if (options.baseline) {
        base.mean_error = mean_of(base.errors);
        base.sd_error = sd_of(base.errors);
        base.mean_two_inf = mean_of(base_two_inf);
        base.mean_seconds = mean_of(base_seconds);
        out.baseline = std::move(base);
    }
    return out;
}

SubgraphRateResult subgraph_rate(const ProbabilityModel& model, Index d, std::span<const Index> m_grid, Index reps,
                                 Seed seed, const EigOptions& options) {
    if (m_grid.size() < 2 || reps < 1) {
        throw InvalidArgument("subgraph_rate: need at least two subsample sizes and one rep");
    }
    SubgraphRateResult out;
    std::vector<double> ms;
    std::vector<double> means;
    for (std::size_t g = 0; g < m_grid.size(); ++g) {
        const Index m = m_grid[g];
        std::vector<double> errors(static_cast<std::size_t>(reps));
        for (Index r = 0; r < reps; ++r) {
            const Seed rep_seed = derive_seed(seed, {stream::kReplicate, g, std::uint64_t(r)});
            const SubsampleIndex S = uniform_subsample(model.n(), m, rep_seed);
            const ProbabilityModel restricted = model.restrict_to(S.sample());
            const SparseGraph A_S = sample_adjacency(restricted, rep_seed);
            const Embedding x_hat = ase(A_S, d, options);
            const Embedding x_ref = ase(model_operator(restricted), d, options);
            const auto fit = align_orthogonal<double>(x_hat.X, x_ref.X);
            errors[static_cast<std::size_t>(r)] = two_to_infinity(x_hat.X * fit.W - x_ref.X);
        }
        out.points.push_back({m, mean_of(errors), sd_of(errors)});
        ms.push_back(m);
        means.push_back(out.points.back().mean_error);
    }
    out.slope = log_log_slope(ms, means);
    return out;
}

DiagnosticsReport assumption_report(const ProbabilityModel& model, Index m, const AssumptionOptions& options) {
    const Index n = model.n();
    if (m < 1 || m > n) {
        throw InvalidArgument("assumption_report: need 1 <= m <= n");
    }
    DiagnosticsReport report;
    const double rho = model.rho();

    const auto spectrum = factored_eigen(model.memberships(), rho * model.mixing());
    const VectorXd& values = spectrum.first;
    const double top = values.size() > 0 ? values.cwiseAbs().maxCoeff() : 0.0;
    std::vector<double> nonzero;
    for (Eigen::Index k = 0; k < values.size(); ++k) {
        if (top > 0.0 && std::abs(values[k]) > kZeroTol * top) {
            nonzero.push_back(values[k]);
        }
    }
    const auto rank = static_cast<Index>(nonzero.size());
    const Index declared = options.declared_d.value_or(model.d());
    report.add("rank", rank, "numerical rank of P");
    report.add("declared_d", declared, "embedding dimension in use");
    report.flag("rank_matches_d", rank != declared, "P has rank exactly d");

    const Index side = std::min(n, std::max<Index>(options.grid, 2));
    std::vector<Index> nodes(static_cast<std::size_t>(side));
    for (Index k = 0; k < side; ++k) {
        nodes[static_cast<std::size_t>(k)] =
            side > 1 ? static_cast<Index>((static_cast<Offset>(k) * (n - 1)) / (side - 1)) : 0;
    }
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (Index i : nodes) {
        for (Index j : nodes) {
            if (i != j) {
                const double p = model.entry(i, j);
                lo = std::min(lo, p);
                hi = std::max(hi, p);
            }
        }
    }
    if (n >= 2) {
        report.add("entry_min_over_rho", lo / rho, "smallest scanned entry in units of rho");
        report.add("entry_max_over_rho", hi / rho, "largest scanned entry in units of rho");
        report.flag("entries_uniformly_sparse", !(lo > 0.0) || hi > 1.0,
                    "entries bounded between c1 rho and c2 rho with c1 > 0, c2 rho <= 1");
    }

    if (rank > 0) {
        report.add("kappa", condition_number(nonzero), "condition number of P");
        std::vector<Eigen::Index> keep;
        for (Eigen::Index k = 0; k < spectrum.first.size(); ++k) {
            if (std::abs(spectrum.first[k]) > kZeroTol * top) {
                keep.push_back(k);
            }
        }
        MatrixXd u(n, static_cast<Eigen::Index>(keep.size()));
        for (std::size_t k = 0; k < keep.size(); ++k) {
            u.col(static_cast<Eigen::Index>(k)) = spectrum.second.col(keep[k]);
        }
        report.add("coherence", coherence(u), "sqrt(n) ||U_P||_{2->inf}, bounded for coherent eigenvectors");
    }
    report.flag("rank_positive", rank == 0, "P is not identically zero");

    const double log_n = std::log(static_cast<double>(n));
    report.add("m", m, "subsample size");
    if (log_n > 1.0) {
        report.add("implied_a", std::log(static_cast<double>(m)) / std::log(log_n) - 1.0,
                   "a with m = (log n)^{1+a}");
    }
    if (options.a) {
        const double target = std::pow(log_n, 1.0 + *options.a);
        report.add("log_n_power", target, "(log n)^{1+a}");
        report.flag("subsample_size", static_cast<double>(m) < target, "m at least (log n)^{1+a}");
    }
    const double log_m = std::log(static_cast<double>(m));
    report.add("m_rho", m * rho, "expected degree scale inside the subsample");
    report.add("log_m", log_m, "log m");
    report.flag("subgraph_degree", m * rho < log_m, "m rho at least log m");
    return report;
}

}  // namespace predsub
