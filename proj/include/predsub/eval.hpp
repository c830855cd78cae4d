#pragma once

#include "predsub/graph.hpp"
#include "predsub/spectral.hpp"
#include "predsub/types.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace predsub {

struct Curve {
    std::vector<double> x;
    std::vector<double> y;
};

/// Named diagnostic results. Every entry carries a short tag naming the
/// property it checks.
struct DiagnosticsReport {
    struct Scalar {
        double value;
        std::string tag;
    };
    struct Series {
        Curve curve;
        std::string tag;
    };
    struct Flag {
        bool violated;
        std::string tag;
    };

    std::map<std::string, Scalar> scalars;
    std::map<std::string, Series> curves;
    std::map<std::string, Flag> flags;

    void add(const std::string& key, double value, std::string tag);
    void add(const std::string& key, Curve curve, std::string tag);
    void flag(const std::string& key, bool violated, std::string tag);

    [[nodiscard]] bool contains(const std::string& key) const;
    [[nodiscard]] bool any_violation() const;
};

/// sqrt(n) * ||U||_{2->inf} for U with orthonormal columns.
double coherence(const MatrixXd& U);

/// max|lambda| / min|lambda|.
double condition_number(std::span<const double> values);
double condition_number(const VectorXd& values);

/// Nonzero eigenpairs of the model's P (diagonal included), ordered like
/// an embedding: positives descending, then negatives by modulus.
SpectralPair<double> model_spectrum(const ProbabilityModel& model);

/// Latent positions U_P |D_P|^{1/2} of the model's P.
Embedding model_embedding(const ProbabilityModel& model);

/// Independent-inclusion sampler: each node kept with probability m / n.
std::vector<Index> inclusion_subsample(Index n, Index m, Seed seed);

struct EigenScalingResult {
    /// Per trial: max_i |sigma_i(P) - (n/m) sigma_i(P_S)| / (n rho), i in [d].
    std::vector<double> deviations;
    std::vector<Index> sample_sizes;

    [[nodiscard]] double max() const;
    [[nodiscard]] double mean() const;
    [[nodiscard]] Index count_within(double epsilon) const;
};

EigenScalingResult eigen_scaling_check(const ProbabilityModel& truth, Index m, Index trials, Seed seed);

/// m = ceil((log n)^{1 + a}), capped at n.
Index subsample_size(Index n, double a);

struct ErrorCurveOptions {
    Index reps = 1;
    /// Feed the true P instead of a sampled graph.
    bool noiseless = false;
    /// Include the full-graph ASE baseline.
    bool baseline = true;
    EigOptions eig;
};

struct ErrorPoint {
    /// a = NaN marks the full ASE baseline.
    double a = 0.0;
    Index m = 0;
    double mean_error = 0.0;
    double sd_error = 0.0;
    /// Mean of min_W ||X_hat W - X_ref||_{2->inf}, with W fitted on the S rows.
    double mean_two_inf = 0.0;
    double mean_seconds = 0.0;
    std::vector<double> errors;
};

struct ErrorCurveResult {
    std::vector<ErrorPoint> points;
    std::optional<ErrorPoint> baseline;

    /// Least-squares slope of log(mean_two_inf) on log(m).
    [[nodiscard]] double two_inf_slope() const;
};

/// Relative Frobenius error of the subsampled estimator over a grid of a.
/// The reference latent positions are those of the noise-free pipeline on
/// the same S: the ASE of P_S, extended by exact interpolation.
ErrorCurveResult error_curve(const ProbabilityModel& model, Index d, std::span<const double> a_grid, Seed seed,
                             const ErrorCurveOptions& options = {});

struct SubgraphRatePoint {
    Index m = 0;
    double mean_error = 0.0;
    double sd_error = 0.0;
};

struct SubgraphRateResult {
    std::vector<SubgraphRatePoint> points;
    double slope = 0.0;
};

/// min_W ||X_hat_S W - X_S||_{2->inf} with X_hat_S the ASE of A_S and X_S
/// the ASE of P_S, averaged over reps for each m. A_S is drawn directly
/// from the restricted model, which has the law of the induced subgraph.
SubgraphRateResult subgraph_rate(const ProbabilityModel& model, Index d, std::span<const Index> m_grid, Index reps,
                                 Seed seed, const EigOptions& options = {});

/// Least-squares slope of log y on log x.
double log_log_slope(std::span<const double> x, std::span<const double> y);

struct AssumptionOptions {
    std::optional<Index> declared_d;
    std::optional<double> a;
    /// Side of the node grid scanned for entry bounds.
    Index grid = 200;
};

DiagnosticsReport assumption_report(const ProbabilityModel& model, Index m, const AssumptionOptions& options = {});

}  // namespace predsub
