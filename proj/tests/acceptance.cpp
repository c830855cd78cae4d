#include "predsub/eval.hpp"
#include "predsub/lowrank.hpp"
#include "predsub/predsub.hpp"
#include "predsub/run.hpp"
#include "predsub/testing.hpp"
#include "support.hpp"

#include <gtest/gtest.h>
#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

using namespace predsub;
namespace ts = predsub::testing_support;

namespace {

void verdict(int criterion, bool pass, const std::string& detail) {
    std::printf("%s criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion, detail.c_str());
    std::fflush(stdout);
    EXPECT_TRUE(pass) << "criterion " << criterion << ": " << detail;
}

std::string fmt(const char* pattern, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, pattern, args...);
    return buf;
}

double rel(double got, double want) {
    return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

const Aggregate& find_aggregate(const RunReport& r, const std::string& method, double epsilon,
                                std::optional<double> a = std::nullopt) {
    for (const auto& g : r.aggregates) {
        if (g.method == method && g.epsilon == epsilon && (!a || g.a == a)) {
            return g;
        }
    }
    throw std::runtime_error("missing aggregate " + method);
}

double aggregate_time(const RunReport& r, const Aggregate& g) {
    const auto k = static_cast<std::size_t>(&g - r.aggregates.data());
    return r.aggregate_timings.at(k).at("total");
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string run_cli(const std::string& args) {
    static int counter = 0;
    const auto out = ts::temp_path("acceptance_cli_" + std::to_string(counter++));
    const std::string cmd = std::string(PREDSUB_CLI_PATH) + " " + args + " > " + out.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return "exit=" + std::to_string(WEXITSTATUS(status)) + "\n" + slurp(out);
}

}  // namespace

TEST(Acceptance, Criterion1DenseOracleEquivalence) {
    double worst = 0.0;
    std::string where;
    auto track = [&](double e, const std::string& what, int k) {
        if (!(e <= worst)) {
            worst = e;
            where = what + " (instance " + std::to_string(k) + ")";
        }
    };
    for (int k = 0; k < 20; ++k) {
        const Index n = 60 + 12 * k;
        const Index d = 1 + k % 5;
        const auto model = generate_mmsb(n, d, 0.3, 0.5, Seed(100 + k));
        const auto A1 = sample_adjacency(model, Seed(200 + k));
        const auto A2 = sample_adjacency(model, Seed(300 + k));
        const auto e1 = ase(A1, d);
        const auto e2 = ase(A2, d);
        const LowRankP P1(e1);
        const LowRankP P2(e2);
        const MatrixXd D1 = ts::dense_truncation(A1.to_dense(), d);
        const MatrixXd D2 = ts::dense_truncation(A2.to_dense(), d);
        track((P1.dense() - D1).norm() / D1.norm(), "ase reconstruction", k);
        track(rel(frob_distance(P1, P2), (D1 - D2).norm()), "frob_distance", k);
        track(rel(two_inf_distance(P1, P2), ts::max_row_norm(D1 - D2)), "two_inf_distance", k);
        const MatrixXd pooled = (D1 + D2) / 2.0;
        track((pooled_average(P1, P2).dense() - pooled).norm() / pooled.norm(), "pooled_average", k);
        const MatrixXd P = model.dense();
        track(rel(relative_frob_error(P1, model), (D1 - P).norm() / P.norm()), "relative_frob_error", k);
    }
    verdict(1, worst <= 1e-8, fmt("worst relative deviation %.3g at %s", worst, where.c_str()));
}

TEST(Acceptance, Criterion2NoiselessRecovery) {
    double worst = 0.0;
    int cases = 0;
    for (int k = 0; k < 10; ++k) {
        const Index n = 200 + 50 * k;
        const Index d = 1 + k % 5;
        const auto model = generate_mmsb(n, d, 0.2, 0.5, Seed(400 + k));
        for (Index m : {d, d + 3, n / 4, n}) {
            const auto S = uniform_subsample(n, m, Seed(500 + 10 * k + m));
            Eigen::JacobiSVD<MatrixXd> svd(model.restrict_to(S.sample()).dense());
            const VectorXd sv = svd.singularValues();
            if (sv.size() < d || sv[d - 1] <= 1e-10 * sv[0]) {
                continue;
            }
            worst = std::max(worst, relative_frob_error(predsub_noiseless(model, S, d).estimate(), model));
            ++cases;
        }
    }
    verdict(2, cases >= 30 && worst <= 1e-8,
            fmt("%d full-rank subsamples, worst relative error %.3g", cases, worst));
}

TEST(Acceptance, Criterion3ErrorAndSpeedAtReducedScale) {
    RunConfig c;
    c.command = Command::simulate_estimate;
    c.n = 20000;
    c.d = 5;
    c.p = 2;
    c.rho = 0.04;
    c.methods = {Method::ase, Method::predsub};
    c.a = {2.625, 3.125};
    c.reps = 30;
    c.seed = 2024;
    const auto r = run_simulate_estimate(c);
    const auto& full = find_aggregate(r, "ase", 0.0);
    const auto& low = find_aggregate(r, "predsub", 0.0, 2.625);
    const auto& high = find_aggregate(r, "predsub", 0.0, 3.125);
    const double t_full = aggregate_time(r, full);
    const double t_high = aggregate_time(r, high);
    const bool pass = *high.mean_error <= 1.2 * *full.mean_error && t_high < t_full &&
                      *low.mean_error > *high.mean_error;
    verdict(3, pass,
            fmt("ASE err %.4f (%.2fs); a=2.625 m=%lld err %.4f; a=3.125 m=%lld err %.4f (%.2fs, %.1fx faster)",
                *full.mean_error, t_full, static_cast<long long>(low.m), *low.mean_error,
                static_cast<long long>(high.m), *high.mean_error, t_high, t_full / t_high));
}

TEST(Acceptance, Criterion4SubgraphRate) {
    // Two well-separated blocks: every nonzero eigenvalue of P clears the
    // noise level of the smallest subgraph.
    const auto base = generate_mmsb(20000, 2, 0.05, 0.05, 5);
    const MatrixXd B = (MatrixXd(2, 2) << 1.0, 0.1, 0.1, 1.0).finished();
    const ProbabilityModel model(base.memberships(), B, 0.05);
    const std::vector<Index> grid{500, 1000, 2000, 4000};
    const auto r = subgraph_rate(model, 2, grid, 20, 3);
    std::string curve;
    for (const auto& p : r.points) {
        curve += fmt(" m=%lld:%.4f", static_cast<long long>(p.m), p.mean_error);
    }
    verdict(4, r.slope >= -0.65 && r.slope <= -0.35, fmt("slope %.3f;%s", r.slope, curve.c_str()));
}

TEST(Acceptance, Criterion5TestCalibrationAndPower) {
    RunConfig c;
    c.command = Command::simulate_test;
    c.n = 5000;
    c.d = 5;
    c.rho = 0.05;
    c.B = 100;
    c.reps = 100;
    c.test_alpha = 0.05;
    c.seed = 77;
    c.m = subsample_size(5000, 2.375);

    c.methods = {Method::predsub};
    c.epsilon = {0.0, 0.1};
    const auto pred = run_simulate_test(c);
    const double pred_level = *find_aggregate(pred, "predsub", 0.0).rejection_rate;
    const double pred_power = *find_aggregate(pred, "predsub", 0.1).rejection_rate;

    // PureSub power is checked on the ascending grid and stops at the first
    // perturbation that reaches 0.9.
    c.methods = {Method::puresub};
    c.epsilon = {0.0, 0.15};
    const auto pure = run_simulate_test(c);
    const double pure_level = *find_aggregate(pure, "puresub", 0.0).rejection_rate;
    double pure_eps = 0.15;
    double pure_power = *find_aggregate(pure, "puresub", 0.15).rejection_rate;
    if (pure_power < 0.9) {
        c.epsilon = {0.2};
        pure_eps = 0.2;
        pure_power = *find_aggregate(run_simulate_test(c), "puresub", 0.2).rejection_rate;
    }
    const bool pass = pred_level <= 0.10 && pred_power >= 0.9 && pure_level <= 0.10 && pure_power >= 0.9;
    verdict(5, pass,
            fmt("m=%lld; PredSub level %.2f power(0.10) %.2f; PureSub level %.2f power(%.2f) %.2f",
                static_cast<long long>(*c.m), pred_level, pred_power, pure_level, pure_eps, pure_power));
}

TEST(Acceptance, Criterion6DeterminismAndIdenticalInputs) {
    bool identical_ok = true;
    for (Seed s = 0; s < 3; ++s) {
        const auto A = sample_adjacency(generate_mmsb(1500, 3, 0.1, 0.5, 60 + s), 70 + s);
        const auto pr = predsub_test(A, A, 300, 3, 50, s);
        const auto pu = puresub_test(A, A, 300, 3, 50, s);
        identical_ok = identical_ok && pr.p_value == 1.0 && pr.T0 == 0.0 && pu.p_value == 1.0 && pu.T0 == 0.0;
    }
    const std::string karate = std::string(PREDSUB_DATA_DIR) + "/karate.txt";
    const std::vector<std::string> commands{
        "simulate-estimate --n 2000 --d 3 --rho 0.1 --method ase --method predsub --a 1.5 --a 2 --reps 3",
        "simulate-test --n 1500 --d 2 --rho 0.1 --method predsub --method puresub --a 2 --B 20 --reps 3 "
        "--epsilon 0 --epsilon 0.2",
        "estimate --input " + karate + " --d 2 --m 20 --method predsub",
        "test --input " + karate + " --input " + karate + " --d 2 --m 20 --B 30",
        "diagnostics --n 1500 --d 2 --rho 0.1 --a 1.5 --a 2 --reps 3 --m-grid 200 --m-grid 400 "
        "--diagnostic coherence --diagnostic eigen_scaling --diagnostic error_curve --diagnostic subgraph_rate",
    };
    int stable = 0;
    for (const auto& cmd : commands) {
        const std::string base = cmd + " --seed 13 --no-timings";
        const std::string first = run_cli(base + " --threads 1");
        const bool same = first.rfind("exit=0\n", 0) == 0 && first == run_cli(base + " --threads 1") &&
                          first == run_cli(base + " --threads 3");
        stable += same ? 1 : 0;
    }
    verdict(6, identical_ok && stable == static_cast<int>(commands.size()),
            fmt("identical-input p=1: %s; %d/%zu commands byte-identical across reruns and 1 vs 3 threads",
                identical_ok ? "yes" : "no", stable, commands.size()));
}

TEST(Acceptance, Criterion7EigenvalueScaling) {
    const Index n = 2000;
    const double eps = 0.3;
    const auto m = static_cast<Index>(std::ceil(8.0 * std::log(double(n)) / (eps * eps)));
    const auto r = eigen_scaling_check(generate_mmsb(n, 3, 0.1, 0.5, 17), m, 100, 18);
    const Index within = r.count_within(eps);
    verdict(7, within >= 95,
            fmt("m=%lld: %lld/100 trials within %.1f (max deviation %.3f)", static_cast<long long>(m),
                static_cast<long long>(within), eps, r.max()));
}

TEST(Acceptance, Criterion8LinearTimeInN) {
    const Index m = 1000;
    const Index d = 3;
    std::vector<double> times;
    std::string detail;
    for (Index n : {10000, 20000, 40000}) {
        const auto graph = sample_adjacency(generate_mmsb(n, d, 0.01, 0.5, 81), 82);
        predsub_estimate(graph, m, d, 0);  // warm-up
        double best = std::numeric_limits<double>::infinity();
        for (Seed s = 1; s <= 5; ++s) {
            const double t0 = omp_get_wtime();
            const auto r = predsub_estimate(graph, m, d, s);
            best = std::min(best, omp_get_wtime() - t0);
            EXPECT_EQ(r.embedding.n(), n);
        }
        times.push_back(best);
        detail += fmt(" n=%lld:%.4fs", static_cast<long long>(n), best);
    }
    const double r1 = times[1] / times[0];
    const double r2 = times[2] / times[1];
    verdict(8, r1 <= 4.0 && r2 <= 4.0,
            fmt("ratios %.2f, %.2f per doubling (limit 4.0);%s", r1, r2, detail.c_str()));
}

TEST(Acceptance, Criterion9PvalueGranularity) {
    const std::vector<double> three{1.0, 2.0, 3.0};
    std::vector<double> hundred(100);
    for (int i = 0; i < 100; ++i) {
        hundred[i] = i + 1.0;
    }
    bool examples = bootstrap_pvalue(5.0, three) == 0.0 && bootstrap_pvalue(0.5, three) == 1.0 &&
                    bootstrap_pvalue(50.0, hundred) == 0.5 && bootstrap_pvalue(2.0, three) == 1.0 / 3.0;
    int checked = 0;
    int on_grid = 0;
    const auto model = generate_mmsb(1200, 2, 0.1, 0.5, 90);
    const auto alt = perturbed_model(model, 0.04);
    for (Index B : {1, 7, 13, 50, 100}) {
        for (Seed s = 0; s < 3; ++s) {
            const auto A1 = sample_adjacency(model, 91 + s);
            const auto A2 = sample_adjacency(s == 0 ? model : alt, 95 + s);
            for (const auto& r : {predsub_test(A1, A2, 250, 2, B, s), puresub_test(A1, A2, 250, 2, B, s)}) {
                const double k = r.p_value * static_cast<double>(B);
                ++checked;
                on_grid += (k == std::round(k) && r.p_value == std::round(k) / static_cast<double>(B)) ? 1 : 0;
            }
        }
    }
    verdict(9, examples && on_grid == checked,
            fmt("bootstrap_pvalue examples %s; %d/%d p-values are exact multiples of 1/B",
                examples ? "exact" : "wrong", on_grid, checked));
}
