#include "predsub/lowrank.hpp"

namespace predsub {

FactoredOperator<double> model_operator(const ProbabilityModel& model) {
    return FactoredOperator<double>(model.memberships(), model.rho() * model.mixing());
}

double relative_frob_error(const LowRankP& estimate, const ProbabilityModel& truth) {
    if (estimate.n() != truth.n()) {
        throw InvalidArgument("relative_frob_error: size mismatch (" + std::to_string(estimate.n()) + " vs " +
                              std::to_string(truth.n()) + ")");
    }
    const Index r = estimate.rank();
    const Index d = truth.d();
    MatrixXd z(truth.n(), r + d);
    z << estimate.factor(), truth.memberships();
    MatrixXd middle = MatrixXd::Zero(r + d, r + d);
    middle.diagonal().head(r) = estimate.signature();
    middle.bottomRightCorner(d, d) = -truth.rho() * truth.mixing();
    const double denom = detail::factored_frobenius<double>(truth.memberships(), truth.rho() * truth.mixing());
    if (denom == 0.0) {
        throw InvalidArgument("relative_frob_error: true probability matrix is zero");
    }
    return detail::factored_frobenius<double>(z, middle) / denom;
}

}  // namespace predsub
