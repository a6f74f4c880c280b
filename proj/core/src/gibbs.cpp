#include "gibbs.hpp"

#include "frame_sampler/errors.hpp"

#include <cmath>

namespace frame_sampler::gibbs {

Normal alpha_conditional(double n_h, double sum_h, double m_h, double var_y, double var_alpha) {
    const double prec = n_h / var_y + 1.0 / var_alpha;
    return {(sum_h / var_y + m_h / var_alpha) / prec, 1.0 / std::sqrt(prec)};
}

Eigen::VectorXd draw_gaussian(const Eigen::MatrixXd &precision, const Eigen::VectorXd &b, Rng &rng) {
    const Eigen::LLT<Eigen::MatrixXd> llt(precision);
    if (llt.info() != Eigen::Success) {
        throw EstimationError("coefficient full conditional is not positive definite");
    }
    const Eigen::VectorXd mean = llt.solve(b);
    Eigen::VectorXd z(precision.rows());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        z[i] = normal_draw(rng, 0.0, 1.0);
    }
    return mean + llt.matrixU().solve(z);
}

double draw_variance(Rng &rng, double shape, double scale, double count, double ss) {
    return inverse_gamma_draw(rng, shape + 0.5 * count, scale + 0.5 * ss);
}

} // namespace frame_sampler::gibbs
