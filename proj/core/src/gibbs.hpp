#pragma once

#include "frame_sampler/random.hpp"

#include <Eigen/Dense>

namespace frame_sampler::gibbs {

struct Normal {
    double mean = 0.0;
    double sd = 0.0;
};

/// Full conditional of alpha_h given n_h observations summing to sum_h,
/// prior mean m_h and the two variances.
Normal alpha_conditional(double n_h, double sum_h, double m_h, double var_y, double var_alpha);

/// Draw from N(Q^{-1} b, Q^{-1}).
Eigen::VectorXd draw_gaussian(const Eigen::MatrixXd &precision, const Eigen::VectorXd &b, Rng &rng);

/// Draw from inverse-Gamma(shape + count / 2, scale + ss / 2).
double draw_variance(Rng &rng, double shape, double scale, double count, double ss);

} // namespace frame_sampler::gibbs
