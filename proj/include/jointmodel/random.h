#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace jointmodel
{

using Eigen::MatrixXd;
using Eigen::VectorXd;

using Rng = std::mt19937_64;

// Independent stream derived from a root seed and a (tag, index) pair, so a
// stream's draws do not depend on how work is scheduled across threads.
Rng make_stream(std::uint64_t root_seed, std::uint64_t tag, std::uint64_t index = 0);

double standard_normal(Rng& rng);

VectorXd standard_normal_vector(Eigen::Index n, Rng& rng);

// mean + L z with L L' = cov. Throws NumericError if cov is not PD.
VectorXd sample_mvn(const VectorXd& mean, const MatrixXd& cov, Rng& rng);

double sample_inverse_gamma(double shape, double rate, Rng& rng);

// IW(df, scale) via the Bartlett decomposition of Wishart(df, scale^{-1}).
MatrixXd sample_inverse_wishart(double df, const MatrixXd& scale, Rng& rng);

double uniform01(Rng& rng);

}  // namespace jointmodel
