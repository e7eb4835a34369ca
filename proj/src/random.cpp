#include "jointmodel/random.h"

#include <cmath>

#include <Eigen/Cholesky>

#include "jointmodel/errors.h"

namespace jointmodel
{

Rng make_stream(std::uint64_t root_seed, std::uint64_t tag, std::uint64_t index)
{
    std::seed_seq seq{
        static_cast<std::uint32_t>(root_seed & 0xffffffffu),
        static_cast<std::uint32_t>(root_seed >> 32),
        static_cast<std::uint32_t>(tag),
        static_cast<std::uint32_t>(index & 0xffffffffu),
        static_cast<std::uint32_t>(index >> 32)};
    return Rng(seq);
}

double standard_normal(Rng& rng)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    return normal(rng);
}

VectorXd standard_normal_vector(Eigen::Index n, Rng& rng)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    VectorXd z(n);
    for (Eigen::Index k = 0; k < n; ++k)
    {
        z[k] = normal(rng);
    }
    return z;
}

VectorXd sample_mvn(const VectorXd& mean, const MatrixXd& cov, Rng& rng)
{
    Eigen::LLT<MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
    {
        throw NumericError("covariance of normal draw is not positive definite");
    }
    return mean + llt.matrixL() * standard_normal_vector(mean.size(), rng);
}

double sample_inverse_gamma(double shape, double rate, Rng& rng)
{
    std::gamma_distribution<double> gamma(shape, 1.0 / rate);
    return 1.0 / gamma(rng);
}

MatrixXd sample_inverse_wishart(double df, const MatrixXd& scale, Rng& rng)
{
    const Eigen::Index q = scale.rows();
    if (!(df > static_cast<double>(q) - 1.0))
    {
        throw NumericError("inverse Wishart degrees of freedom must exceed q - 1");
    }
    Eigen::LLT<MatrixXd> scale_llt(scale);
    if (scale_llt.info() != Eigen::Success)
    {
        throw NumericError("inverse Wishart scale matrix is degenerate");
    }
    if (q == 1)
    {
        std::chi_squared_distribution<double> chisq(df);
        return MatrixXd::Constant(1, 1, scale(0, 0) / chisq(rng));
    }
    const MatrixXd precision_factor
        = scale_llt.solve(MatrixXd::Identity(q, q)).llt().matrixL();
    MatrixXd bartlett = MatrixXd::Zero(q, q);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index a = 0; a < q; ++a)
    {
        std::chi_squared_distribution<double> chisq(df - static_cast<double>(a));
        bartlett(a, a) = std::sqrt(chisq(rng));
        for (Eigen::Index b = 0; b < a; ++b)
        {
            bartlett(a, b) = normal(rng);
        }
    }
    const MatrixXd factor = precision_factor * bartlett;
    const MatrixXd wishart = factor * factor.transpose();
    MatrixXd out = wishart.llt().solve(MatrixXd::Identity(q, q));
    return 0.5 * (out + out.transpose());
}

double uniform01(Rng& rng)
{
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    return unif(rng);
}

}  // namespace jointmodel
