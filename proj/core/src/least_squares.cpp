#include "photonstat/least_squares.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "photonstat/error.hpp"

namespace photonstat
{

std::size_t FitResult::index(std::string_view name) const
{
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end())
        fail(Errc::invalid_parameter, "no fit parameter named " + std::string(name));
    return static_cast<std::size_t>(it - names.begin());
}

const DerivedQuantity &FitResult::derived_quantity(std::string_view name) const
{
    for (const auto &d : derived)
        if (d.name == name)
            return d;
    fail(Errc::invalid_parameter, "no derived quantity named " + std::string(name));
}

bool FitResult::has_flag(std::string_view flag) const
{
    return std::find(flags.begin(), flags.end(), flag) != flags.end();
}

namespace
{

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Layout
{
    std::size_t params = 0;
    std::vector<double> lower, upper, typical;
    std::vector<std::size_t> free; // indices of non-fixed parameters
};

Layout make_layout(const LeastSquaresProblem &pb)
{
    Layout l;
    l.params = pb.initial.size();
    require(l.params > 0, Errc::invalid_parameter, "fit has no parameters");
    require(pb.names.size() == l.params, Errc::invalid_parameter, "parameter names do not match initial values");
    require(static_cast<bool>(pb.residuals), Errc::invalid_parameter, "fit has no residual function");
    require(pb.residual_count > 0, Errc::invalid_parameter, "fit has no residuals");
    auto fill = [&](const std::vector<double> &given, double fallback, std::vector<double> &out) {
        require(given.empty() || given.size() == l.params, Errc::invalid_parameter,
                "bound or scale vector has the wrong length");
        out = given.empty() ? std::vector<double>(l.params, fallback) : given;
    };
    fill(pb.lower, -kInf, l.lower);
    fill(pb.upper, kInf, l.upper);
    fill(pb.typical, 1.0, l.typical);
    for (std::size_t j = 0; j < l.params; ++j)
    {
        require(l.lower[j] <= l.upper[j], Errc::invalid_parameter, "lower bound exceeds upper bound");
        require(std::isfinite(pb.initial[j]), Errc::invalid_parameter, "initial parameter is not finite");
        require(l.typical[j] > 0.0, Errc::invalid_parameter, "typical parameter scale must be > 0");
        if (l.lower[j] < l.upper[j])
            l.free.push_back(j);
    }
    return l;
}

void clamp_to(const Layout &l, std::vector<double> &theta)
{
    for (std::size_t j = 0; j < l.params; ++j)
        theta[j] = std::clamp(theta[j], l.lower[j], l.upper[j]);
}

double step_for(const Layout &l, double theta, std::size_t j, double scale)
{
    static const double base = std::cbrt(std::numeric_limits<double>::epsilon());
    return scale * base * std::max(std::abs(theta), l.typical[j]);
}

class Evaluator
{
public:
    Evaluator(const LeastSquaresProblem &pb, const Layout &l) : pb_(pb), l_(l), buffer_(pb.residual_count) {}

    // Residuals at theta; false if any is not finite.
    bool residuals(std::span<const double> theta, VectorXd &r)
    {
        pb_.residuals(theta, buffer_);
        r.resize(static_cast<Eigen::Index>(buffer_.size()));
        for (std::size_t i = 0; i < buffer_.size(); ++i)
        {
            if (!std::isfinite(buffer_[i]))
                return false;
            r[static_cast<Eigen::Index>(i)] = buffer_[i];
        }
        return true;
    }

    // Jacobian over the free parameters.
    MatrixXd jacobian(const std::vector<double> &theta, double scale)
    {
        MatrixXd J(static_cast<Eigen::Index>(pb_.residual_count), static_cast<Eigen::Index>(l_.free.size()));
        std::vector<double> probe = theta;
        VectorXd plus, minus;
        for (std::size_t c = 0; c < l_.free.size(); ++c)
        {
            const std::size_t j = l_.free[c];
            const double h = step_for(l_, theta[j], j, scale);
            probe[j] = theta[j] + h;
            const double hp = probe[j] - theta[j];
            const bool ok_plus = residuals(probe, plus);
            probe[j] = theta[j] - h;
            const double hm = theta[j] - probe[j];
            const bool ok_minus = residuals(probe, minus);
            probe[j] = theta[j];
            require(ok_plus && ok_minus, Errc::degenerate_input, "model is not finite near the current parameters");
            J.col(static_cast<Eigen::Index>(c)) = (plus - minus) / (hp + hm);
        }
        return J;
    }

private:
    const LeastSquaresProblem &pb_;
    const Layout &l_;
    std::vector<double> buffer_;
};

// max_j |J_j . r| / (|J_j| |r|): the cosine between the residual and each
// Jacobian column, which vanishes at a stationary point whatever the scale.
// Columns in the active set are pinned at a bound and skipped.
double gradient_measure(const MatrixXd &J, const VectorXd &r, const std::vector<bool> &active)
{
    const double rn = r.norm();
    if (rn == 0.0)
        return 0.0;
    double worst = 0.0;
    for (Eigen::Index c = 0; c < J.cols(); ++c)
    {
        const double cn = J.col(c).norm();
        if (cn > 0.0 && !active[static_cast<std::size_t>(c)])
            worst = std::max(worst, std::abs(J.col(c).dot(r)) / (cn * rn));
    }
    return worst;
}

// A free parameter sitting on a bound with the descent direction pointing
// out of the box is held there for the step.
std::vector<bool> active_set(const Layout &l, const std::vector<double> &theta, const VectorXd &g)
{
    std::vector<bool> active(l.free.size(), false);
    for (std::size_t c = 0; c < l.free.size(); ++c)
    {
        const std::size_t j = l.free[c];
        const double descent = -g[static_cast<Eigen::Index>(c)];
        active[c] = (theta[j] <= l.lower[j] && descent < 0.0) || (theta[j] >= l.upper[j] && descent > 0.0);
    }
    return active;
}

void fill_covariance(const LeastSquaresProblem &pb, const Layout &l, const MatrixXd &J, double cost,
                     FitResult &out)
{
    const std::size_t p = l.params;
    out.covariance.assign(p * p, 0.0);
    out.sigmas.assign(p, 0.0);
    const auto k = static_cast<Eigen::Index>(l.free.size());
    if (k == 0)
        return;

    // Column scaling keeps the SVD threshold meaningful when parameters
    // differ by orders of magnitude.
    VectorXd scale(k);
    std::vector<bool> dead(l.free.size(), false);
    for (Eigen::Index c = 0; c < k; ++c)
    {
        scale[c] = J.col(c).norm();
        if (!(scale[c] > 0.0))
        {
            dead[static_cast<std::size_t>(c)] = true;
            scale[c] = 1.0;
        }
    }
    const MatrixXd Js = J * scale.cwiseInverse().asDiagonal();
    Eigen::JacobiSVD<MatrixXd> svd(Js, Eigen::ComputeThinV);
    const VectorXd &s = svd.singularValues();
    const MatrixXd &V = svd.matrixV();
    const double cutoff = std::max(s.size() > 0 ? s[0] : 0.0, 1.0) * 1e-10;

    MatrixXd cov = MatrixXd::Zero(k, k);
    for (Eigen::Index i = 0; i < s.size(); ++i)
    {
        if (s[i] > cutoff)
        {
            cov += V.col(i) * V.col(i).transpose() / (s[i] * s[i]);
        }
        else
        {
            for (Eigen::Index c = 0; c < k; ++c)
                if (std::abs(V(c, i)) > 1e-6)
                    dead[static_cast<std::size_t>(c)] = true;
        }
    }
    const auto dof = static_cast<double>(pb.residual_count) - static_cast<double>(k);
    const double factor = pb.weighted ? 1.0 : (dof > 0.0 ? cost / dof : kInf);

    for (Eigen::Index a = 0; a < k; ++a)
    {
        for (Eigen::Index b = 0; b < k; ++b)
        {
            const std::size_t ia = l.free[static_cast<std::size_t>(a)];
            const std::size_t ib = l.free[static_cast<std::size_t>(b)];
            const bool bad = dead[static_cast<std::size_t>(a)] || dead[static_cast<std::size_t>(b)];
            out.covariance[ia * p + ib] = bad ? kInf : cov(a, b) * factor / (scale[a] * scale[b]);
        }
        const std::size_t ia = l.free[static_cast<std::size_t>(a)];
        const double var = out.covariance[ia * p + ia];
        out.sigmas[ia] = dead[static_cast<std::size_t>(a)] ? kUnidentified : std::sqrt(std::max(var, 0.0));
        if (dead[static_cast<std::size_t>(a)])
            out.flags.push_back("unidentifiable:" + pb.names[ia]);
    }
}

} // namespace

std::vector<double> numeric_jacobian(const LeastSquaresProblem &problem, std::span<const double> params,
                                     double step_scale)
{
    const Layout l = make_layout(problem);
    require(params.size() == l.params, Errc::invalid_parameter, "parameter vector has the wrong length");
    require(step_scale > 0.0, Errc::invalid_parameter, "step scale must be > 0");
    Evaluator eval(problem, l);
    const std::vector<double> theta(params.begin(), params.end());
    const MatrixXd J = eval.jacobian(theta, step_scale);
    std::vector<double> out(problem.residual_count * l.params, 0.0);
    for (std::size_t i = 0; i < problem.residual_count; ++i)
        for (std::size_t c = 0; c < l.free.size(); ++c)
            out[i * l.params + l.free[c]] = J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
    return out;
}

FitResult least_squares(const LeastSquaresProblem &problem, const LeastSquaresOptions &options)
{
    const Layout l = make_layout(problem);
    require(options.max_iterations > 0, Errc::invalid_parameter, "max iterations must be > 0");
    Evaluator eval(problem, l);

    FitResult out;
    out.names = problem.names;
    out.residual_count = problem.residual_count;
    out.fixed.assign(l.params, true);
    for (const std::size_t j : l.free)
        out.fixed[j] = false;

    std::vector<double> theta = problem.initial;
    clamp_to(l, theta);
    VectorXd r;
    require(eval.residuals(theta, r), Errc::degenerate_input, "model is not finite at the initial parameters");
    double cost = r.squaredNorm();
    out.cost_history.push_back(cost);

    const auto k = static_cast<Eigen::Index>(l.free.size());
    double lambda = options.initial_damping;
    MatrixXd J = eval.jacobian(theta, 1.0);
    bool converged = k == 0 || cost == 0.0;
    int iteration = 0;
    std::vector<double> trial(theta.size());
    VectorXd r_trial;

    while (!converged && iteration < options.max_iterations)
    {
        ++iteration;
        const VectorXd g = J.transpose() * r;
        const std::vector<bool> active = active_set(l, theta, g);
        if (gradient_measure(J, r, active) < options.gradient_tolerance)
        {
            converged = true;
            break;
        }
        MatrixXd A = J.transpose() * J;
        VectorXd rhs = -g;
        for (Eigen::Index c = 0; c < k; ++c)
        {
            if (active[static_cast<std::size_t>(c)])
            {
                A.row(c).setZero();
                A.col(c).setZero();
                A(c, c) = 1.0;
                rhs[c] = 0.0;
            }
        }
        const double diag_floor = std::max(A.diagonal().maxCoeff(), 1e-300) * 1e-12;

        bool accepted = false;
        while (!accepted)
        {
            MatrixXd M = A;
            for (Eigen::Index c = 0; c < k; ++c)
                M(c, c) += lambda * std::max(A(c, c), diag_floor);
            const VectorXd delta = M.ldlt().solve(rhs);

            trial = theta;
            double relative_step = 0.0;
            for (Eigen::Index c = 0; c < k; ++c)
            {
                const std::size_t j = l.free[static_cast<std::size_t>(c)];
                const double d = std::isfinite(delta[c]) ? delta[c] : 0.0;
                trial[j] = std::clamp(theta[j] + d, l.lower[j], l.upper[j]);
                relative_step = std::max(relative_step, std::abs(trial[j] - theta[j]) /
                                                            std::max(std::abs(theta[j]), l.typical[j]));
            }

            const bool finite = eval.residuals(trial, r_trial);
            const double trial_cost = finite ? r_trial.squaredNorm() : kInf;
            if (trial_cost < cost)
            {
                theta = trial;
                r = r_trial;
                cost = trial_cost;
                out.cost_history.push_back(cost);
                lambda = std::max(lambda / 10.0, 1e-15);
                accepted = true;
                if (relative_step < options.step_tolerance || cost == 0.0)
                    converged = true;
                else
                    J = eval.jacobian(theta, 1.0);
            }
            else
            {
                // No decrease even for a step below the tolerance: nothing
                // left to resolve at this precision.
                if (relative_step < options.step_tolerance)
                {
                    converged = true;
                    break;
                }
                lambda *= 10.0;
                if (lambda > 1e20)
                    break;
            }
        }
        if (!accepted && !converged)
            break; // damping ran away without progress
    }

    J = eval.jacobian(theta, 1.0);
    out.values = theta;
    out.residual_norm = cost;
    out.gradient_norm = gradient_measure(J, r, active_set(l, theta, J.transpose() * r));
    out.iterations = iteration;
    out.converged = converged;
    if (!converged)
        out.flags.emplace_back("no-convergence");
    fill_covariance(problem, l, J, cost, out);
    return out;
}

} // namespace photonstat
