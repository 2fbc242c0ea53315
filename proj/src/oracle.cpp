#include "sheat/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>

#include "sheat/errors.hpp"
#include "sheat/quadrature.hpp"

namespace sheat {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kRefineTarget = 0.1;   // rate * dt inside the start-up layer
constexpr double kStartupLayer = 40.0;  // start-up layer length in units of 1 / rate

// Eigenfunction expansion of the deterministic heat flow of u0.
class HeatSeries {
public:
    HeatSeries(const InitialData& u0, double nu, Boundary boundary, int n_modes)
        : u0_(u0), nu_(nu), boundary_(boundary) {
        if (boundary == Boundary::Free) throw DomainError("heat series needs a bounded domain");
        if (n_modes < 1) throw DomainError("n_modes must be positive");
        const bool dirichlet = boundary == Boundary::Dirichlet;
        coeffs_.assign(static_cast<std::size_t>(n_modes) + 1, 0.0);
        if (dirichlet && u0.kind == InitialData::Kind::SineMode) {
            if (u0.mode <= n_modes) coeffs_[static_cast<std::size_t>(u0.mode)] = u0.amplitude / std::sqrt(2.0);
            return;
        }
        const auto rule = initial_rule(u0);
        std::vector<double> f(rule.nodes.size());
        for (std::size_t q = 0; q < f.size(); ++q) f[q] = rule.weights[q] * u0(rule.nodes[q]);
        for (int n = dirichlet ? 1 : 0; n <= n_modes; ++n) {
            double s = 0.0;
            for (std::size_t q = 0; q < f.size(); ++q) {
                const double arg = n * kPi * rule.nodes[q];
                s += f[q] * (dirichlet ? std::sin(arg) : std::cos(arg));
            }
            coeffs_[static_cast<std::size_t>(n)] = n == 0 ? s : std::sqrt(2.0) * s;
        }
    }

    double operator()(double t, double x) const {
        if (t == 0.0) return u0_(x);
        const bool dirichlet = boundary_ == Boundary::Dirichlet;
        double s = dirichlet ? 0.0 : coeffs_[0];
        const double a = nu_ * kPi * kPi * t;
        for (std::size_t n = coeffs_.size() - 1; n >= 1; --n) {
            const double c = coeffs_[n];
            if (c == 0.0) continue;
            const double arg = static_cast<double>(n) * kPi * x;
            s += c * std::exp(-a * static_cast<double>(n * n)) * std::sqrt(2.0) *
                 (dirichlet ? std::sin(arg) : std::cos(arg));
        }
        return s;
    }

private:
    static quad::Rule initial_rule(const InitialData& u0) {
        switch (u0.kind) {
        case InitialData::Kind::Bump:
            return quad::composite_gauss_legendre(u0.gamma, 1.0 - u0.gamma, 256, 16);
        case InitialData::Kind::Table: {
            const std::size_t m = u0.table.size();
            std::vector<double> breaks;
            for (std::size_t j = 0; j < m; ++j) breaks.push_back((j + 1.0) / (m + 1.0));
            const int per = std::max(1, static_cast<int>(1024 / (m + 1)));
            return quad::composite_gauss_legendre(0.0, 1.0, breaks, per, 16);
        }
        case InitialData::Kind::SineMode:
            break;
        }
        return quad::composite_gauss_legendre(0.0, 1.0, 256, 16);
    }

    InitialData u0_;
    double nu_;
    Boundary boundary_;
    std::vector<double> coeffs_;
};

// int_a^b e^{-r s} s^{p - 1} ds for p in {1/2, 3/2}.
double gamma_weight(double p, double r, double a, double b) {
    if (b <= a) return 0.0;
    if (r == 0.0) return (std::pow(b, p) - std::pow(a, p)) / p;
    namespace bm = boost::math;
    const double scale = std::pow(r, -p);
    if (r * a > 1.0) return scale * (bm::tgamma(p, r * a) - bm::tgamma(p, r * b));
    return scale * (bm::tgamma_lower(p, r * b) - bm::tgamma_lower(p, r * a));
}

// g(2 tau, x, x) - (8 pi nu tau)^{-1/2}, bounded for x inside (0, 1).
double diagonal_remainder(const KernelSpec& spec, double tau, double x) {
    const double var = 8.0 * spec.nu * tau;
    if (var > 1.0) return eval_kernel(spec, 2.0 * tau, x, x) - 1.0 / std::sqrt(kPi * var);
    const double sign = spec.boundary == Boundary::Neumann ? 1.0 : -1.0;
    double s = 0.0;
    for (int k = 12; k >= 1; --k) {
        const double dk = 2.0 * k;
        s += 2.0 * std::exp(-dk * dk / var);
        s += sign * (std::exp(-(2.0 * x + dk) * (2.0 * x + dk) / var) +
                     std::exp(-(2.0 * x - dk) * (2.0 * x - dk) / var));
    }
    s += sign * std::exp(-4.0 * x * x / var);
    return s / std::sqrt(kPi * var);
}

// Per-lag product-integration data.
struct LagWeights {
    Eigen::VectorXd ca; // weight on the newer end of the panel
    Eigen::VectorXd cb; // weight on the older end
    Eigen::MatrixXd p;  // spatial averaging of g^2 against the interpolation basis
};

class VolterraSolver {
public:
    VolterraSolver(const OracleConfig& c, double horizon, int panels, double fit_rate)
        : cfg_(c), spec_{c.boundary, c.nu, 1e-13}, n_(c.n_interior), panels_(panels),
          horizon_(horizon), dt_(horizon_ / panels), dx_(1.0 / (n_ + 1)), rate_(fit_rate),
          coupling_(c.lambda * c.lambda * c.k_sigma * c.k_sigma) {
        x_.resize(n_);
        for (int j = 0; j < n_; ++j) x_[j] = (j + 1) * dx_;
    }

    // Nodal solution in scaled form: m(t_k, x_j) = exp(rate t_k + level[k]) w[k][j].
    struct Trajectory {
        std::vector<double> level;
        std::vector<Eigen::VectorXd> w;
        std::size_t max_history = 0;
    };

    double dt() const { return dt_; }

    /// Steps from t = 0, or continues after the first seed->level.size() nodes
    /// when a seed (same dt and rate) is given.
    Trajectory solve(const Trajectory* seed = nullptr) {
        const HeatSeries heat(cfg_.u0, cfg_.nu, cfg_.boundary, cfg_.n_modes);
        Trajectory tr;
        auto& level = tr.level;
        auto& w = tr.w;
        level.resize(static_cast<std::size_t>(panels_) + 1);
        w.resize(level.size());
        std::vector<double> prefix_max(level.size());

        Eigen::VectorXd v0(n_);
        for (int j = 0; j < n_; ++j) v0[j] = std::pow(cfg_.u0(x_[j]), 2);
        normalize(v0, 0.0, level[0], w[0]);
        prefix_max[0] = level[0];
        int start = 1;
        if (seed != nullptr) {
            const int have = std::min(static_cast<int>(seed->level.size()), panels_ + 1);
            for (int k = 1; k < have; ++k) {
                level[k] = seed->level[k];
                w[k] = seed->w[k];
                prefix_max[k] = std::max(prefix_max[k - 1], level[k]);
            }
            start = have;
            tr.max_history = seed->max_history;
        }

        if (coupling_ > 0.0) ensure_lag(1);
        Eigen::PartialPivLU<Eigen::MatrixXd> lu;
        if (coupling_ > 0.0) {
            Eigen::MatrixXd a0 = Eigen::MatrixXd::Identity(n_, n_);
            a0 -= coupling_ * lags_[0].ca.asDiagonal() * lags_[0].p;
            lu.compute(a0);
        }

        Eigen::VectorXd rhs(n_);
        for (int n = start; n <= panels_; ++n) {
            const double t = n * dt_;
            const double ref = std::isfinite(level[n - 1]) ? level[n - 1] : 0.0;
            for (int j = 0; j < n_; ++j) {
                const double d1 = heat(t, x_[j]);
                rhs[j] = d1 == 0.0 ? 0.0 : std::exp(2.0 * std::log(std::abs(d1)) - rate_ * t - ref);
            }
            if (coupling_ > 0.0) {
                std::size_t used = 0;
                for (int i = 1; i <= n; ++i) {
                    const int k = n - i;
                    if (i + 1 <= n) ensure_lag(i + 1);
                    ensure_lag(i);
                    const double scale = std::exp(level[k] - ref);
                    if (scale > 0.0) {
                        Eigen::VectorXd acc = lags_[i - 1].cb.cwiseProduct(lags_[i - 1].p * w[k]);
                        if (i + 1 <= n) acc += lags_[i].ca.cwiseProduct(lags_[i].p * w[k]);
                        rhs += (coupling_ * scale) * acc;
                    }
                    used = static_cast<std::size_t>(i);
                    if (i < n && k >= 1) {
                        const double tail = coupling_ * tail_bound(i * dt_, n * dt_) *
                                            std::exp(prefix_max[k - 1] - ref);
                        if (tail <= cfg_.history_tol) break;
                    }
                }
                tr.max_history = std::max(tr.max_history, used);
                Eigen::VectorXd sol = lu.solve(rhs);
                normalize(sol, ref, level[n], w[n]);
            } else {
                normalize(rhs, ref, level[n], w[n]);
            }
            if (!std::isfinite(level[n]) && level[n] != kNegInf) {
                throw NumericalError("oracle produced a non-finite moment at step " + std::to_string(n), n);
            }
            prefix_max[n] = std::max(prefix_max[n - 1], level[n]);
        }
        return tr;
    }

    MomentField assemble(const Trajectory& tr) const {
        const auto& level = tr.level;
        const auto& w = tr.w;
        MomentField mf;
        mf.t = cfg_.t_grid;
        mf.x = x_;
        mf.lambda = cfg_.lambda;
        mf.k_sigma = cfg_.k_sigma;
        mf.nu = cfg_.nu;
        mf.boundary = cfg_.boundary;
        mf.panels = panels_;
        mf.fit_rate = rate_;
        mf.max_history = tr.max_history;
        for (double t : cfg_.t_grid) {
            const double pos = t / dt_;
            int k = static_cast<int>(std::floor(pos));
            double s = pos - k;
            if (std::abs(pos - std::round(pos)) <= 1e-9 * std::max(1.0, pos)) {
                k = static_cast<int>(std::round(pos));
                s = 0.0;
            }
            k = std::clamp(k, 0, panels_);
            std::vector<double> lm(static_cast<std::size_t>(n_));
            std::vector<double> mm(lm.size());
            for (int j = 0; j < n_; ++j) {
                double val;
                double base = level[k];
                if (s == 0.0 || k == panels_) {
                    val = w[k][j];
                } else {
                    const double hi = level[k + 1];
                    if (base == kNegInf) {
                        base = hi;
                        val = s * w[k + 1][j];
                    } else {
                        val = (1.0 - s) * w[k][j] + s * std::exp(hi - base) * w[k + 1][j];
                    }
                }
                lm[j] = val > 0.0 && base != kNegInf ? rate_ * t + base + std::log(val) : kNegInf;
                mm[j] = std::exp(lm[j]);
            }
            mf.log_m.push_back(std::move(lm));
            mf.m.push_back(std::move(mm));
        }
        return mf;
    }

private:
    void normalize(Eigen::VectorXd& v, double ref, double& level, Eigen::VectorXd& out) const {
        for (int j = 0; j < v.size(); ++j) {
            if (!std::isfinite(v[j])) throw NumericalError("non-finite value in the oracle solve");
            if (v[j] < 0.0) v[j] = 0.0; // round-off below zero; m is nonnegative
        }
        const double mx = v.maxCoeff();
        if (mx > 0.0) {
            level = ref + std::log(mx);
            out = v / mx;
        } else {
            level = kNegInf;
            out = Eigen::VectorXd::Zero(v.size());
        }
    }

    // Bound on coupling-free contributions from panels beyond lag tau_a, using
    // g(2 tau, x, x) <= 2 (8 pi nu tau)^{-1/2} + 1 and rows of P summing to 1.
    double tail_bound(double a, double b) const {
        const double sing = 2.0 * gamma_weight(0.5, rate_, a, b) / std::sqrt(8.0 * kPi * cfg_.nu);
        const double flat = rate_ > 0.0 ? (std::exp(-rate_ * a) - std::exp(-rate_ * b)) / rate_ : b - a;
        return sing + flat;
    }

    void ensure_lag(int j) {
        while (static_cast<int>(lags_.size()) < j) {
            lags_.push_back(make_lag(static_cast<int>(lags_.size()) + 1));
        }
    }

    LagWeights make_lag(int j) const {
        const double a = (j - 1) * dt_;
        const double b = j * dt_;
        const double s0 = gamma_weight(0.5, rate_, a, b);
        const double s1 = gamma_weight(1.5, rate_, a, b);
        const double norm = 1.0 / std::sqrt(8.0 * kPi * cfg_.nu);
        LagWeights lw;
        lw.ca = Eigen::VectorXd::Constant(n_, norm * (b * s0 - s1) / dt_);
        lw.cb = Eigen::VectorXd::Constant(n_, norm * (s1 - a * s0) / dt_);

        // Bounded remainder of g(2 tau, x, x) by Gauss-Legendre.
        quad::Rule rule;
        if (j == 1) {
            std::vector<double> breaks;
            for (int k = 40; k >= 1; --k) breaks.push_back(b * std::ldexp(1.0, -k));
            rule = quad::composite_gauss_legendre(a, b, breaks, 1, 8);
        } else {
            const int pieces = std::clamp(static_cast<int>(std::ceil(rate_ * dt_)), 1, 32);
            rule = quad::composite_gauss_legendre(a, b, pieces, 8);
        }
        for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
            const double tau = rule.nodes[q];
            const double e = rule.weights[q] * std::exp(-rate_ * tau) / dt_;
            if (e == 0.0) continue;
            for (int i = 0; i < n_; ++i) {
                const double r = e * diagonal_remainder(spec_, tau, x_[i]);
                lw.ca[i] += r * (b - tau);
                lw.cb[i] += r * (tau - a);
            }
        }
        const double tau_bar = s0 > 0.0 ? s1 / s0 : 0.5 * (a + b);
        lw.p = averaging_matrix(tau_bar > 0.0 ? tau_bar : 0.5 * (a + b));
        return lw;
    }

    // P(x_j, .) maps nodal m to int g(tau,x_j,y)^2 m(y) dy / int g(tau,x_j,y)^2 dy.
    // For a spread well below dx the second-moment stencil m + (nu tau / 2) m''
    // is used; piecewise-linear interpolation there would add an O(sd / dx)
    // numerical diffusion per renewal. Otherwise m is interpolated by local
    // cubics through the nodes and the boundary value, which is 0 (Dirichlet)
    // or the adjacent node (Neumann).
    Eigen::MatrixXd averaging_matrix(double tau) const {
        Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n_, n_);
        const double var = cfg_.nu * tau; // g^2 is Gaussian with this variance for small tau
        const double sd = std::sqrt(var);
        const bool neumann = cfg_.boundary == Boundary::Neumann;
        const int cells = n_ + 1;
        if (sd <= dx_ / 8.0) {
            const double c = 0.5 * var / (dx_ * dx_);
            for (int row = 0; row < n_; ++row) {
                p(row, row) = 1.0 - 2.0 * c;
                if (row > 0) p(row, row - 1) = c;
                else if (neumann) p(row, row) += c;
                if (row + 1 < n_) p(row, row + 1) = c;
                else if (neumann) p(row, row) += c;
            }
            return p;
        }
        // Point z_i = i dx, i = 0..n+1; interior node of point i is i - 1.
        auto scatter = [&](int row, int point, double weight) {
            if (point >= 1 && point <= n_) p(row, point - 1) += weight;
            else if (neumann) p(row, point == 0 ? 0 : n_ - 1) += weight;
        };
        const int per_cell = std::clamp(static_cast<int>(std::ceil(2.0 * dx_ / sd)), 1, 16);
        const auto unit = quad::composite_gauss_legendre(0.0, 1.0, per_cell, 8);
        const int per = static_cast<int>(unit.nodes.size());
        const double reach = 12.0 * sd + dx_;
        const auto trunc = truncation_terms(spec_, tau);
        Eigen::MatrixXd g; // g(tau, x_row, y_q), series route only
        if (!trunc.use_images) {
            const int terms = trunc.n_terms;
            const int ny = cells * per;
            const bool dirichlet = cfg_.boundary == Boundary::Dirichlet;
            Eigen::MatrixXd sx(n_, terms + 1);
            Eigen::MatrixXd sy(ny, terms + 1);
            auto basis = [&](int n, double z) {
                if (n == 0) return dirichlet ? 0.0 : 1.0;
                const double arg = n * kPi * z;
                return std::numbers::sqrt2 * (dirichlet ? std::sin(arg) : std::cos(arg));
            };
            for (int n = 0; n <= terms; ++n) {
                const double decay = std::exp(-cfg_.nu * kPi * kPi * n * n * tau);
                for (int row = 0; row < n_; ++row) sx(row, n) = decay * basis(n, x_[row]);
                for (int cell = 0; cell < cells; ++cell) {
                    for (int q = 0; q < per; ++q) {
                        sy(cell * per + q, n) = basis(n, (cell + unit.nodes[q]) * dx_);
                    }
                }
            }
            g = sx * sy.transpose();
        }
        for (int row = 0; row < n_; ++row) {
            double total = 0.0;
            for (int cell = 0; cell < cells; ++cell) {
                const double z0 = cell * dx_;
                const double z1 = (cell + 1) * dx_;
                if (trunc.use_images && (z1 < x_[row] - reach || z0 > x_[row] + reach)) continue;
                const int first = std::clamp(cell - 1, 0, n_ - 2);
                double acc[4] = {0.0, 0.0, 0.0, 0.0};
                for (int q = 0; q < per; ++q) {
                    const double gv = trunc.use_images
                                          ? eval_kernel(spec_, tau, x_[row], z0 + unit.nodes[q] * dx_)
                                          : g(row, cell * per + q);
                    const double wq = unit.weights[q] * dx_ * gv * gv;
                    total += wq;
                    const double u = cell + unit.nodes[q] - first;
                    acc[0] -= wq * (u - 1.0) * (u - 2.0) * (u - 3.0) / 6.0;
                    acc[1] += wq * u * (u - 2.0) * (u - 3.0) / 2.0;
                    acc[2] -= wq * u * (u - 1.0) * (u - 3.0) / 2.0;
                    acc[3] += wq * u * (u - 1.0) * (u - 2.0) / 6.0;
                }
                for (int k = 0; k < 4; ++k) scatter(row, first + k, acc[k]);
            }
            if (total > 0.0) p.row(row) /= total;
        }
        return p;
    }

    const OracleConfig& cfg_;
    KernelSpec spec_;
    int n_;
    int panels_;
    double horizon_;
    double dt_;
    double dx_;
    double rate_;
    double coupling_;
    std::vector<double> x_;
    std::vector<LagWeights> lags_;
};

// When rate * dt exceeds the refinement target, exp(-rate t) m still has an
// O(1) start-up transient on the scale 1 / rate (the renewal factor builds
// up). That layer is solved on a grid up to 64 times finer, recursively,
// and its nodes are reused as the first coarse nodes.
VolterraSolver::Trajectory solve_levels(const OracleConfig& cfg, double horizon, int panels,
                                        double rate, double target) {
    VolterraSolver solver(cfg, horizon, panels, rate);
    const double dt = solver.dt();
    const double coupling = cfg.lambda * cfg.k_sigma;
    if (!cfg.auto_refine || coupling == 0.0 || rate * dt <= target) return solver.solve();
    const int layer = std::min(panels, static_cast<int>(std::ceil(kStartupLayer / (rate * dt))));
    const int sub = std::min(64, static_cast<int>(std::ceil(rate * dt / target)));
    const auto fine = solve_levels(cfg, layer * dt, layer * sub, rate, target);
    VolterraSolver::Trajectory seed;
    for (int k = 0; k <= layer; ++k) {
        seed.level.push_back(fine.level[static_cast<std::size_t>(k * sub)]);
        seed.w.push_back(fine.w[static_cast<std::size_t>(k * sub)]);
    }
    seed.max_history = fine.max_history;
    return solver.solve(&seed);
}

MomentField solve_with_startup(const OracleConfig& cfg, int panels, double rate, double target) {
    const double horizon = cfg.t_grid.back();
    return VolterraSolver(cfg, horizon, panels, rate)
        .assemble(solve_levels(cfg, horizon, panels, rate, target));
}

} // namespace

void OracleConfig::validate() const {
    if (!(nu > 0.0) || !std::isfinite(nu)) throw DomainError("nu must be positive");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw DomainError("lambda must be nonnegative");
    if (!(k_sigma > 0.0) || !std::isfinite(k_sigma)) throw DomainError("k_sigma must be positive");
    if (boundary == Boundary::Free) throw DomainError("oracle needs Dirichlet or Neumann boundary");
    if (t_grid.size() < 2) throw DomainError("t_grid needs at least two times");
    if (t_grid.front() != 0.0) throw DomainError("t_grid must start at 0");
    for (std::size_t i = 1; i < t_grid.size(); ++i) {
        if (!(t_grid[i] > t_grid[i - 1])) throw DomainError("t_grid must be strictly increasing");
    }
    if (!std::isfinite(t_grid.back())) throw DomainError("t_grid must be finite");
    if (n_interior < 3) throw DomainError("n_interior must be at least 3");
    if (panels < 2) throw DomainError("need at least 2 time panels");
    if (n_modes < 1) throw DomainError("n_modes must be positive");
    if (!(history_tol > 0.0)) throw DomainError("history_tol must be positive");
    u0.validate();
    if (u0.kind == InitialData::Kind::Table && static_cast<int>(u0.table.size()) != n_interior) {
        throw DomainError("table initial data must match n_interior");
    }
}

double whole_line_rate(double nu, double lambda, double k_sigma) {
    const double c = lambda * k_sigma;
    return c * c * c * c / (8.0 * nu);
}

double heat_solution(const InitialData& u0, double nu, Boundary boundary, double t, double x,
                     int n_modes) {
    if (t < 0.0) throw DomainError("t must be nonnegative");
    return HeatSeries(u0, nu, boundary, n_modes)(t, x);
}

MomentField second_moment_volterra(const OracleConfig& config) {
    config.validate();
    const double rate = std::isnan(config.fit_rate)
                            ? whole_line_rate(config.nu, config.lambda, config.k_sigma)
                            : config.fit_rate;
    if (!(rate >= 0.0) || !std::isfinite(rate)) throw DomainError("fit_rate must be nonnegative");
    const int panels = config.panels;
    MomentField mf = solve_with_startup(config, panels, rate, kRefineTarget);
    if (config.error_estimate && panels >= 4) {
        const MomentField coarse = solve_with_startup(config, panels / 2, rate, 2.0 * kRefineTarget);
        mf.log_error.resize(mf.t.size());
        mf.error.resize(mf.t.size());
        for (std::size_t k = 0; k < mf.t.size(); ++k) {
            for (std::size_t j = 0; j < mf.x.size(); ++j) {
                const double a = mf.log_m[k][j];
                const double b = coarse.log_m[k][j];
                const double le = a == b ? 0.0 : std::abs(a - b);
                mf.log_error[k].push_back(le);
                mf.error[k].push_back(a == b ? 0.0 : std::abs(mf.m[k][j] - coarse.m[k][j]));
            }
        }
    }
    return mf;
}

std::size_t MomentField::time_index(double time) const {
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (std::abs(t[k] - time) <= 1e-12 * std::max(1.0, std::abs(time))) return k;
    }
    throw DomainError("time not on the moment field's grid");
}

double MomentField::log_at(double time, double pos) const {
    const std::size_t k = time_index(time);
    if (pos < 0.0 || pos > 1.0) throw DomainError("x outside [0, 1]");
    const std::size_t n = x.size();
    const double dx = 1.0 / static_cast<double>(n + 1);
    const double u = pos / dx - 1.0; // fractional node index
    const auto& row = log_m[k];
    const bool neumann = boundary == Boundary::Neumann;
    auto node = [&](long i) {
        if (i < 0) return neumann ? row[0] : kNegInf;
        if (i >= static_cast<long>(n)) return neumann ? row[n - 1] : kNegInf;
        return row[static_cast<std::size_t>(i)];
    };
    const long i0 = static_cast<long>(std::floor(u));
    const double s = u - static_cast<double>(i0);
    const double a = node(i0);
    const double b = node(i0 + 1);
    if (s == 0.0) return a;
    const double top = std::max(a, b);
    if (top == kNegInf) return kNegInf;
    return top + std::log((1.0 - s) * std::exp(a - top) + s * std::exp(b - top));
}

double MomentField::at(double time, double pos) const { return std::exp(log_at(time, pos)); }

Envelope lower_bound_envelope(const MomentField& mf, double gamma) {
    if (!(gamma > 0.0 && gamma < 0.5)) throw DomainError("gamma must lie in (0, 1/2)");
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < mf.x.size(); ++j) {
        if (mf.x[j] >= gamma - 1e-12 && mf.x[j] <= 1.0 - gamma + 1e-12) idx.push_back(j);
    }
    if (idx.empty()) throw DomainError("no x node inside [gamma, 1 - gamma]");
    Envelope env;
    env.gamma = gamma;
    env.rate = 2.0 * mf.nu * kPi * kPi;
    env.t = mf.t;
    for (std::size_t k = 0; k < mf.t.size(); ++k) {
        std::size_t best = idx.front();
        for (std::size_t j : idx) {
            if (mf.log_m[k][j] < mf.log_m[k][best]) best = j;
        }
        const double lh = mf.log_m[k][best];
        env.log_h.push_back(lh);
        env.log_H.push_back(lh + env.rate * mf.t[k]);
        env.h.push_back(std::exp(lh));
        env.H.push_back(std::exp(env.log_H.back()));
        env.argmin_x.push_back(mf.x[best]);
    }
    return env;
}

SlopeFit late_time_slope(const std::vector<double>& t, const std::vector<double>& y,
                         double window_start) {
    if (t.size() != y.size() || t.empty()) throw DomainError("series sizes differ or are empty");
    const double t0 = t.front();
    const double cut = t0 + window_start * (t.back() - t0);
    std::vector<double> xs;
    std::vector<double> ys;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] >= cut - 1e-12 && std::isfinite(y[i])) {
            xs.push_back(t[i]);
            ys.push_back(y[i]);
        }
    }
    if (xs.size() < 3) throw DomainError("late-time window holds fewer than 3 finite points");
    const double n = static_cast<double>(xs.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    SlopeFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.points = xs.size();
    double ss = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double r = ys[i] - f.intercept - f.slope * xs[i];
        ss += r * r;
    }
    f.slope_se = std::sqrt(ss / (n - 2.0) / sxx);
    return f;
}

Theorem31Fit theorem31_calibration(const std::vector<GrowthSeries>& series, double k_lower,
                                   double nu, double window_start) {
    if (series.size() < 4) throw DomainError("calibration needs at least 4 lambda values");
    if (!(k_lower > 0.0)) throw DomainError("K_L must be positive");
    Theorem31Fit fit;
    fit.window_start = window_start;
    fit.base_rate = 2.0 * nu * kPi * kPi;
    std::vector<double> intercepts;
    for (const auto& s : series) {
        const auto f = late_time_slope(s.t, s.log_h, window_start);
        fit.lambdas.push_back(s.lambda);
        fit.slopes.push_back(f.slope);
        fit.slope_se.push_back(f.slope_se);
        intercepts.push_back(f.intercept);
    }
    auto through_origin = [&](int power, double& coef, double& se, double& r2) {
        double sxx = 0.0;
        double sxy = 0.0;
        double syy = 0.0;
        for (std::size_t i = 0; i < fit.lambdas.size(); ++i) {
            const double xi = std::pow(fit.lambdas[i] * k_lower, power);
            const double yi = fit.slopes[i] + fit.base_rate;
            sxx += xi * xi;
            sxy += xi * yi;
            syy += yi * yi;
        }
        coef = sxy / sxx;
        double ss = 0.0;
        for (std::size_t i = 0; i < fit.lambdas.size(); ++i) {
            const double xi = std::pow(fit.lambdas[i] * k_lower, power);
            const double r = fit.slopes[i] + fit.base_rate - coef * xi;
            ss += r * r;
        }
        r2 = syy > 0.0 ? 1.0 - ss / syy : 0.0;
        se = std::sqrt(ss / (static_cast<double>(fit.lambdas.size()) - 1.0) / sxx);
    };
    double unused = 0.0;
    through_origin(4, fit.kappa2, fit.kappa2_se, fit.r2_quartic);
    through_origin(2, fit.quadratic_coef, unused, fit.r2_quadratic);
    double acc = 0.0;
    for (std::size_t i = 0; i < intercepts.size(); ++i) acc += intercepts[i];
    fit.log_kappa1 = acc / static_cast<double>(intercepts.size());
    if (!(fit.kappa2 > 0.0)) throw NumericalError("calibrated kappa2 is not positive");
    return fit;
}

std::vector<std::vector<double>> scheme_second_moment(const InitialData& u0, double nu,
                                                      double lambda, double k_sigma,
                                                      int n_interior, double dt,
                                                      const std::vector<long>& steps) {
    if (n_interior < 1 || !(dt > 0.0)) throw DomainError("invalid scheme grid");
    long last = 0;
    for (long s : steps) {
        if (s < 0 || s < last) throw DomainError("steps must be nonnegative and sorted");
        last = s;
    }
    const int n = n_interior;
    const double dx = 1.0 / (n + 1);
    const GridSpec grid{n, dt, std::max(1, static_cast<int>(last)) * dt};
    const auto u = project_initial(u0, grid);
    const double r = nu * dt / (dx * dx);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (int j = 0; j < n; ++j) {
        a(j, j) = 1.0 + 2.0 * r;
        if (j > 0) a(j, j - 1) = -r;
        if (j + 1 < n) a(j, j + 1) = -r;
    }
    const Eigen::MatrixXd ainv = a.inverse();
    Eigen::Map<const Eigen::VectorXd> u_vec(u.data(), n);
    Eigen::MatrixXd c = u_vec * u_vec.transpose();
    const double noise = lambda * lambda * k_sigma * k_sigma * dt / dx;
    std::vector<std::vector<double>> out;
    long k = 0;
    for (long s : steps) {
        for (; k < s; ++k) {
            c.diagonal() *= 1.0 + noise;
            c = (ainv * c * ainv.transpose()).eval();
        }
        const Eigen::VectorXd d = c.diagonal();
        out.emplace_back(d.data(), d.data() + n);
    }
    return out;
}

} // namespace sheat
