#pragma once

#include <span>
#include <string>
#include <vector>

namespace sheat {

enum class Boundary { Dirichlet, Neumann, Free };

const char* to_string(Boundary b);
Boundary boundary_from_string(const std::string& s);

/// Heat kernel of the generator nu * d^2/dx^2 on [0, 1] (or the real line).
///
/// All decay rates are derived from `nu`: the first Dirichlet mode decays
/// like exp(-nu pi^2 t), so the second moment of a sine mode decays like
/// exp(-2 nu pi^2 t). nu = 1/2 corresponds to the generator (1/2) Laplacian.
struct KernelSpec {
    Boundary boundary = Boundary::Dirichlet;
    double nu = 0.5;
    double tol = 1e-12;

    void validate() const;
};

/// Eigenfunction series longer than this switch to the method of images.
inline constexpr int kSeriesTermCap = 64;

struct Truncation {
    int n_terms = 1;            // series terms needed for the tail to drop below tol
    bool use_images = false;    // n_terms exceeded kSeriesTermCap
    double image_threshold = 0; // t below which the image method is selected
    double tail_bound = 0;      // certified bound on the discarded tail at n_terms
};

/// Series truncation from the tail bound
///   2 sum_{n>N} e^{-a n^2} <= 2 e^{-a (N+1)^2} / (1 - e^{-a (2N+3)}),  a = nu pi^2 t.
Truncation truncation_terms(const KernelSpec& spec, double t);

/// Kernel value together with how it was obtained.
struct KernelEval {
    double value = 0;
    double error_bound = 0; // certified truncation bound (round-off excluded)
    int n_terms = 0;        // series terms, or image pairs when `images` is set
    bool images = false;
};

KernelEval eval_kernel_detailed(const KernelSpec& spec, double t, double x, double y);

/// g(t, x, y) for the boundary condition in `spec`. Throws DomainError for t <= 0
/// or positions outside [0, 1] (Free accepts any real positions).
double eval_kernel(const KernelSpec& spec, double t, double x, double y);

/// Forced eigenfunction-series route with an explicit term count.
double eval_series(const KernelSpec& spec, double t, double x, double y, int n_terms);

/// Forced method-of-images route, truncated to the tolerance in `spec`.
double eval_images(const KernelSpec& spec, double t, double x, double y);

/// log g(t, x, y), finite where g itself underflows (small t, distant x, y).
/// Returns -inf where the kernel vanishes (Dirichlet boundary).
double log_eval_kernel(const KernelSpec& spec, double t, double x, double y);

/// (4 pi nu t)^{-1/2} exp(-z^2 / (4 nu t)).
double free_kernel(double nu, double t, double z);

struct UpperBounds {
    double free_bound = 0;     // free kernel at (t, x, y)
    double longtime_bound = 0; // K3(t) e^{-nu pi^2 t}
    double k3 = 0;             // constant used for longtime_bound
};

/// K3 = 2 / (1 - e^{-3 nu pi^2}); g_D(t) <= K3 e^{-nu pi^2 t} for t >= 1.
double dirichlet_k3(double nu);

/// Dirichlet upper bounds. For t < 1 the long-time constant is replaced by
/// the t-dependent 2 / (1 - e^{-3 nu pi^2 t}), which still dominates g_D.
UpperBounds kernel_upper_bounds(const KernelSpec& spec, double t, double x, double y);

struct LowerBoundSpec {
    double gamma = 0.2;
    double kappa1 = 1.0;
    double kappa2 = 1.0;

    void validate() const;
};

/// kappa1 e^{-nu pi^2 t} e^{-kappa2 (x-y)^2 / t} (t^{-1/2} 1{t <= gamma^2} + 1{t > gamma^2}).
///
/// The bound jumps at t = gamma^2 by the factor 1/gamma (left value is the
/// t^{-1/2} branch, right limit drops that factor).
double kernel_lower_bound(const LowerBoundSpec& lb, const KernelSpec& spec, double t, double x,
                          double y);

struct LowerBoundCalibration {
    double kappa1 = 0;
    double kappa2 = 0;
    double min_ratio = 0; // min over the grid of g_D / bound at the returned pair
    std::size_t nodes = 0;
};

/// Grid search for (kappa1, kappa2). For each kappa2 on a geometric ladder the
/// largest admissible kappa1 is the grid minimum of g_D / shape; the pair
/// maximizing the bound at the least favorable point (t = gamma^2,
/// |x - y| = 1 - 2 gamma) is returned.
LowerBoundCalibration calibrate_lower_bound(const KernelSpec& spec, double gamma,
                                            std::span<const double> ts,
                                            std::span<const double> xs);

/// d/dx g(t, x, y) by term-wise differentiation of the eigen series, or by the
/// differentiated images when the series would be too long.
double kernel_dx(const KernelSpec& spec, double t, double x, double y);

struct DxBoundReport {
    double k1 = 0;
    double k2 = 0;
    double max_abs_dx = 0;
    bool finite = true;
    std::size_t nodes = 0;
};

/// Fits |d_x g_D| <= K1 t^{-1} exp(-K2 (x-y)^2 / t) on the grid ts x xs x xs.
/// K2 is the largest fraction of 1/(4 nu) whose K1 stays within twice the
/// K2 = 0 value.
DxBoundReport kernel_dx_bound_check(const KernelSpec& spec, std::span<const double> ts,
                                    std::span<const double> xs);

/// |int_0^1 g(s,x,y) g(t,y,z) dy - g(s+t,x,z)| with a composite Gauss–Legendre
/// rule of `panels` 16-point panels.
double semigroup_residual(const KernelSpec& spec, double s, double t, double x, double z,
                          int panels);

/// |int_0^1 g(s,y0,y)^2 dy - g(2s,y0,y0)|.
double squared_kernel_residual(const KernelSpec& spec, double s, double y0, int panels);

/// Gaussian-product reduction of int_R g(s,x,y) g(t,y,z) dy against g(s+t,x,z).
double free_convolution_residual(double nu, double s, double t, double x, double z);

/// int_0^1 g(t, x, y) dy.
double kernel_mass(const KernelSpec& spec, double t, double x, int panels);

} // namespace sheat
