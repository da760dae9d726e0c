#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace elmm {

// Bad or inconsistent input data (files, configs, arguments).
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A model equation evaluated outside its domain (e.g. a vanishing denominator).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace detail {

inline double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

// cos/sin of an angle in degrees, exact at 0 and 90 so that raking and nadir
// geometries give mu = 0 and mu = 1 without rounding residue.
inline double cos_deg(double deg)
{
    if (deg == 0.0) return 1.0;
    if (deg == 90.0) return 0.0;
    if (deg == 180.0) return -1.0;
    return std::cos(deg_to_rad(deg));
}

inline double sin_deg(double deg)
{
    if (deg == 0.0 || deg == 180.0) return 0.0;
    if (deg == 90.0) return 1.0;
    return std::sin(deg_to_rad(deg));
}

} // namespace detail

class WavelengthAxis {
public:
    WavelengthAxis() = default;

    explicit WavelengthAxis(std::vector<double> values) : values_(std::move(values))
    {
        if (values_.empty())
            throw InputError("wavelength axis must have at least one band");
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!std::isfinite(values_[i]))
                throw InputError("wavelength " + std::to_string(i) + " is not finite");
            if (i > 0 && !(values_[i] > values_[i - 1]))
                throw InputError("wavelength axis is not strictly increasing at band " + std::to_string(i));
        }
    }

    const std::vector<double>& values() const { return values_; }
    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }

    friend bool operator==(const WavelengthAxis&, const WavelengthAxis&) = default;

private:
    std::vector<double> values_;
};

/// Per-band single-scattering albedo of one material. Values are checked to
/// lie in [0, 1] on construction; out-of-range values are rejected, never clamped.
class AlbedoSpectrum {
public:
    AlbedoSpectrum(std::string material, WavelengthAxis axis, std::vector<double> omega)
        : material_(std::move(material)), axis_(std::move(axis)), omega_(std::move(omega))
    {
        if (omega_.size() != axis_.size())
            throw InputError("albedo spectrum '" + material_ + "' has " + std::to_string(omega_.size()) +
                             " values for " + std::to_string(axis_.size()) + " bands");
        for (std::size_t i = 0; i < omega_.size(); ++i) {
            if (!(omega_[i] >= 0.0 && omega_[i] <= 1.0))
                throw InputError("albedo of '" + material_ + "' at band " + std::to_string(i) +
                                 " is outside [0, 1]");
        }
    }

    const std::string& material() const { return material_; }
    const WavelengthAxis& axis() const { return axis_; }
    const std::vector<double>& omega() const { return omega_; }
    std::size_t size() const { return omega_.size(); }

    double mean() const
    {
        double s = 0.0;
        for (double w : omega_) s += w;
        return s / static_cast<double>(omega_.size());
    }

private:
    std::string material_;
    WavelengthAxis axis_;
    std::vector<double> omega_;
};

/// Scattering and opposition-surge parameters of one material.
///   b  : lobe asymmetry, [0, 1]
///   c  : backscatter fraction, [0, 1]
///   B0 : opposition strength, >= 0
///   h  : opposition angular width, > 0
class PhotometricParams {
public:
    PhotometricParams(double b, double c, double B0, double h) : b_(b), c_(c), B0_(B0), h_(h)
    {
        if (!(b >= 0.0 && b <= 1.0)) throw InputError("photometric parameter b must lie in [0, 1]");
        if (!(c >= 0.0 && c <= 1.0)) throw InputError("photometric parameter c must lie in [0, 1]");
        if (!(B0 >= 0.0) || !std::isfinite(B0)) throw InputError("photometric parameter B0 must be >= 0");
        if (!(h > 0.0) || !std::isfinite(h)) throw InputError("photometric parameter h must be > 0");
    }

    // Isotropic scattering without opposition surge.
    static PhotometricParams lambertian() { return {0.0, 0.5, 0.0, 1.0}; }

    double b() const { return b_; }
    double c() const { return c_; }
    double B0() const { return B0_; }
    double h() const { return h_; }

    friend bool operator==(const PhotometricParams&, const PhotometricParams&) = default;

private:
    double b_, c_, B0_, h_;
};

/// Acquisition angles of one pixel, in degrees. The phase angle is derived
/// from the other three with cos g = cos t0 cos t + sin t0 sin t cos phi.
class Geometry {
public:
    Geometry() : Geometry(0.0, 0.0, 0.0) {}

    Geometry(double theta0_deg, double theta_deg, double phi_deg)
        : theta0_(theta0_deg), theta_(theta_deg), phi_(phi_deg)
    {
        if (!(theta0_deg >= 0.0 && theta0_deg <= 90.0))
            throw InputError("incidence angle theta0 must lie in [0, 90] degrees");
        if (!(theta_deg >= 0.0 && theta_deg <= 90.0))
            throw InputError("emergence angle theta must lie in [0, 90] degrees");
        if (!(phi_deg >= 0.0 && phi_deg <= 180.0))
            throw InputError("azimuth phi must lie in [0, 180] degrees");
        mu0_ = detail::cos_deg(theta0_deg);
        mu_ = detail::cos_deg(theta_deg);
        double cos_g = mu0_ * mu_ + detail::sin_deg(theta0_deg) * detail::sin_deg(theta_deg) * detail::cos_deg(phi_deg);
        cos_g = std::clamp(cos_g, -1.0, 1.0);
        g_ = cos_g == 1.0 ? 0.0 : (cos_g == -1.0 ? 180.0 : detail::rad_to_deg(std::acos(cos_g)));
    }

    double theta0() const { return theta0_; }
    double theta() const { return theta_; }
    double phi() const { return phi_; }
    double phase_angle() const { return g_; }
    double mu0() const { return mu0_; }
    double mu() const { return mu_; }

    friend bool operator==(const Geometry& a, const Geometry& b)
    {
        return a.theta0_ == b.theta0_ && a.theta_ == b.theta_ && a.phi_ == b.phi_;
    }

private:
    double theta0_, theta_, phi_;
    double g_ = 0.0;
    double mu0_ = 1.0, mu_ = 1.0;
};

/// L x P reference endmember reflectances with one label per column.
struct EndmemberMatrix {
    Matrix S;
    std::vector<std::string> materials;

    Eigen::Index bands() const { return S.rows(); }
    Eigen::Index count() const { return S.cols(); }
};

inline void check_endmembers(const EndmemberMatrix& e)
{
    if (e.S.cols() == 0 || e.S.rows() == 0) throw InputError("endmember matrix is empty");
    if (!e.materials.empty() && static_cast<Eigen::Index>(e.materials.size()) != e.S.cols())
        throw InputError("endmember label count does not match column count");
    for (Eigen::Index j = 0; j < e.S.cols(); ++j)
        for (Eigen::Index i = 0; i < e.S.rows(); ++i)
            if (!(e.S(i, j) >= 0.0) || !std::isfinite(e.S(i, j)))
                throw InputError("endmember matrix entry (" + std::to_string(i) + ", " + std::to_string(j) +
                                 ") is negative or not finite");
}

// Ground truth recorded by the simulator. Scaling factors exist only when the
// data were generated with the linear model.
struct GroundTruth {
    Matrix abundances;              // P x N
    std::optional<Matrix> scaling;  // P x N
};

struct HyperCube {
    Matrix X;  // L x N, column-major like the on-disk layout
    WavelengthAxis axis;
    std::vector<std::string> materials;
    std::optional<std::vector<Geometry>> geometries;
    std::optional<GroundTruth> ground_truth;

    Eigen::Index bands() const { return X.rows(); }
    Eigen::Index pixels() const { return X.cols(); }
};

struct UnmixResult {
    Matrix A;                          // P x N
    Matrix Psi;                        // P x N
    std::vector<double> residual_rmse; // per pixel
    std::vector<int> iterations;       // per pixel
    std::vector<char> converged;       // per pixel
    std::vector<char> degenerate;      // per pixel
    std::vector<std::vector<double>> objective_trace; // per pixel, squared residual norm

    int total_iterations() const
    {
        int s = 0;
        for (int it : iterations) s += it;
        return s;
    }

    bool all_converged() const
    {
        for (char c : converged)
            if (!c) return false;
        return true;
    }
};

/// Lists every broken invariant of a cube; empty means the cube is well formed.
inline std::vector<std::string> validate_cube(const HyperCube& cube)
{
    std::vector<std::string> out;
    const Eigen::Index L = cube.bands();
    const Eigen::Index N = cube.pixels();

    if (L == 0 || N == 0) out.push_back("cube is empty (L=" + std::to_string(L) + ", N=" + std::to_string(N) + ")");
    if (static_cast<Eigen::Index>(cube.axis.size()) != L)
        out.push_back("wavelength axis has " + std::to_string(cube.axis.size()) + " entries for " +
                      std::to_string(L) + " bands");

    for (Eigen::Index n = 0; n < N; ++n) {
        for (Eigen::Index l = 0; l < L; ++l) {
            double v = cube.X(l, n);
            if (!std::isfinite(v))
                out.push_back("non-finite reflectance at band " + std::to_string(l) + ", pixel " + std::to_string(n));
            else if (v < 0.0)
                out.push_back("negative reflectance at band " + std::to_string(l) + ", pixel " + std::to_string(n));
        }
    }

    if (cube.geometries && static_cast<Eigen::Index>(cube.geometries->size()) != N)
        out.push_back("geometry count " + std::to_string(cube.geometries->size()) + " does not match N=" +
                      std::to_string(N));

    if (cube.ground_truth) {
        const auto& gt = cube.ground_truth.value();
        const Eigen::Index P = gt.abundances.rows();
        if (gt.abundances.cols() != N)
            out.push_back("ground-truth abundances have " + std::to_string(gt.abundances.cols()) +
                          " columns for N=" + std::to_string(N));
        if (!cube.materials.empty() && static_cast<Eigen::Index>(cube.materials.size()) != P)
            out.push_back("ground-truth abundances have " + std::to_string(P) + " rows for " +
                          std::to_string(cube.materials.size()) + " materials");
        for (Eigen::Index n = 0; n < gt.abundances.cols(); ++n) {
            double s = 0.0;
            for (Eigen::Index p = 0; p < P; ++p) {
                if (gt.abundances(p, n) < 0.0)
                    out.push_back("negative ground-truth abundance at material " + std::to_string(p) + ", pixel " +
                                  std::to_string(n));
                s += gt.abundances(p, n);
            }
            if (std::abs(s - 1.0) > 1e-9)
                out.push_back("ground-truth abundances of pixel " + std::to_string(n) + " sum to " + std::to_string(s));
        }
        if (gt.scaling) {
            if (gt.scaling->rows() != P || gt.scaling->cols() != gt.abundances.cols())
                out.push_back("ground-truth scaling matrix shape does not match abundances");
            else if (!(gt.scaling->array() > 0.0).all())
                out.push_back("ground-truth scaling factors must be strictly positive");
        }
    }
    return out;
}

} // namespace elmm
