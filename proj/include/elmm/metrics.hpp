#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "core.hpp"
#include "hapke.hpp"

namespace elmm::metrics {

/// Angle in radians between two spectra, in [0, pi].
///
/// Evaluated as 2 atan2(|u^ - v^|, |u^ + v^|) on the unit vectors rather than
/// acos of the normalized dot product, so parallel spectra give exactly 0
/// instead of the ~1e-8 floor acos has near 1.
inline double spectral_angle(std::span<const double> u, std::span<const double> v)
{
    if (u.size() != v.size()) throw InputError("spectral angle needs spectra of equal length");
    double nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    nu = std::sqrt(nu);
    nv = std::sqrt(nv);
    if (!(nu > 0.0) || !(nv > 0.0)) throw InputError("spectral angle is undefined for a zero spectrum");
    double diff = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double a = u[i] / nu;
        const double b = v[i] / nv;
        diff += (a - b) * (a - b);
        sum += (a + b) * (a + b);
    }
    return 2.0 * std::atan2(std::sqrt(diff), std::sqrt(sum));
}

inline double rmse(std::span<const double> u, std::span<const double> v)
{
    if (u.size() != v.size()) throw InputError("RMSE needs spectra of equal length");
    if (u.empty()) throw InputError("RMSE of empty spectra");
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += (u[i] - v[i]) * (u[i] - v[i]);
    return std::sqrt(s / static_cast<double>(u.size()));
}

struct CurvePoint {
    double omega;
    double reflectance;
};

/// Samples a reflectance model against albedo at fixed (mu, mu0).
inline std::vector<CurvePoint> albedo_curve(double mu, double mu0, hapke::Model model,
                                            std::span<const double> omega_grid,
                                            const PhotometricParams& params = PhotometricParams::lambertian())
{
    std::vector<CurvePoint> out;
    out.reserve(omega_grid.size());
    for (double w : omega_grid) {
        if (!(w >= 0.0 && w <= 1.0)) throw InputError("albedo grid values must lie in [0, 1]");
        double r = 0.0;
        switch (model) {
        case hapke::Model::lambertian: r = hapke::lambertian_reflectance(w, mu, mu0); break;
        case hapke::Model::relative: r = hapke::relative_reflectance(w, mu, mu0); break;
        case hapke::Model::linear: r = hapke::linear_reflectance(w, mu, mu0); break;
        case hapke::Model::full: {
            // Cosines map back to the principal-plane geometry with phi = 0.
            Geometry g(elmm::detail::rad_to_deg(std::acos(mu0)), elmm::detail::rad_to_deg(std::acos(mu)), 0.0);
            r = hapke::full_reflectance(w, g, params);
            break;
        }
        }
        out.push_back({w, r});
    }
    return out;
}

enum class ModelPair {
    relative_vs_linear, // the internally consistent pair (same normalization)
    as_captioned,       // absolute Lambertian vs linear
};

inline std::string_view to_string(ModelPair p)
{
    return p == ModelPair::relative_vs_linear ? "relative-linear" : "as-captioned";
}

inline ModelPair parse_model_pair(std::string_view s)
{
    if (s == "relative-linear") return ModelPair::relative_vs_linear;
    if (s == "as-captioned" || s == "lambertian-linear") return ModelPair::as_captioned;
    throw InputError("unknown model pair '" + std::string(s) + "' (expected relative-linear or as-captioned)");
}

struct SweepGrid {
    std::vector<double> theta0_values;
    std::vector<double> theta_values;
    ModelPair pair = ModelPair::relative_vs_linear;

    // 0..90 degrees in integer steps on both axes.
    static SweepGrid standard()
    {
        SweepGrid g;
        for (int d = 0; d <= 90; ++d) {
            g.theta0_values.push_back(d);
            g.theta_values.push_back(d);
        }
        return g;
    }

    void validate() const
    {
        if (theta0_values.empty() || theta_values.empty()) throw InputError("sweep angle lists must be non-empty");
        for (double a : theta0_values)
            if (!(a >= 0.0 && a <= 90.0)) throw InputError("sweep theta0 values must lie in [0, 90]");
        for (double a : theta_values)
            if (!(a >= 0.0 && a <= 90.0)) throw InputError("sweep theta values must lie in [0, 90]");
    }
};

struct SweepCell {
    double theta0;
    double theta;
    double sam;   // radians; NaN when skipped
    double rmse;  // NaN when skipped
    bool valid;
};

/// Compares the pair's reference and approximation spectra at every
/// (theta0, theta) cell, theta0-major. Cells outside the reference model's
/// domain are flagged invalid instead of aborting the sweep.
inline std::vector<SweepCell> angle_sweep(const AlbedoSpectrum& albedo, const SweepGrid& grid)
{
    grid.validate();
    const auto nan = std::numeric_limits<double>::quiet_NaN();
    const auto reference_model =
        grid.pair == ModelPair::relative_vs_linear ? hapke::Model::relative : hapke::Model::lambertian;
    const auto lambert = PhotometricParams::lambertian();

    std::vector<SweepCell> cells;
    cells.reserve(grid.theta0_values.size() * grid.theta_values.size());
    for (double t0 : grid.theta0_values) {
        for (double t : grid.theta_values) {
            const Geometry geom(t0, t, 0.0);
            std::vector<double> ref;
            try {
                ref = hapke::endmember_variant(albedo, geom, lambert, reference_model);
            } catch (const DomainError&) {
                cells.push_back({t0, t, nan, nan, false});
                continue;
            }
            const auto approx = hapke::endmember_variant(albedo, geom, lambert, hapke::Model::linear);
            cells.push_back({t0, t, spectral_angle(ref, approx), rmse(ref, approx), true});
        }
    }
    return cells;
}

struct SweepSummary {
    double mean_sam = 0.0;
    double mean_rmse = 0.0;
    std::size_t valid_cells = 0;
};

inline SweepSummary summarize(const std::vector<SweepCell>& cells)
{
    SweepSummary s;
    for (const auto& c : cells) {
        if (!c.valid) continue;
        s.mean_sam += c.sam;
        s.mean_rmse += c.rmse;
        ++s.valid_cells;
    }
    if (s.valid_cells > 0) {
        s.mean_sam /= static_cast<double>(s.valid_cells);
        s.mean_rmse /= static_cast<double>(s.valid_cells);
    }
    return s;
}

} // namespace elmm::metrics
