#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "core.hpp"

// Closed-form bidirectional reflectance models for a smooth surface
// (no shadowing, unmodified incidence/emergence angles), from the full
// Hapke expression down to its first-order expansion in the albedo.
namespace elmm::hapke {

enum class Model { full, lambertian, relative, linear };

inline std::string_view to_string(Model m)
{
    switch (m) {
    case Model::full: return "full";
    case Model::lambertian: return "lambertian";
    case Model::relative: return "relative";
    case Model::linear: return "linear";
    }
    return "?";
}

inline Model parse_model(std::string_view name)
{
    if (name == "full") return Model::full;
    if (name == "lambertian") return Model::lambertian;
    if (name == "relative") return Model::relative;
    if (name == "linear") return Model::linear;
    throw InputError("unknown reflectance model '" + std::string(name) +
                     "' (expected full, lambertian, relative or linear)");
}

namespace detail {

inline void require_albedo(double omega)
{
    if (!(omega >= 0.0 && omega <= 1.0)) throw InputError("albedo must lie in [0, 1]");
}

inline void require_cosine(double mu, const char* name)
{
    if (!(mu >= 0.0 && mu <= 1.0)) throw InputError(std::string(name) + " must lie in [0, 1]");
}

// 4 mu mu0 + 2 mu + 2 mu0 + 1, the first-order coefficient denominator.
inline double linear_denominator(double mu, double mu0) { return 4.0 * mu * mu0 + 2.0 * mu + 2.0 * mu0 + 1.0; }

} // namespace detail

/// Two-lobe Henyey-Greenstein phase function P(g), g in degrees.
inline double phase_function(double g_deg, const PhotometricParams& params)
{
    const double b = params.b();
    const double c = params.c();
    const double cos_g = elmm::detail::cos_deg(g_deg);
    if (b == 1.0 && (cos_g == 1.0 || cos_g == -1.0))
        throw DomainError("phase function is singular for b = 1 at g = 0 or 180 degrees");
    const double one_minus_b2 = (1.0 - b) * (1.0 - b);
    const double back = 1.0 - 2.0 * b * cos_g + b * b;
    const double fwd = 1.0 + 2.0 * b * cos_g + b * b;
    return c * one_minus_b2 / std::pow(back, 1.5) + (1.0 - c) * one_minus_b2 / std::pow(fwd, 1.5);
}

/// Opposition surge B(g) = B0 / (1 + tan(g/2) / h), g in degrees, 0 <= g < 180.
inline double opposition_effect(double g_deg, const PhotometricParams& params)
{
    if (!(g_deg >= 0.0 && g_deg < 180.0))
        throw DomainError("opposition effect requires 0 <= g < 180 degrees (tan(g/2) diverges at 180)");
    if (params.B0() == 0.0) return 0.0;
    return params.B0() / (1.0 + std::tan(elmm::detail::deg_to_rad(g_deg) / 2.0) / params.h());
}

/// Isotropic multiple-scattering approximation H(omega, mu).
inline double multiple_scattering(double omega, double mu)
{
    detail::require_albedo(omega);
    detail::require_cosine(mu, "mu");
    return (1.0 + 2.0 * mu) / (1.0 + 2.0 * mu * std::sqrt(1.0 - omega));
}

/// Full bidirectional reflectance of a smooth surface.
inline double full_reflectance(double omega, const Geometry& geom, const PhotometricParams& params)
{
    detail::require_albedo(omega);
    const double mu = geom.mu();
    const double mu0 = geom.mu0();
    if (!(mu + mu0 > 0.0))
        throw DomainError("full model requires mu + mu0 > 0 (incidence and emergence both at 90 degrees)");
    const double g = geom.phase_angle();
    const double B = opposition_effect(g, params);
    const double P = phase_function(g, params);
    const double HH = multiple_scattering(omega, mu) * multiple_scattering(omega, mu0);
    return omega / (4.0 * (mu + mu0)) * ((1.0 + B) * P + HH - 1.0);
}

/// Reflectance under Lambertian photometry (P = 1, no opposition surge).
inline double lambertian_reflectance(double omega, double mu, double mu0)
{
    detail::require_albedo(omega);
    detail::require_cosine(mu, "mu");
    detail::require_cosine(mu0, "mu0");
    if (!(mu + mu0 > 0.0))
        throw DomainError("Lambertian model requires mu + mu0 > 0 (incidence and emergence both at 90 degrees)");
    const double s = std::sqrt(1.0 - omega);
    return (1.0 + 2.0 * mu) * (1.0 + 2.0 * mu0) * omega /
           (4.0 * (mu + mu0) * (1.0 + 2.0 * mu * s) * (1.0 + 2.0 * mu0 * s));
}

/// Lambertian reflectance normalized by its value at omega = 1. Defined at grazing geometry.
inline double relative_reflectance(double omega, double mu, double mu0)
{
    detail::require_albedo(omega);
    detail::require_cosine(mu, "mu");
    detail::require_cosine(mu0, "mu0");
    const double s = std::sqrt(1.0 - omega);
    return omega / ((1.0 + 2.0 * mu * s) * (1.0 + 2.0 * mu0 * s));
}

/// First-order expansion of relative_reflectance around omega = 0.
inline double linear_reflectance(double omega, double mu, double mu0)
{
    detail::require_albedo(omega);
    detail::require_cosine(mu, "mu");
    detail::require_cosine(mu0, "mu0");
    return omega / detail::linear_denominator(mu, mu0);
}

/// Ratio by which a linear-model endmember observed under `reference`
/// is rescaled when observed under `local`:
///   linear_reflectance(w, local) == scaling_factor(local, reference) * linear_reflectance(w, reference)
/// for every albedo w. Always > 0, and 1 when the geometries coincide.
inline double scaling_factor(const Geometry& local, const Geometry& reference)
{
    return detail::linear_denominator(reference.mu(), reference.mu0()) /
           detail::linear_denominator(local.mu(), local.mu0());
}

inline double reflectance(Model model, double omega, const Geometry& geom, const PhotometricParams& params)
{
    switch (model) {
    case Model::full: return full_reflectance(omega, geom, params);
    case Model::lambertian: return lambertian_reflectance(omega, geom.mu(), geom.mu0());
    case Model::relative: return relative_reflectance(omega, geom.mu(), geom.mu0());
    case Model::linear: return linear_reflectance(omega, geom.mu(), geom.mu0());
    }
    throw InputError("unknown reflectance model");
}

/// Reflectance spectrum of one material under one geometry, band by band.
inline std::vector<double> endmember_variant(const AlbedoSpectrum& albedo, const Geometry& geom,
                                             const PhotometricParams& params, Model model)
{
    std::vector<double> out;
    out.reserve(albedo.size());
    for (double w : albedo.omega()) out.push_back(reflectance(model, w, geom, params));
    return out;
}

} // namespace elmm::hapke
