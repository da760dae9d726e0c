#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "core.hpp"
#include "hapke.hpp"
#include "solver.hpp"

namespace elmm::scene {

struct AbundanceSampler {
    enum class Kind { uniform_simplex, dirichlet };
    Kind kind = Kind::uniform_simplex;
    double alpha = 1.0; // Dirichlet concentration; < 1 favours sparse mixtures
};

struct AngleRange {
    double lo = 0.0;
    double hi = 0.0;
};

struct GeometrySampler {
    enum class Kind { fixed, uniform };
    Kind kind = Kind::fixed;
    Geometry fixed_geometry{};
    AngleRange theta0{0.0, 0.0};
    AngleRange theta{0.0, 0.0};
    AngleRange phi{0.0, 0.0};
};

struct SceneConfig {
    std::size_t P = 1;
    std::size_t N = 1;
    AbundanceSampler abundance_sampler{};
    GeometrySampler geometry_sampler{};
    hapke::Model model = hapke::Model::linear;
    // Geometry under which the reference endmembers S0 are observed.
    Geometry reference_geometry{};
    std::optional<double> snr_db;
    std::uint64_t seed = 0;
    unsigned threads = 1;

    void validate() const
    {
        if (P < 1) throw InputError("scene needs at least one material (P >= 1)");
        if (N < 1) throw InputError("scene needs at least one pixel (N >= 1)");
        if (snr_db && !(*snr_db > 0.0)) throw InputError("snr_db must be > 0");
        if (abundance_sampler.kind == AbundanceSampler::Kind::dirichlet && !(abundance_sampler.alpha > 0.0))
            throw InputError("Dirichlet concentration must be > 0");
        if (geometry_sampler.kind == GeometrySampler::Kind::uniform) {
            auto check = [](const AngleRange& r, double max, const char* name) {
                if (!(r.lo >= 0.0 && r.lo <= r.hi && r.hi <= max))
                    throw InputError(std::string("geometry range for ") + name + " must satisfy 0 <= lo <= hi <= " +
                                     std::to_string(static_cast<int>(max)));
            };
            check(geometry_sampler.theta0, 90.0, "theta0");
            check(geometry_sampler.theta, 90.0, "theta");
            check(geometry_sampler.phi, 180.0, "phi");
        }
    }
};

// Independent random stream per (seed, purpose, pixel), so pixels can be
// simulated in any order or in parallel with identical results.
enum class Stream : std::uint64_t { abundance = 1, geometry = 2, noise = 3 };

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::mt19937_64 pixel_stream(std::uint64_t seed, Stream stream, std::uint64_t pixel)
{
    const std::uint64_t key =
        splitmix64(splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(stream)) ^ pixel);
    std::seed_seq seq{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)};
    return std::mt19937_64(seq);
}

/// One abundance column; exponential spacings for the uniform case,
/// normalized Gamma draws for the Dirichlet case.
inline Vector sample_abundance_column(const SceneConfig& cfg, std::uint64_t pixel)
{
    const auto P = static_cast<Eigen::Index>(cfg.P);
    if (P == 1) return Vector::Ones(1);
    auto rng = pixel_stream(cfg.seed, Stream::abundance, pixel);
    Vector a(P);
    for (;;) {
        if (cfg.abundance_sampler.kind == AbundanceSampler::Kind::uniform_simplex) {
            std::exponential_distribution<double> expo(1.0);
            for (Eigen::Index p = 0; p < P; ++p) a(p) = expo(rng);
        } else {
            std::gamma_distribution<double> gamma(cfg.abundance_sampler.alpha, 1.0);
            for (Eigen::Index p = 0; p < P; ++p) a(p) = gamma(rng);
        }
        const double s = a.sum();
        if (s > 0.0 && std::isfinite(s)) {
            a /= s;
            // Push the rounding residue of the normalization into the largest entry.
            Eigen::Index imax = 0;
            a.maxCoeff(&imax);
            a(imax) += 1.0 - a.sum();
            return a;
        }
    }
}

/// P x N abundance matrix; columns are non-negative and sum to one.
inline Matrix sample_abundances(const SceneConfig& cfg)
{
    cfg.validate();
    Matrix A(cfg.P, cfg.N);
    for (std::size_t n = 0; n < cfg.N; ++n) A.col(static_cast<Eigen::Index>(n)) = sample_abundance_column(cfg, n);
    return A;
}

inline Geometry sample_geometry(const SceneConfig& cfg, std::uint64_t pixel)
{
    const auto& gs = cfg.geometry_sampler;
    if (gs.kind == GeometrySampler::Kind::fixed) return gs.fixed_geometry;
    auto rng = pixel_stream(cfg.seed, Stream::geometry, pixel);
    auto draw = [&rng](const AngleRange& r) {
        if (r.lo == r.hi) return r.lo;
        std::uniform_real_distribution<double> u(r.lo, r.hi);
        return std::min(u(rng), r.hi);
    };
    const double t0 = draw(gs.theta0);
    const double t = draw(gs.theta);
    const double phi = draw(gs.phi);
    return {t0, t, phi};
}

/// Reference endmembers: every material rendered under the reference geometry.
inline EndmemberMatrix reference_endmembers(const std::vector<AlbedoSpectrum>& albedos,
                                            const std::vector<PhotometricParams>& photometry,
                                            hapke::Model model, const Geometry& reference)
{
    if (albedos.empty()) throw InputError("no albedo spectra given");
    if (albedos.size() != photometry.size())
        throw InputError("need one photometry record per albedo spectrum");
    EndmemberMatrix e;
    e.S.resize(static_cast<Eigen::Index>(albedos.front().size()), static_cast<Eigen::Index>(albedos.size()));
    for (std::size_t p = 0; p < albedos.size(); ++p) {
        const auto col = hapke::endmember_variant(albedos[p], reference, photometry[p], model);
        e.S.col(static_cast<Eigen::Index>(p)) = Eigen::Map<const Vector>(col.data(), static_cast<Eigen::Index>(col.size()));
        e.materials.push_back(albedos[p].material());
    }
    return e;
}

/// Adds white Gaussian noise at the requested SNR (dB), computed from the
/// total signal energy. Infinite SNR leaves the cube untouched.
inline HyperCube inject_noise(HyperCube cube, double snr_db, std::uint64_t seed, unsigned threads = 1)
{
    if (!(snr_db > 0.0)) throw InputError("snr_db must be > 0");
    if (std::isinf(snr_db)) return cube;
    const double energy = cube.X.squaredNorm();
    const double count = static_cast<double>(cube.X.size());
    if (count == 0.0 || energy == 0.0) return cube;
    const double sigma = std::sqrt(energy / count / std::pow(10.0, snr_db / 10.0));
    solver::detail::parallel_for(cube.pixels(), threads, [&](Eigen::Index n) {
        auto rng = pixel_stream(seed, Stream::noise, static_cast<std::uint64_t>(n));
        std::normal_distribution<double> gauss(0.0, sigma);
        for (Eigen::Index l = 0; l < cube.bands(); ++l) cube.X(l, n) += gauss(rng);
    });
    return cube;
}

inline double realized_snr_db(const Matrix& clean, const Matrix& noisy)
{
    return 10.0 * std::log10(clean.squaredNorm() / (noisy - clean).squaredNorm());
}

/// Synthetic cube: one geometry per pixel, per-material reflectance variants
/// under the chosen model, linear mixing, optional noise. Ground-truth
/// scaling factors are recorded only for the linear model, where they are exact.
inline HyperCube simulate_cube(const std::vector<AlbedoSpectrum>& albedos,
                               const std::vector<PhotometricParams>& photometry, SceneConfig cfg)
{
    if (albedos.empty()) throw InputError("no albedo spectra given");
    if (cfg.P != albedos.size())
        throw InputError("scene config has P=" + std::to_string(cfg.P) + " but " + std::to_string(albedos.size()) +
                         " albedo spectra were given");
    if (photometry.size() != albedos.size()) throw InputError("need one photometry record per albedo spectrum");
    cfg.validate();
    const auto& axis = albedos.front().axis();
    for (const auto& a : albedos)
        if (!(a.axis() == axis)) throw InputError("albedo spectra do not share one wavelength axis");

    const auto L = static_cast<Eigen::Index>(axis.size());
    const auto P = static_cast<Eigen::Index>(cfg.P);
    const auto N = static_cast<Eigen::Index>(cfg.N);

    HyperCube cube;
    cube.axis = axis;
    for (const auto& a : albedos) cube.materials.push_back(a.material());
    cube.X.resize(L, N);
    std::vector<Geometry> geoms(cfg.N);
    GroundTruth gt;
    gt.abundances.resize(P, N);
    const bool linear = cfg.model == hapke::Model::linear;
    if (linear) gt.scaling = Matrix(P, N);

    // Domain errors are captured per pixel and rethrown from the calling thread.
    std::vector<std::string> errors(cfg.N);
    solver::detail::parallel_for(N, cfg.threads, [&](Eigen::Index n) {
        try {
            const auto un = static_cast<std::uint64_t>(n);
            const Geometry g = sample_geometry(cfg, un);
            const Vector a = sample_abundance_column(cfg, un);
            Vector x = Vector::Zero(L);
            for (Eigen::Index p = 0; p < P; ++p) {
                const auto s = hapke::endmember_variant(albedos[p], g, photometry[p], cfg.model);
                x += a(p) * Eigen::Map<const Vector>(s.data(), L);
            }
            geoms[n] = g;
            cube.X.col(n) = x;
            gt.abundances.col(n) = a;
            if (linear) gt.scaling->col(n).setConstant(hapke::scaling_factor(g, cfg.reference_geometry));
        } catch (const DomainError& e) {
            errors[n] = "pixel " + std::to_string(n) + ": " + e.what();
        }
    });
    for (const auto& e : errors)
        if (!e.empty()) throw DomainError(e);

    cube.geometries = std::move(geoms);
    cube.ground_truth = std::move(gt);
    if (cfg.snr_db) cube = inject_noise(std::move(cube), *cfg.snr_db, cfg.seed, cfg.threads);
    return cube;
}

} // namespace elmm::scene
