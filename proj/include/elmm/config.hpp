#pragma once

#include <cmath>
#include <limits>
#include <string>

#include <nlohmann/json.hpp>

#include "io.hpp"
#include "metrics.hpp"
#include "scene.hpp"
#include "solver.hpp"

// JSON <-> configuration structs. Unknown keys are rejected so typos in
// experiment recipes fail loudly.
namespace elmm::config {

using json = nlohmann::json;

namespace detail {

inline void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* what)
{
    for (const auto& [k, v] : j.items()) {
        bool ok = false;
        for (const char* name : known)
            if (k == name) ok = true;
        if (!ok) throw InputError(std::string("unknown key '") + k + "' in " + what);
    }
}

inline scene::AngleRange range_from_json(const json& j, const char* name)
{
    if (j.is_number()) return {j.get<double>(), j.get<double>()};
    if (j.is_array() && j.size() == 2) return {j[0].get<double>(), j[1].get<double>()};
    throw InputError(std::string("geometry range '") + name + "' must be a number or [lo, hi]");
}

inline std::vector<double> angle_list_from_json(const json& j, const char* name)
{
    if (j.is_array()) return j.get<std::vector<double>>();
    if (j.is_object()) {
        const double start = j.at("start").get<double>();
        const double stop = j.at("stop").get<double>();
        const double step = j.value("step", 1.0);
        if (!(step > 0.0) || stop < start) throw InputError(std::string("bad angle range for ") + name);
        std::vector<double> out;
        const auto count = static_cast<long>(std::floor((stop - start) / step + 1e-9));
        for (long i = 0; i <= count; ++i) out.push_back(start + static_cast<double>(i) * step);
        return out;
    }
    throw InputError(std::string("angle list '") + name + "' must be an array or {start, stop, step}");
}

} // namespace detail

/// Scene configuration. Keys:
///   P, N, seed, model, snr_db (number or null), threads,
///   abundances: {"kind": "uniform" | "dirichlet", "alpha": ...},
///   geometry:   {"kind": "fixed", "theta0", "theta", "phi"} or
///               {"kind": "uniform", "theta0": [lo,hi], "theta": [lo,hi], "phi": [lo,hi]},
///   reference_geometry: {"theta0", "theta", "phi"}
inline scene::SceneConfig scene_from_json(const json& j)
{
    try {
        detail::reject_unknown(j, {"P", "N", "seed", "model", "snr_db", "threads", "abundances", "geometry",
                                   "reference_geometry"},
                               "scene config");
        scene::SceneConfig c;
        if (j.contains("P")) {
            const auto p = j.at("P").get<long long>();
            if (p < 1) throw InputError("scene needs at least one material (P >= 1)");
            c.P = static_cast<std::size_t>(p);
        }
        const auto n = j.at("N").get<long long>();
        if (n < 1) throw InputError("scene needs at least one pixel (N >= 1)");
        c.N = static_cast<std::size_t>(n);
        c.seed = j.value("seed", std::uint64_t{0});
        c.model = hapke::parse_model(j.value("model", std::string("linear")));
        if (j.contains("snr_db") && !j.at("snr_db").is_null()) c.snr_db = j.at("snr_db").get<double>();
        c.threads = j.value("threads", 1u);
        if (j.contains("abundances")) {
            const auto& a = j.at("abundances");
            detail::reject_unknown(a, {"kind", "alpha"}, "abundance sampler");
            const auto kind = a.value("kind", std::string("uniform"));
            if (kind == "uniform") {
                c.abundance_sampler.kind = scene::AbundanceSampler::Kind::uniform_simplex;
            } else if (kind == "dirichlet") {
                c.abundance_sampler.kind = scene::AbundanceSampler::Kind::dirichlet;
                c.abundance_sampler.alpha = a.at("alpha").get<double>();
            } else {
                throw InputError("unknown abundance sampler '" + kind + "'");
            }
        }
        if (j.contains("geometry")) {
            const auto& g = j.at("geometry");
            detail::reject_unknown(g, {"kind", "theta0", "theta", "phi"}, "geometry sampler");
            const auto kind = g.value("kind", std::string("fixed"));
            if (kind == "fixed") {
                c.geometry_sampler.kind = scene::GeometrySampler::Kind::fixed;
                c.geometry_sampler.fixed_geometry = io::geometry_from_json(g);
            } else if (kind == "uniform") {
                c.geometry_sampler.kind = scene::GeometrySampler::Kind::uniform;
                c.geometry_sampler.theta0 = detail::range_from_json(g.at("theta0"), "theta0");
                c.geometry_sampler.theta = detail::range_from_json(g.at("theta"), "theta");
                c.geometry_sampler.phi = g.contains("phi") ? detail::range_from_json(g.at("phi"), "phi")
                                                           : scene::AngleRange{0.0, 0.0};
            } else {
                throw InputError("unknown geometry sampler '" + kind + "'");
            }
        }
        if (j.contains("reference_geometry")) c.reference_geometry = io::geometry_from_json(j.at("reference_geometry"));
        return c;
    } catch (const json::exception& e) {
        throw InputError(std::string("bad scene config: ") + e.what());
    }
}

inline json to_json(const scene::SceneConfig& c)
{
    json j;
    j["P"] = c.P;
    j["N"] = c.N;
    j["seed"] = c.seed;
    j["model"] = std::string(hapke::to_string(c.model));
    j["snr_db"] = c.snr_db ? json(*c.snr_db) : json(nullptr);
    j["threads"] = c.threads;
    if (c.abundance_sampler.kind == scene::AbundanceSampler::Kind::uniform_simplex)
        j["abundances"] = {{"kind", "uniform"}};
    else
        j["abundances"] = {{"kind", "dirichlet"}, {"alpha", c.abundance_sampler.alpha}};
    const auto& g = c.geometry_sampler;
    if (g.kind == scene::GeometrySampler::Kind::fixed) {
        j["geometry"] = io::to_json(g.fixed_geometry);
        j["geometry"]["kind"] = "fixed";
    } else {
        j["geometry"] = {{"kind", "uniform"},
                         {"theta0", {g.theta0.lo, g.theta0.hi}},
                         {"theta", {g.theta.lo, g.theta.hi}},
                         {"phi", {g.phi.lo, g.phi.hi}}};
    }
    j["reference_geometry"] = io::to_json(c.reference_geometry);
    return j;
}

/// Solver configuration. Keys: model, sum_to_one, max_iters, tol,
/// psi_bounds [min, max], init ("global" | "lmm"), threads.
inline solver::SolverConfig solver_from_json(const json& j)
{
    try {
        detail::reject_unknown(j, {"model", "sum_to_one", "max_iters", "tol", "psi_bounds", "init", "threads"},
                               "solver config");
        solver::SolverConfig c;
        if (j.contains("model")) c.model = solver::parse_model(j.at("model").get<std::string>());
        c.sum_to_one = j.value("sum_to_one", c.sum_to_one);
        c.max_iters = j.value("max_iters", c.max_iters);
        c.tol = j.value("tol", c.tol);
        if (j.contains("psi_bounds")) {
            const auto b = j.at("psi_bounds").get<std::vector<double>>();
            if (b.size() != 2) throw InputError("psi_bounds must be [min, max]");
            c.psi_min = b[0];
            c.psi_max = b[1];
        }
        if (j.contains("init")) {
            const auto s = j.at("init").get<std::string>();
            if (s == "global") c.init = solver::Init::global;
            else if (s == "lmm") c.init = solver::Init::lmm;
            else throw InputError("unknown solver init '" + s + "' (expected global or lmm)");
        }
        c.threads = j.value("threads", c.threads);
        c.validate();
        return c;
    } catch (const json::exception& e) {
        throw InputError(std::string("bad solver config: ") + e.what());
    }
}

inline json to_json(const solver::SolverConfig& c)
{
    return {{"model", std::string(solver::to_string(c.model))},
            {"sum_to_one", c.sum_to_one},
            {"max_iters", c.max_iters},
            {"tol", c.tol},
            {"psi_bounds", {c.psi_min, c.psi_max}},
            {"init", c.init == solver::Init::global ? "global" : "lmm"},
            {"threads", c.threads}};
}

/// Sweep configuration. Keys: theta0, theta (arrays or {start, stop, step}),
/// pair ("relative-linear" | "as-captioned"). Missing axes default to 0..90.
inline metrics::SweepGrid sweep_from_json(const json& j)
{
    try {
        detail::reject_unknown(j, {"theta0", "theta", "pair"}, "sweep config");
        auto g = metrics::SweepGrid::standard();
        if (j.contains("theta0")) g.theta0_values = detail::angle_list_from_json(j.at("theta0"), "theta0");
        if (j.contains("theta")) g.theta_values = detail::angle_list_from_json(j.at("theta"), "theta");
        if (j.contains("pair")) g.pair = metrics::parse_model_pair(j.at("pair").get<std::string>());
        g.validate();
        return g;
    } catch (const json::exception& e) {
        throw InputError(std::string("bad sweep config: ") + e.what());
    }
}

inline json to_json(const metrics::SweepGrid& g)
{
    return {{"theta0", g.theta0_values}, {"theta", g.theta_values}, {"pair", std::string(metrics::to_string(g.pair))}};
}

} // namespace elmm::config
