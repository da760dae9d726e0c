// Command-line front end: forward, simulate, unmix, sweep, curve, verify.
//
// Exit codes: 0 success, 1 input/validation error, 2 model-domain error.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include <elmm/elmm.hpp>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace elmm;

namespace {

struct ValidationFailed {
    std::vector<std::string> violations;
};

class Manifest {
public:
    explicit Manifest(std::string command) : start_(std::chrono::steady_clock::now())
    {
        j_["command"] = std::move(command);
        j_["version"] = std::string(elmm::version);
        j_["inputs"] = json::array();
        j_["outputs"] = json::array();
        j_["seed"] = nullptr;
    }

    void input(const fs::path& p) { j_["inputs"].push_back(p.string()); }
    void output(const fs::path& p) { j_["outputs"].push_back(p.string()); }
    void config(json c) { j_["config"] = std::move(c); }
    void seed(std::uint64_t s) { j_["seed"] = s; }

    void write(const fs::path& path)
    {
        const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        j_["wall_clock_seconds"] = elapsed;
        io::write_json(path, j_);
    }

private:
    json j_;
    std::chrono::steady_clock::time_point start_;
};

fs::path manifest_next_to(const fs::path& file) { return fs::path(file.string() + ".manifest.json"); }

void ensure_dir(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InputError("cannot create directory " + dir.string() + ": " + ec.message());
}

void ensure_parent(const fs::path& file)
{
    if (file.has_parent_path()) ensure_dir(file.parent_path());
}

std::vector<PhotometricParams> load_photometry(const std::string& path, const std::vector<std::string>& materials)
{
    if (path.empty()) return std::vector<PhotometricParams>(materials.size(), PhotometricParams::lambertian());
    return io::photometry_for(io::read_json(path), materials);
}

// ---------------------------------------------------------------- forward

struct ForwardArgs {
    std::string albedo, photometry, config, out;
    std::optional<std::string> model;
    std::optional<double> theta0, theta, phi;
    std::optional<std::uint64_t> seed;
};

int run_forward(const ForwardArgs& args)
{
    Manifest manifest("forward");
    json cfg = args.config.empty() ? json::object() : io::read_json(args.config);
    std::string model_name = cfg.value("model", std::string("relative"));
    double t0 = cfg.value("theta0", 0.0), t = cfg.value("theta", 0.0), phi = cfg.value("phi", 0.0);
    if (args.model) model_name = *args.model;
    if (args.theta0) t0 = *args.theta0;
    if (args.theta) t = *args.theta;
    if (args.phi) phi = *args.phi;
    const auto model = hapke::parse_model(model_name);
    const Geometry geom(t0, t, phi);

    const auto table = io::read_spectra_csv(args.albedo);
    const auto albedos = io::to_albedos(table);
    const auto photometry = load_photometry(args.photometry, table.names);

    Matrix out(table.values.rows(), table.values.cols());
    for (std::size_t p = 0; p < albedos.size(); ++p) {
        const auto r = hapke::endmember_variant(albedos[p], geom, photometry[p], model);
        for (std::size_t l = 0; l < r.size(); ++l) out(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(p)) = r[l];
    }

    const fs::path out_path = args.out;
    ensure_parent(out_path);
    io::write_spectra_csv(out_path, table.axis, table.names, out);

    manifest.input(args.albedo);
    if (!args.photometry.empty()) manifest.input(args.photometry);
    if (!args.config.empty()) manifest.input(args.config);
    manifest.output(out_path);
    if (args.seed) manifest.seed(*args.seed);
    manifest.config({{"model", model_name}, {"geometry", io::to_json(geom)}, {"phase_angle", geom.phase_angle()}});
    manifest.write(manifest_next_to(out_path));
    return 0;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    std::string config, albedo, photometry, out;
    std::optional<std::string> model;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
};

int run_simulate(const SimulateArgs& args)
{
    Manifest manifest("simulate");
    json raw = io::read_json(args.config);
    auto cfg = config::scene_from_json(raw);
    if (args.model) cfg.model = hapke::parse_model(*args.model);
    if (args.seed) cfg.seed = *args.seed;
    if (args.threads) cfg.threads = *args.threads;

    const auto table = io::read_spectra_csv(args.albedo);
    const auto albedos = io::to_albedos(table);
    if (!raw.contains("P")) cfg.P = albedos.size();
    const auto photometry = load_photometry(args.photometry, table.names);

    const auto cube = scene::simulate_cube(albedos, photometry, cfg);
    const auto S0 = scene::reference_endmembers(albedos, photometry, cfg.model, cfg.reference_geometry);

    const fs::path dir = args.out;
    ensure_dir(dir);
    io::write_spectra_csv(dir / "endmembers.csv", table.axis, S0.materials, S0.S);
    json meta;
    meta["model"] = std::string(hapke::to_string(cfg.model));
    meta["reference_geometry"] = io::to_json(cfg.reference_geometry);
    meta["snr_db"] = cfg.snr_db ? json(*cfg.snr_db) : json(nullptr);
    meta["noiseless"] = !cfg.snr_db.has_value();
    meta["seed"] = cfg.seed;
    meta["endmembers"] = "endmembers.csv";
    io::write_cube(dir / "cube.json", cube, meta);

    manifest.input(args.config);
    manifest.input(args.albedo);
    if (!args.photometry.empty()) manifest.input(args.photometry);
    for (const char* f : {"cube.json", "cube.bin", "cube_abundances.bin", "endmembers.csv"}) manifest.output(dir / f);
    if (cube.ground_truth && cube.ground_truth->scaling) manifest.output(dir / "cube_scaling.bin");
    manifest.seed(cfg.seed);
    auto echo = config::to_json(cfg);
    echo.erase("threads");
    manifest.config(echo);
    manifest.write(dir / "manifest.json");
    return 0;
}

// ---------------------------------------------------------------- unmix

struct UnmixArgs {
    std::string cube, endmembers, config, out;
    std::optional<std::string> model;
    std::optional<double> psi_min, psi_max;
    std::optional<unsigned> threads;
    std::optional<std::uint64_t> seed;
};

json stats(std::vector<double> v)
{
    if (v.empty()) return nullptr;
    std::sort(v.begin(), v.end());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    return {{"mean", mean}, {"median", v[v.size() / 2]}, {"max", v.back()}, {"min", v.front()}};
}

int run_unmix(const UnmixArgs& args)
{
    Manifest manifest("unmix");
    auto cfg = args.config.empty() ? solver::SolverConfig{} : config::solver_from_json(io::read_json(args.config));
    if (args.model) cfg.model = solver::parse_model(*args.model);
    if (args.psi_min) cfg.psi_min = *args.psi_min;
    if (args.psi_max) cfg.psi_max = *args.psi_max;
    if (args.threads) cfg.threads = *args.threads;
    cfg.validate();

    const fs::path cube_path = args.cube;
    const auto file = io::read_cube(cube_path);
    const auto& cube = file.cube;
    if (auto v = validate_cube(cube); !v.empty()) throw ValidationFailed{std::move(v)};

    fs::path em_path = args.endmembers;
    if (em_path.empty()) {
        if (!file.metadata.contains("endmembers"))
            throw InputError("no endmember file given and the cube sidecar does not name one");
        em_path = cube_path.parent_path() / file.metadata.at("endmembers").get<std::string>();
    }
    const auto table = io::read_spectra_csv(em_path);
    if (!(table.axis == cube.axis)) throw InputError("endmember wavelengths do not match the cube's axis");
    const auto endmembers = io::to_endmembers(table);

    const auto res = solver::unmix(cube.X, endmembers, cfg);

    const fs::path dir = args.out;
    ensure_dir(dir);
    io::write_matrix(dir / "abundances.bin", res.A);
    io::write_matrix(dir / "scaling.bin", res.Psi);

    json summary;
    summary["config"] = config::to_json(cfg);
    summary["config"].erase("threads");
    summary["materials"] = endmembers.materials;
    summary["P"] = res.A.rows();
    summary["N"] = res.A.cols();
    summary["abundances"] = "abundances.bin";
    summary["scaling"] = "scaling.bin";
    summary["residual_rmse"] = stats(res.residual_rmse);
    std::vector<double> iters(res.iterations.begin(), res.iterations.end());
    summary["iterations"] = stats(iters);
    summary["iterations"]["total"] = res.total_iterations();
    summary["converged_pixels"] = std::count(res.converged.begin(), res.converged.end(), 1);
    summary["degenerate_pixels"] = std::count(res.degenerate.begin(), res.degenerate.end(), 1);

    // Image-level objective per iteration; pixels that stopped early carry their final value.
    std::size_t longest = 0;
    bool monotone = true;
    for (const auto& tr : res.objective_trace) {
        longest = std::max(longest, tr.size());
        for (std::size_t k = 1; k < tr.size(); ++k)
            if (tr[k] > tr[k - 1] + 1e-12) monotone = false;
    }
    std::vector<double> trace(longest, 0.0);
    for (const auto& tr : res.objective_trace)
        for (std::size_t k = 0; k < longest; ++k) trace[k] += tr.empty() ? 0.0 : tr[std::min(k, tr.size() - 1)];
    summary["objective_trace"] = trace;
    summary["objective_monotone"] = monotone;

    if (cube.ground_truth) {
        const auto& gt = *cube.ground_truth;
        if (gt.abundances.rows() == res.A.rows()) {
            summary["abundance_rmse"] =
                std::sqrt((gt.abundances - res.A).squaredNorm() / static_cast<double>(res.A.size()));
            if (gt.scaling) {
                double s = 0.0;
                long count = 0;
                for (Eigen::Index n = 0; n < res.A.cols(); ++n)
                    for (Eigen::Index p = 0; p < res.A.rows(); ++p)
                        if (gt.abundances(p, n) > 0.0 && res.A(p, n) > 0.0) {
                            const double d = (*gt.scaling)(p, n) - res.Psi(p, n);
                            s += d * d;
                            ++count;
                        }
                summary["scaling_rmse"] = count > 0 ? json(std::sqrt(s / static_cast<double>(count))) : json(nullptr);
            }
        }
    }
    io::write_json(dir / "summary.json", summary);

    manifest.input(cube_path);
    manifest.input(em_path);
    if (!args.config.empty()) manifest.input(args.config);
    for (const char* f : {"abundances.bin", "scaling.bin", "summary.json"}) manifest.output(dir / f);
    if (args.seed) manifest.seed(*args.seed);
    manifest.config(summary["config"]);
    manifest.write(dir / "manifest.json");
    return 0;
}

// ---------------------------------------------------------------- sweep

struct SweepArgs {
    std::string albedo, config, out;
    std::optional<std::string> pair;
    std::optional<std::uint64_t> seed;
};

int run_sweep(const SweepArgs& args)
{
    Manifest manifest("sweep");
    auto grid = args.config.empty() ? metrics::SweepGrid::standard() : config::sweep_from_json(io::read_json(args.config));
    if (args.pair) grid.pair = metrics::parse_model_pair(*args.pair);

    const auto table = io::read_spectra_csv(args.albedo);
    const auto albedos = io::to_albedos(table);
    const fs::path dir = args.out;
    ensure_dir(dir);

    json per_material = json::array();
    for (const auto& albedo : albedos) {
        const auto cells = metrics::angle_sweep(albedo, grid);
        const fs::path csv = dir / ("sweep_" + albedo.material() + ".csv");
        std::ofstream out(csv);
        if (!out) throw InputError("cannot write " + csv.string());
        out << "theta0,theta,sam_rad,rmse\n";
        for (const auto& c : cells)
            out << io::format_real(c.theta0) << ',' << io::format_real(c.theta) << ','
                << (c.valid ? io::format_real(c.sam) : "nan") << ',' << (c.valid ? io::format_real(c.rmse) : "nan")
                << '\n';
        const auto s = metrics::summarize(cells);
        per_material.push_back({{"material", albedo.material()},
                                {"csv", csv.filename().string()},
                                {"mean_albedo", albedo.mean()},
                                {"mean_sam_rad", s.mean_sam},
                                {"mean_rmse", s.mean_rmse},
                                {"valid_cells", s.valid_cells},
                                {"skipped_cells", cells.size() - s.valid_cells}});
        manifest.output(csv);
    }

    manifest.input(args.albedo);
    if (!args.config.empty()) manifest.input(args.config);
    if (args.seed) manifest.seed(*args.seed);
    json echo = config::to_json(grid);
    echo["albedo_source"] = args.albedo;
    echo["reference_model"] = grid.pair == metrics::ModelPair::relative_vs_linear ? "relative" : "lambertian";
    echo["approximation_model"] = "linear";
    echo["materials"] = per_material;
    manifest.config(echo);
    manifest.write(dir / "manifest.json");
    return 0;
}

// ---------------------------------------------------------------- curve

struct CurveArgs {
    std::string out, photometry;
    std::string model = "relative";
    double theta0 = 0.0, theta = 0.0;
    double step = 0.01;
};

int run_curve(const CurveArgs& args)
{
    Manifest manifest("curve");
    if (!(args.step > 0.0 && args.step <= 1.0)) throw InputError("--step must lie in (0, 1]");
    const auto model = hapke::parse_model(args.model);
    const Geometry geom(args.theta0, args.theta, 0.0);
    auto params = PhotometricParams::lambertian();
    if (!args.photometry.empty()) {
        const auto j = io::read_json(args.photometry);
        if (!j.contains("b")) throw InputError("curve needs a single photometry record {b, c, B0, h}");
        params = io::photometry_from_json(j);
    }
    std::vector<double> grid;
    const auto count = static_cast<long>(std::floor(1.0 / args.step + 1e-9));
    for (long i = 0; i <= count; ++i) grid.push_back(std::min(1.0, static_cast<double>(i) * args.step));
    if (grid.back() < 1.0) grid.push_back(1.0);
    const auto pts = metrics::albedo_curve(geom.mu(), geom.mu0(), model, grid, params);

    const fs::path out_path = args.out;
    ensure_parent(out_path);
    std::ofstream out(out_path);
    if (!out) throw InputError("cannot write " + out_path.string());
    out << "omega,reflectance\n";
    for (const auto& p : pts) out << io::format_real(p.omega) << ',' << io::format_real(p.reflectance) << '\n';
    out.close();

    manifest.output(out_path);
    manifest.config({{"model", args.model}, {"geometry", io::to_json(geom)}, {"step", args.step}});
    manifest.write(manifest_next_to(out_path));
    return 0;
}

// ---------------------------------------------------------------- verify

int run_verify(const std::string& cube_arg)
{
    const fs::path cube_path = cube_arg;
    const auto file = io::read_cube(cube_path);
    auto violations = validate_cube(file.cube);

    const auto& meta = file.metadata;
    const auto& cube = file.cube;
    const bool conservation_applies = meta.value("model", std::string()) == "linear" && meta.value("noiseless", false) &&
                                      meta.contains("endmembers") && cube.ground_truth && cube.ground_truth->scaling;
    if (conservation_applies && violations.empty()) {
        const auto table = io::read_spectra_csv(cube_path.parent_path() / meta.at("endmembers").get<std::string>());
        const auto& gt = *cube.ground_truth;
        if (table.values.cols() != gt.abundances.rows() || table.values.rows() != cube.bands()) {
            violations.push_back("reference endmembers do not match the cube's shape");
        } else {
            const Matrix model = solver::reconstruct(table.values, gt.abundances, *gt.scaling);
            const double dev = (cube.X - model).cwiseAbs().maxCoeff();
            std::cout << "conservation: max |X - S0 (Psi .* A)| = " << io::format_real(dev) << '\n';
            if (dev > 1e-12) violations.push_back("conservation check failed: deviation " + io::format_real(dev));
        }
    } else if (!conservation_applies) {
        std::cout << "conservation: not applicable\n";
    }

    std::cout << "bands=" << cube.bands() << " pixels=" << cube.pixels() << '\n';
    if (!violations.empty()) throw ValidationFailed{std::move(violations)};
    std::cout << "OK\n";
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Hapke reflectance models, ELMM scene simulation and unmixing"};
    app.set_version_flag("--version", std::string(elmm::version));
    app.require_subcommand(1);

    auto add_seed = [](CLI::App* cmd, std::optional<std::uint64_t>& seed) {
        cmd->add_option("--seed", seed, "Random seed (recorded in the manifest)");
    };

    ForwardArgs fwd;
    auto* forward = app.add_subcommand("forward", "Evaluate a reflectance model on albedo spectra");
    forward->add_option("--albedo", fwd.albedo, "Albedo spectra CSV")->required();
    forward->add_option("--photometry", fwd.photometry, "Photometry JSON (default: Lambertian)");
    forward->add_option("--config", fwd.config, "JSON with model/theta0/theta/phi; flags win");
    forward->add_option("--model", fwd.model, "full | lambertian | relative | linear");
    forward->add_option("--theta0", fwd.theta0, "Incidence angle, degrees");
    forward->add_option("--theta", fwd.theta, "Emergence angle, degrees");
    forward->add_option("--phi", fwd.phi, "Azimuth, degrees");
    forward->add_option("--out", fwd.out, "Output reflectance CSV")->required();
    add_seed(forward, fwd.seed);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic hyperspectral cube");
    simulate->add_option("--config", sim.config, "Scene config JSON")->required();
    simulate->add_option("--albedo", sim.albedo, "Albedo spectra CSV")->required();
    simulate->add_option("--photometry", sim.photometry, "Photometry JSON (default: Lambertian)");
    simulate->add_option("--model", sim.model, "Override the config's reflectance model");
    simulate->add_option("--threads", sim.threads, "Worker threads");
    simulate->add_option("--out", sim.out, "Output directory")->required();
    add_seed(simulate, sim.seed);

    UnmixArgs um;
    auto* unmix = app.add_subcommand("unmix", "Estimate abundances and scaling factors");
    unmix->add_option("--cube", um.cube, "Cube sidecar JSON")->required();
    unmix->add_option("--endmembers", um.endmembers, "Reference endmember CSV (default: named in the sidecar)");
    unmix->add_option("--config", um.config, "Solver config JSON");
    unmix->add_option("--model", um.model, "lmm | elmm-global | elmm-full");
    unmix->add_option("--psi-min", um.psi_min, "Lower scaling bound");
    unmix->add_option("--psi-max", um.psi_max, "Upper scaling bound");
    unmix->add_option("--threads", um.threads, "Worker threads");
    unmix->add_option("--out", um.out, "Output directory")->required();
    add_seed(unmix, um.seed);

    SweepArgs sw;
    auto* sweep = app.add_subcommand("sweep", "SAM/RMSE between two reflectance models over an angle grid");
    sweep->add_option("--albedo", sw.albedo, "Albedo spectra CSV")->required();
    sweep->add_option("--config", sw.config, "Sweep config JSON (default: 91x91 integer degrees)");
    sweep->add_option("--pair", sw.pair, "relative-linear | as-captioned");
    sweep->add_option("--out", sw.out, "Output directory")->required();
    add_seed(sweep, sw.seed);

    CurveArgs cv;
    auto* curve = app.add_subcommand("curve", "Reflectance as a function of albedo at fixed geometry");
    curve->add_option("--model", cv.model, "full | lambertian | relative | linear");
    curve->add_option("--theta0", cv.theta0, "Incidence angle, degrees");
    curve->add_option("--theta", cv.theta, "Emergence angle, degrees");
    curve->add_option("--step", cv.step, "Albedo grid step");
    curve->add_option("--photometry", cv.photometry, "Single photometry record for the full model");
    curve->add_option("--out", cv.out, "Output CSV")->required();

    std::string verify_cube;
    auto* verify = app.add_subcommand("verify", "Check a cube's invariants and ground-truth conservation");
    verify->add_option("--cube", verify_cube, "Cube sidecar JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*forward) return run_forward(fwd);
        if (*simulate) return run_simulate(sim);
        if (*unmix) return run_unmix(um);
        if (*sweep) return run_sweep(sw);
        if (*curve) return run_curve(cv);
        if (*verify) return run_verify(verify_cube);
    } catch (const ValidationFailed& v) {
        for (const auto& s : v.violations) std::cerr << "violation: " << s << '\n';
        return 1;
    } catch (const DomainError& e) {
        std::cerr << "model-domain error: " << e.what() << '\n';
        return 2;
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return 1;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
