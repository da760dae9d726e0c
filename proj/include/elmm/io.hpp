#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "core.hpp"

// File formats:
//   spectra     CSV, header `wavelength,<material>...`, one row per band
//   photometry  JSON, {"<material>": {"b":..,"c":..,"B0":..,"h":..}, ...}
//               (a bare {"b":..} object applies to every material)
//   cube        little-endian float64 column-major L x N binary + JSON sidecar
//   matrices    same binary layout, shape recorded by whoever references them
namespace elmm::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

/// Shortest decimal form that parses back to the same double.
inline std::string format_real(double v)
{
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw std::runtime_error("number formatting failed");
    return std::string(buf, end);
}

inline double parse_real(std::string_view s, const std::string& where)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
        throw InputError("cannot parse number '" + std::string(s) + "' in " + where);
    return v;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::string trim(std::string_view s)
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return std::string(s);
}

/// Wavelength axis plus one named column per material.
struct SpectraTable {
    WavelengthAxis axis;
    std::vector<std::string> names;
    Matrix values; // L x P

    std::vector<double> column(Eigen::Index p) const
    {
        return {values.col(p).data(), values.col(p).data() + values.rows()};
    }
};

inline SpectraTable parse_spectra_csv(std::istream& in, const std::string& source = "spectra CSV")
{
    std::string line;
    if (!std::getline(in, line)) throw InputError(source + " is empty");
    auto header = split_csv_line(line);
    if (header.size() < 2 || trim(header[0]) != "wavelength")
        throw InputError(source + ": header must read 'wavelength,<material>...'");
    SpectraTable t;
    for (std::size_t i = 1; i < header.size(); ++i) {
        auto name = trim(header[i]);
        if (name.empty()) throw InputError(source + ": empty material name in header");
        t.names.push_back(std::move(name));
    }
    std::vector<double> wl;
    std::vector<std::vector<double>> cols(t.names.size());
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw InputError(source + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                             " fields, expected " + std::to_string(header.size()));
        const std::string where = source + " row " + std::to_string(row);
        wl.push_back(parse_real(cells[0], where));
        for (std::size_t j = 1; j < cells.size(); ++j) cols[j - 1].push_back(parse_real(cells[j], where));
    }
    t.axis = WavelengthAxis(std::move(wl));
    t.values.resize(static_cast<Eigen::Index>(t.axis.size()), static_cast<Eigen::Index>(t.names.size()));
    for (std::size_t j = 0; j < cols.size(); ++j)
        for (std::size_t i = 0; i < cols[j].size(); ++i)
            t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cols[j][i];
    return t;
}

inline SpectraTable read_spectra_csv(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw InputError("cannot open spectra file " + path.string());
    return parse_spectra_csv(in, path.string());
}

inline void write_spectra_csv(std::ostream& out, const WavelengthAxis& axis, const std::vector<std::string>& names,
                              const Matrix& values)
{
    if (values.rows() != static_cast<Eigen::Index>(axis.size()) ||
        values.cols() != static_cast<Eigen::Index>(names.size()))
        throw InputError("spectra table shape does not match axis/labels");
    out << "wavelength";
    for (const auto& n : names) out << ',' << n;
    out << '\n';
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        out << format_real(axis[static_cast<std::size_t>(i)]);
        for (Eigen::Index j = 0; j < values.cols(); ++j) out << ',' << format_real(values(i, j));
        out << '\n';
    }
}

inline void write_spectra_csv(const fs::path& path, const WavelengthAxis& axis, const std::vector<std::string>& names,
                              const Matrix& values)
{
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    write_spectra_csv(out, axis, names, values);
}

inline std::vector<AlbedoSpectrum> to_albedos(const SpectraTable& t)
{
    std::vector<AlbedoSpectrum> out;
    for (Eigen::Index p = 0; p < t.values.cols(); ++p)
        out.emplace_back(t.names[static_cast<std::size_t>(p)], t.axis, t.column(p));
    return out;
}

inline EndmemberMatrix to_endmembers(const SpectraTable& t)
{
    EndmemberMatrix e{t.values, t.names};
    check_endmembers(e);
    return e;
}

inline PhotometricParams photometry_from_json(const json& j)
{
    try {
        return {j.at("b").get<double>(), j.at("c").get<double>(), j.at("B0").get<double>(), j.at("h").get<double>()};
    } catch (const json::exception& e) {
        throw InputError(std::string("bad photometry record: ") + e.what());
    }
}

inline json to_json(const PhotometricParams& p)
{
    return {{"b", p.b()}, {"c", p.c()}, {"B0", p.B0()}, {"h", p.h()}};
}

inline json read_json(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

inline void write_json(const fs::path& path, const json& j)
{
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

/// Photometry records in the order of `materials`.
inline std::vector<PhotometricParams> photometry_for(const json& j, const std::vector<std::string>& materials)
{
    if (!j.is_object()) throw InputError("photometry JSON must be an object");
    if (j.contains("b")) return std::vector<PhotometricParams>(materials.size(), photometry_from_json(j));
    std::vector<PhotometricParams> out;
    for (const auto& m : materials) {
        if (!j.contains(m)) throw InputError("photometry JSON has no entry for material '" + m + "'");
        out.push_back(photometry_from_json(j.at(m)));
    }
    return out;
}

inline void write_matrix(const fs::path& path, const Matrix& m)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    const auto n = static_cast<std::size_t>(m.size());
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(n * sizeof(double)));
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            auto bits = std::bit_cast<std::uint64_t>(m.data()[i]);
            bits = __builtin_bswap64(bits);
            out.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
        }
    }
    if (!out) throw InputError("failed writing " + path.string());
}

inline Matrix read_matrix(const fs::path& path, Eigen::Index rows, Eigen::Index cols)
{
    std::error_code ec;
    const auto size = fs::file_size(path, ec);
    if (ec) throw InputError("cannot stat " + path.string());
    const auto expected = static_cast<std::uintmax_t>(rows * cols) * sizeof(double);
    if (size != expected)
        throw InputError(path.string() + " holds " + std::to_string(size) + " bytes, expected " +
                         std::to_string(expected) + " for a " + std::to_string(rows) + "x" + std::to_string(cols) +
                         " float64 matrix");
    Matrix m(rows, cols);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(expected));
    if (!in) throw InputError("short read on " + path.string());
    if constexpr (std::endian::native != std::endian::little) {
        for (Eigen::Index i = 0; i < m.size(); ++i)
            m.data()[i] = std::bit_cast<double>(__builtin_bswap64(std::bit_cast<std::uint64_t>(m.data()[i])));
    }
    return m;
}

inline json to_json(const Geometry& g) { return {{"theta0", g.theta0()}, {"theta", g.theta()}, {"phi", g.phi()}}; }

inline Geometry geometry_from_json(const json& j)
{
    try {
        return {j.at("theta0").get<double>(), j.at("theta").get<double>(), j.value("phi", 0.0)};
    } catch (const json::exception& e) {
        throw InputError(std::string("bad geometry record: ") + e.what());
    }
}

/// Cube plus any extra sidecar metadata (simulation settings etc.).
struct CubeFile {
    HyperCube cube;
    json metadata = json::object();
};

/// Writes `<stem>.bin` (and ground-truth matrices) next to the sidecar at `sidecar`.
inline void write_cube(const fs::path& sidecar, const HyperCube& cube, const json& metadata = json::object())
{
    const auto dir = sidecar.parent_path();
    if (!dir.empty()) fs::create_directories(dir);
    const auto stem = sidecar.stem().string();
    const std::string data_name = stem + ".bin";
    write_matrix(dir / data_name, cube.X);

    json j;
    j["format"] = "elmm-cube";
    j["version"] = 1;
    j["bands"] = cube.bands();
    j["pixels"] = cube.pixels();
    j["dtype"] = "float64";
    j["byte_order"] = "little";
    j["layout"] = "column-major";
    j["data"] = data_name;
    j["wavelengths"] = cube.axis.values();
    j["materials"] = cube.materials;
    if (cube.geometries) {
        json g = json::array();
        for (const auto& geo : *cube.geometries) g.push_back(to_json(geo));
        j["geometries"] = std::move(g);
    } else {
        j["geometries"] = nullptr;
    }
    if (cube.ground_truth) {
        const auto& gt = *cube.ground_truth;
        json t;
        t["materials"] = gt.abundances.rows();
        t["abundances"] = stem + "_abundances.bin";
        write_matrix(dir / (stem + "_abundances.bin"), gt.abundances);
        if (gt.scaling) {
            t["scaling"] = stem + "_scaling.bin";
            write_matrix(dir / (stem + "_scaling.bin"), *gt.scaling);
        } else {
            t["scaling"] = nullptr;
        }
        j["ground_truth"] = std::move(t);
    } else {
        j["ground_truth"] = nullptr;
    }
    for (const auto& [k, v] : metadata.items()) j["metadata"][k] = v;
    write_json(sidecar, j);
}

inline CubeFile read_cube(const fs::path& sidecar)
{
    const json j = read_json(sidecar);
    const auto dir = sidecar.parent_path();
    CubeFile f;
    try {
        if (j.value("format", "") != "elmm-cube") throw InputError(sidecar.string() + " is not an elmm-cube sidecar");
        if (j.value("dtype", "float64") != "float64" || j.value("byte_order", "little") != "little" ||
            j.value("layout", "column-major") != "column-major")
            throw InputError(sidecar.string() + ": only little-endian column-major float64 cubes are supported");
        const auto L = j.at("bands").get<Eigen::Index>();
        const auto N = j.at("pixels").get<Eigen::Index>();
        if (L < 1 || N < 1) throw InputError(sidecar.string() + ": bands and pixels must be >= 1");
        auto& cube = f.cube;
        cube.axis = WavelengthAxis(j.at("wavelengths").get<std::vector<double>>());
        cube.X = read_matrix(dir / j.at("data").get<std::string>(), L, N);
        if (j.contains("materials")) cube.materials = j.at("materials").get<std::vector<std::string>>();
        if (j.contains("geometries") && !j.at("geometries").is_null()) {
            std::vector<Geometry> g;
            for (const auto& rec : j.at("geometries")) g.push_back(geometry_from_json(rec));
            cube.geometries = std::move(g);
        }
        if (j.contains("ground_truth") && !j.at("ground_truth").is_null()) {
            const auto& t = j.at("ground_truth");
            const auto P = t.at("materials").get<Eigen::Index>();
            GroundTruth gt;
            gt.abundances = read_matrix(dir / t.at("abundances").get<std::string>(), P, N);
            if (t.contains("scaling") && !t.at("scaling").is_null())
                gt.scaling = read_matrix(dir / t.at("scaling").get<std::string>(), P, N);
            cube.ground_truth = std::move(gt);
        }
        if (j.contains("metadata")) f.metadata = j.at("metadata");
    } catch (const json::exception& e) {
        throw InputError(sidecar.string() + ": " + e.what());
    }
    return f;
}

} // namespace elmm::io
