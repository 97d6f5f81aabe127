#include "perfquant/io.hpp"

#include <nlohmann/json.hpp>

#include <cstring>
#include <fstream>
#include <sstream>

namespace perfquant {

namespace {

void put_u16(std::ostream& os, std::uint16_t v) {
    const unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                                static_cast<unsigned char>(v >> 8)};
    os.write(reinterpret_cast<const char*>(b), 2);
}

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f32(std::ostream& os, float v) {
    static_assert(sizeof(float) == 4);
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(os, bits);
}

std::uint16_t get_u16(std::istream& is) {
    unsigned char b[2];
    is.read(reinterpret_cast<char*>(b), 2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

float get_f32(std::istream& is) {
    const std::uint32_t bits = get_u32(is);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void write_series(const std::filesystem::path& path, const ImageSeries& series) {
    series.validate();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ValidationError("cannot open for writing: " + path.string());
    os.write("PQIS", 4);
    put_u16(os, kSeriesVersion);
    put_u32(os, static_cast<std::uint32_t>(series.nt()));
    put_u32(os, static_cast<std::uint32_t>(series.ny()));
    put_u32(os, static_cast<std::uint32_t>(series.nx()));
    put_f32(os, static_cast<float>(series.spacing_y));
    put_f32(os, static_cast<float>(series.spacing_x));
    for (const auto& f : series.frames)
        for (Eigen::Index y = 0; y < f.rows(); ++y)
            for (Eigen::Index x = 0; x < f.cols(); ++x)
                put_f32(os, static_cast<float>(f(y, x)));
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

namespace {

ImageSeries read_series_impl(const std::filesystem::path& path, bool allow_single) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ValidationError("cannot open: " + path.string());
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "PQIS", 4) != 0)
        throw ValidationError(path.string() + ": bad magic at offset 0 (expected PQIS)");
    const std::uint16_t version = get_u16(is);
    if (version != kSeriesVersion)
        throw ValidationError(path.string() + ": unsupported version " +
                              std::to_string(version) + " at offset 4");
    const std::uint32_t nt = get_u32(is), ny = get_u32(is), nx = get_u32(is);
    const float sy = get_f32(is), sx = get_f32(is);
    if (!is) throw ValidationError(path.string() + ": truncated header");
    if (nt < 1 || ny < 1 || nx < 1)
        throw ValidationError(path.string() + ": degenerate dimensions at offset 6");

    const std::uintmax_t expected =
        26 + 4ull * nt * ny * nx;  // 4 magic + 2 version + 12 dims + 8 spacing
    std::error_code ec;
    const std::uintmax_t actual = std::filesystem::file_size(path, ec);
    if (!ec && actual != expected)
        throw ValidationError(path.string() + ": file length " + std::to_string(actual) +
                              " != expected " + std::to_string(expected));

    ImageSeries s;
    s.spacing_y = sy;
    s.spacing_x = sx;
    s.frames.resize(nt);
    for (std::uint32_t t = 0; t < nt; ++t) {
        Eigen::MatrixXd f(ny, nx);
        for (std::uint32_t y = 0; y < ny; ++y)
            for (std::uint32_t x = 0; x < nx; ++x) f(y, x) = get_f32(is);
        s.frames[t] = std::move(f);
    }
    if (!is) throw ValidationError(path.string() + ": truncated pixel data");
    if (!allow_single) s.validate();
    return s;
}

}  // namespace

ImageSeries read_series(const std::filesystem::path& path) {
    return read_series_impl(path, /*allow_single=*/false);
}

void write_map(const std::filesystem::path& path, const Eigen::MatrixXd& map,
               double spacing_y, double spacing_x) {
    // a map is a single-frame file; the nt >= 2 series invariant does not apply
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ValidationError("cannot open for writing: " + path.string());
    os.write("PQIS", 4);
    put_u16(os, kSeriesVersion);
    put_u32(os, 1);
    put_u32(os, static_cast<std::uint32_t>(map.rows()));
    put_u32(os, static_cast<std::uint32_t>(map.cols()));
    put_f32(os, static_cast<float>(spacing_y));
    put_f32(os, static_cast<float>(spacing_x));
    for (Eigen::Index y = 0; y < map.rows(); ++y)
        for (Eigen::Index x = 0; x < map.cols(); ++x)
            put_f32(os, static_cast<float>(map(y, x)));
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

Eigen::MatrixXd read_map(const std::filesystem::path& path) {
    ImageSeries s = read_series_impl(path, /*allow_single=*/true);
    if (s.nt() != 1) throw ValidationError(path.string() + ": expected a single-frame map");
    return s.frames[0];
}

void write_curve_csv(const std::filesystem::path& path, const SampledCurve& curve) {
    curve.validate();
    std::ofstream os(path);
    if (!os) throw ValidationError("cannot open for writing: " + path.string());
    os << "time_s,value\n";
    for (std::size_t i = 0; i < curve.size(); ++i)
        os << fmt(curve.times[i]) << ',' << fmt(curve.values[i]) << '\n';
}

SampledCurve read_curve_csv(const std::filesystem::path& path, CurveKind kind) {
    std::ifstream is(path);
    if (!is) throw ValidationError("cannot open: " + path.string());
    std::string line;
    if (!std::getline(is, line) || line.rfind("time_s,value", 0) != 0)
        throw ValidationError(path.string() + ": expected header time_s,value");
    SampledCurve c;
    c.kind = kind;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw ValidationError(path.string() + ": malformed row '" + line + "'");
        c.times.push_back(std::stod(line.substr(0, comma)));
        c.values.push_back(std::stod(line.substr(comma + 1)));
    }
    c.validate();
    return c;
}

void write_motion_csv(const std::filesystem::path& path, const MotionEstimate& motion) {
    std::ofstream os(path);
    if (!os) throw ValidationError("cannot open for writing: " + path.string());
    os << "frame,dy_px,dx_px\n";
    for (std::size_t t = 0; t < motion.dy.size(); ++t)
        os << t << ',' << fmt(motion.dy[t]) << ',' << fmt(motion.dx[t]) << '\n';
}

MotionEstimate read_motion_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ValidationError("cannot open: " + path.string());
    std::string line;
    if (!std::getline(is, line) || line.rfind("frame,dy_px,dx_px", 0) != 0)
        throw ValidationError(path.string() + ": expected header frame,dy_px,dx_px");
    MotionEstimate m;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        std::getline(ss, cell, ',');
        m.dy.push_back(std::stod(cell));
        std::getline(ss, cell, ',');
        m.dx.push_back(std::stod(cell));
    }
    return m;
}

void write_pgm(const std::filesystem::path& path, const Eigen::MatrixXd& map, double wmin,
               double wmax) {
    if (!(wmax > wmin)) throw ValidationError("pgm: wmax must be > wmin");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ValidationError("cannot open for writing: " + path.string());
    os << "P5\n" << map.cols() << ' ' << map.rows() << "\n255\n";
    for (Eigen::Index y = 0; y < map.rows(); ++y)
        for (Eigen::Index x = 0; x < map.cols(); ++x) {
            double u = (map(y, x) - wmin) / (wmax - wmin);
            u = std::min(1.0, std::max(0.0, u));
            const unsigned char b = static_cast<unsigned char>(u * 255.0 + 0.5);
            os.write(reinterpret_cast<const char*>(&b), 1);
        }
}

nlohmann::json to_json(const KineticParams& p) {
    return {{"Fp_ml_min_ml", p.Fp},
            {"vp", p.vp},
            {"ve", p.ve},
            {"PS_ml_min_ml", p.PS},
            {"delay_s", p.delay}};
}

KineticParams kinetic_params_from_json(const nlohmann::json& j) {
    KineticParams p;
    p.Fp = j.at("Fp_ml_min_ml").get<double>();
    p.vp = j.at("vp").get<double>();
    p.ve = j.at("ve").get<double>();
    p.PS = j.at("PS_ml_min_ml").get<double>();
    p.delay = j.value("delay_s", 0.0);
    p.validate();
    return p;
}

nlohmann::json to_json(const SequenceParams& s) {
    return {{"TR_s", s.TR},         {"TSAT_s", s.TSAT}, {"alpha_deg", s.alpha_deg},
            {"n", s.n},             {"r1_L_per_mmol_s", s.r1}, {"T10_s", s.T10}};
}

SequenceParams sequence_params_from_json(const nlohmann::json& j) {
    SequenceParams s;
    s.TR = j.value("TR_s", s.TR);
    s.TSAT = j.value("TSAT_s", s.TSAT);
    s.alpha_deg = j.value("alpha_deg", s.alpha_deg);
    s.n = j.value("n", s.n);
    s.r1 = j.value("r1_L_per_mmol_s", s.r1);
    s.T10 = j.value("T10_s", s.T10);
    s.validate();
    return s;
}

SliceLevel slice_level_from_string(const std::string& s) {
    if (s == "basal") return SliceLevel::basal;
    if (s == "mid") return SliceLevel::mid;
    if (s == "apical") return SliceLevel::apical;
    throw ValidationError("unknown slice level: " + s);
}

std::string to_string(SliceLevel level) {
    switch (level) {
        case SliceLevel::basal: return "basal";
        case SliceLevel::mid: return "mid";
        case SliceLevel::apical: return "apical";
    }
    return "?";
}

void write_rv_points(const std::filesystem::path& path, const RvPointsFile& f) {
    nlohmann::json j{
        {"anterior", {f.rv_points[0].y, f.rv_points[0].x}},
        {"inferior", {f.rv_points[1].y, f.rv_points[1].x}},
        {"centroid", {f.centroid.y, f.centroid.x}},
        {"slice_level", to_string(f.slice_level)},
    };
    write_json_file(path, j);
}

RvPointsFile read_rv_points(const std::filesystem::path& path) {
    const nlohmann::json j = read_json_file(path);
    RvPointsFile f;
    f.rv_points[0] = {j.at("anterior").at(0).get<double>(), j.at("anterior").at(1).get<double>()};
    f.rv_points[1] = {j.at("inferior").at(0).get<double>(), j.at("inferior").at(1).get<double>()};
    f.centroid = {j.at("centroid").at(0).get<double>(), j.at("centroid").at(1).get<double>()};
    f.slice_level = slice_level_from_string(j.value("slice_level", "basal"));
    return f;
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream os(path);
    if (!os) throw ValidationError("cannot open for writing: " + path.string());
    os << j.dump(2) << '\n';
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ValidationError("cannot open: " + path.string());
    try {
        return nlohmann::json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

}  // namespace perfquant
