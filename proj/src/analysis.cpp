#include "perfquant/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

namespace perfquant {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;
}

BoundingBox bounding_box_temporal_variance(const ImageSeries& series,
                                           double threshold_quantile, int margin,
                                           int min_area) {
    series.validate();
    if (series.nt() < 10)
        throw ValidationError("bounding box: needs at least 10 frames");
    if (!(threshold_quantile > 0.0 && threshold_quantile < 1.0))
        throw ValidationError("bounding box: quantile must be in (0,1)");

    const int ny = series.ny(), nx = series.nx(), nt = series.nt();
    Eigen::MatrixXd sd(ny, nx);
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x) {
            double s = 0, s2 = 0;
            for (int t = 0; t < nt; ++t) {
                const double v = series.frames[static_cast<std::size_t>(t)](y, x);
                s += v;
                s2 += v * v;
            }
            const double m = s / nt;
            sd(y, x) = std::sqrt(std::max(0.0, s2 / nt - m * m));
        }

    std::vector<double> flat(sd.data(), sd.data() + sd.size());
    std::sort(flat.begin(), flat.end());
    const double thr =
        flat[static_cast<std::size_t>(threshold_quantile * (flat.size() - 1))];

    // 4-connected components of sd > thr
    Eigen::MatrixXi label = Eigen::MatrixXi::Zero(ny, nx);
    struct Comp { int area, y0, x0, y1, x1; };
    std::vector<Comp> comps;
    const int dy[] = {-1, 1, 0, 0}, dx[] = {0, 0, -1, 1};
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x) {
            if (sd(y, x) <= thr || label(y, x) != 0) continue;
            const int id = static_cast<int>(comps.size()) + 1;
            Comp c{0, y, x, y, x};
            std::queue<std::pair<int, int>> q;
            q.emplace(y, x);
            label(y, x) = id;
            while (!q.empty()) {
                auto [cy, cx] = q.front();
                q.pop();
                ++c.area;
                c.y0 = std::min(c.y0, cy);
                c.x0 = std::min(c.x0, cx);
                c.y1 = std::max(c.y1, cy);
                c.x1 = std::max(c.x1, cx);
                for (int k = 0; k < 4; ++k) {
                    const int yy = cy + dy[k], xx = cx + dx[k];
                    if (yy >= 0 && yy < ny && xx >= 0 && xx < nx && label(yy, xx) == 0 &&
                        sd(yy, xx) > thr) {
                        label(yy, xx) = id;
                        q.emplace(yy, xx);
                    }
                }
            }
            comps.push_back(c);
        }

    std::vector<Comp> large;
    for (const auto& c : comps)
        if (c.area >= min_area) large.push_back(c);
    if (large.size() != 2)
        throw ValidationError("bounding box: expected 2 large components, found " +
                              std::to_string(large.size()));

    BoundingBox box;
    box.y0 = std::max(0, std::min(large[0].y0, large[1].y0) - margin);
    box.x0 = std::max(0, std::min(large[0].x0, large[1].x0) - margin);
    box.y1 = std::min(ny, std::max(large[0].y1, large[1].y1) + margin + 1);
    box.x1 = std::min(nx, std::max(large[0].x1, large[1].x1) + margin + 1);
    return box;
}

namespace {

// counterclockwise angle of (y, x) about the centroid, y axis flipped so the
// convention matches the usual mathematical orientation
double ccw_angle(const PixelPoint& centroid, double y, double x) {
    return std::atan2(centroid.y - y, x - centroid.x);
}

double wrap_angle(double a) {
    while (a < 0.0) a += kTwoPi;
    while (a >= kTwoPi) a -= kTwoPi;
    return a;
}

}  // namespace

Eigen::MatrixXi assign_segments(const Eigen::MatrixXd& mask,
                                const std::array<PixelPoint, 2>& rv_points,
                                SliceLevel slice_level, const PixelPoint& centroid) {
    const int ny = static_cast<int>(mask.rows());
    const int nx = static_cast<int>(mask.cols());
    if ((mask.array() != 0.0).count() == 0)
        throw ValidationError("assign_segments: empty mask");
    if (std::abs(rv_points[0].y - rv_points[1].y) < 1e-9 &&
        std::abs(rv_points[0].x - rv_points[1].x) < 1e-9)
        throw ValidationError("assign_segments: coincident RV insertion points");

    const int n_sectors = slice_level == SliceLevel::apical ? 4 : 6;
    const int base_id = slice_level == SliceLevel::basal ? 1
                        : slice_level == SliceLevel::mid ? 7
                                                         : 13;
    const double origin = ccw_angle(centroid, rv_points[0].y, rv_points[0].x);
    // apical sectors are rotated by half a sector
    const double rotation = slice_level == SliceLevel::apical ? kPi / 4.0 : 0.0;
    const double sector_width = kTwoPi / n_sectors;

    // radial extent of the mask per angular bin, for the endo/epi split; bins
    // wide enough that every bin sees the inner and outer boundary pixels
    double r_mask_max = 0.0;
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x)
            if (mask(y, x) != 0.0)
                r_mask_max = std::max(r_mask_max, std::hypot(centroid.y - y, x - centroid.x));
    const int bins = std::clamp(static_cast<int>(kPi * r_mask_max / 2.0), 8, 360);
    std::vector<double> r_min(static_cast<std::size_t>(bins), 1e30);
    std::vector<double> r_max(static_cast<std::size_t>(bins), -1.0);
    auto bin_of = [&](int y, int x) {
        return static_cast<int>(wrap_angle(ccw_angle(centroid, y, x)) / kTwoPi * bins) % bins;
    };
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x) {
            if (mask(y, x) == 0.0) continue;
            const double r = std::hypot(centroid.y - y, x - centroid.x);
            const auto b = static_cast<std::size_t>(bin_of(y, x));
            r_min[b] = std::min(r_min[b], r);
            r_max[b] = std::max(r_max[b], r);
        }
    // smooth over a 3-bin window; empty bins inherit their neighbours
    std::vector<double> mid(static_cast<std::size_t>(bins), 0.0);
    for (int b = 0; b < bins; ++b) {
        double lo = 1e30, hi = -1.0;
        for (int off = -1; off <= 1; ++off) {
            const auto nb = static_cast<std::size_t>(((b + off) % bins + bins) % bins);
            lo = std::min(lo, r_min[nb]);
            hi = std::max(hi, r_max[nb]);
        }
        if (hi < 0.0) {  // isolated empty stretch: widen until populated
            for (int off = 2; off < bins && hi < 0.0; ++off)
                for (int s : {-1, 1}) {
                    const auto nb = static_cast<std::size_t>(((b + s * off) % bins + bins) % bins);
                    lo = std::min(lo, r_min[nb]);
                    hi = std::max(hi, r_max[nb]);
                }
        }
        mid[static_cast<std::size_t>(b)] = 0.5 * (lo + hi);
    }

    Eigen::MatrixXi seg = Eigen::MatrixXi::Zero(ny, nx);
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x) {
            if (mask(y, x) == 0.0) continue;
            const double rel = wrap_angle(ccw_angle(centroid, y, x) - origin - rotation);
            int sector = static_cast<int>(rel / sector_width);
            if (sector >= n_sectors) sector = n_sectors - 1;  // rel == 2*pi edge
            const int aha = base_id + sector;
            const double r = std::hypot(centroid.y - y, x - centroid.x);
            seg(y, x) = r < mid[static_cast<std::size_t>(bin_of(y, x))] ? aha : aha + 16;
        }
    return seg;
}

Territory territory_of(int base_segment) {
    switch (base_segment) {
        case 1: case 2: case 7: case 8: case 13: case 14:
            return Territory::LAD;
        case 3: case 4: case 9: case 10: case 15:
            return Territory::RCA;
        case 5: case 6: case 11: case 12: case 16:
            return Territory::LCx;
        default:
            throw ValidationError("territory_of: segment id out of range");
    }
}

const char* territory_name(Territory t) {
    switch (t) {
        case Territory::LAD: return "LAD";
        case Territory::LCx: return "LCx";
        case Territory::RCA: return "RCA";
    }
    return "?";
}

std::map<int, double> segment_means(const Eigen::MatrixXd& mbf_map,
                                    const Eigen::MatrixXi& segments) {
    if (mbf_map.rows() != segments.rows() || mbf_map.cols() != segments.cols())
        throw ValidationError("segment_means: shape mismatch");
    std::map<int, double> sums;
    std::map<int, int> counts;
    for (Eigen::Index y = 0; y < segments.rows(); ++y)
        for (Eigen::Index x = 0; x < segments.cols(); ++x) {
            const int id = segments(y, x);
            if (id == 0) continue;
            sums[id] += mbf_map(y, x);
            ++counts[id];
        }
    std::map<int, double> means;
    for (auto& [id, s] : sums) means[id] = s / counts[id];
    return means;
}

std::map<Territory, double> per_vessel_statistic(const Eigen::MatrixXd& mbf_map,
                                                 const Eigen::MatrixXi& segments) {
    const auto means = segment_means(mbf_map, segments);
    std::map<Territory, std::vector<double>> per_territory;
    for (const auto& [id, m] : means) {
        const int base = id > 16 ? id - 16 : id;
        per_territory[territory_of(base)].push_back(m);
    }
    std::map<Territory, double> out;
    for (auto& [t, v] : per_territory) {
        if (v.size() < 4)
            throw ValidationError(std::string("per-vessel statistic: territory ") +
                                  territory_name(t) + " has fewer than 4 segments");
        std::sort(v.begin(), v.end());
        out[t] = std::accumulate(v.begin(), v.begin() + 4, 0.0) / 4.0;
    }
    return out;
}

DiagnosticResult classify(const std::map<Territory, double>& values, double threshold) {
    if (!(threshold > 0.0)) throw ValidationError("classify: threshold must be > 0");
    DiagnosticResult res;
    res.threshold = threshold;
    res.statistic = values;
    for (const auto& [t, v] : values) {
        const bool pos = v < threshold;  // strictly below
        res.positive[t] = pos;
        res.patient_positive = res.patient_positive || pos;
    }
    return res;
}

RocResult roc_analysis(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size() || scores.empty())
        throw ValidationError("roc: scores/labels size mismatch");
    const long n_pos = std::count(labels.begin(), labels.end(), 1);
    const long n_neg = static_cast<long>(labels.size()) - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw ValidationError("roc: both classes must be present");

    // predicted positive when score < threshold; sweep thresholds from below
    // the minimum to above the maximum so the curve spans (0,0) to (1,1)
    std::vector<double> uniq(scores.begin(), scores.end());
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    std::vector<double> thresholds;
    thresholds.push_back(uniq.front() - 1.0);
    for (std::size_t i = 0; i + 1 < uniq.size(); ++i)
        thresholds.push_back(0.5 * (uniq[i] + uniq[i + 1]));
    thresholds.push_back(uniq.back() + 1.0);
    // also sweep the observed values themselves (ties sit on the boundary)
    for (double v : uniq) thresholds.push_back(v);
    std::sort(thresholds.begin(), thresholds.end());

    RocResult res;
    double best_youden = -2.0;
    std::vector<std::pair<double, double>> curve;  // (1-spec, sens)
    for (double thr : thresholds) {
        long tp = 0, fp = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (scores[i] < thr) {
                if (labels[i] == 1) ++tp;
                else ++fp;
            }
        }
        const double sens = static_cast<double>(tp) / n_pos;
        const double spec = 1.0 - static_cast<double>(fp) / n_neg;
        res.points.push_back({thr, sens, spec});
        curve.emplace_back(1.0 - spec, sens);
        const double youden = sens + spec - 1.0;
        if (youden > best_youden) {
            best_youden = youden;
            res.optimal_threshold = thr;
        }
    }

    std::sort(curve.begin(), curve.end());
    double auc = 0.0;
    for (std::size_t i = 0; i + 1 < curve.size(); ++i)
        auc += (curve[i + 1].first - curve[i].first) *
               0.5 * (curve[i].second + curve[i + 1].second);
    res.auc = auc;
    return res;
}

}  // namespace perfquant
