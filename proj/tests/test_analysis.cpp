#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "perfquant/analysis.hpp"
#include "perfquant/rng.hpp"

using namespace perfquant;

namespace {

// annulus mask centred at (cy, cx)
Eigen::MatrixXd annulus(int n, double cy, double cx, double r0, double r1) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const double r = std::hypot(y - cy, x - cx);
            if (r >= r0 && r <= r1) m(y, x) = 1.0;
        }
    return m;
}

// O(n^2) pairwise concordance: P(score_pos < score_neg) with half credit
double concordance(const std::vector<double>& scores, const std::vector<int>& labels) {
    double num = 0.0;
    long pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i)
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[i] != 1 || labels[j] != 0) continue;
            ++pairs;
            if (scores[i] < scores[j]) num += 1.0;
            else if (scores[i] == scores[j]) num += 0.5;
        }
    return num / static_cast<double>(pairs);
}

}  // namespace

TEST_CASE("bounding box requires variance structure") {
    ImageSeries flat;
    flat.frames.assign(12, Eigen::MatrixXd::Constant(40, 40, 5.0));
    CHECK_THROWS_AS(bounding_box_temporal_variance(flat), ValidationError);

    ImageSeries brief;
    brief.frames.assign(5, Eigen::MatrixXd::Constant(40, 40, 5.0));
    CHECK_THROWS_AS(bounding_box_temporal_variance(brief), ValidationError);
}

TEST_CASE("bounding box finds two enhancing disks") {
    const int n = 64, nt = 20;
    ImageSeries s;
    s.frames.assign(static_cast<std::size_t>(nt), Eigen::MatrixXd::Constant(n, n, 10.0));
    auto rng = make_rng(3);
    std::normal_distribution<double> g(0.0, 0.01);
    for (int t = 0; t < nt; ++t) {
        auto& f = s.frames[static_cast<std::size_t>(t)];
        const double level = 50.0 * std::exp(-(t - 10.0) * (t - 10.0) / 18.0);
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) {
                if (std::hypot(y - 30, x - 20) < 6) f(y, x) += level;
                if (std::hypot(y - 34, x - 44) < 5) f(y, x) += 0.8 * level;
                f(y, x) += g(rng);  // break exact-tie quantiles
            }
    }
    const BoundingBox box = bounding_box_temporal_variance(s, 0.95, 4);
    CHECK(box.y0 <= 24 - 0);
    CHECK(box.x0 <= 14);
    CHECK(box.y1 >= 40);
    CHECK(box.x1 >= 49);
    CHECK(box.y0 >= 0);
    CHECK(box.x1 <= n);

    // one merged region: the documented failure mode
    ImageSeries merged;
    merged.frames.assign(static_cast<std::size_t>(nt), Eigen::MatrixXd::Constant(n, n, 10.0));
    for (int t = 0; t < nt; ++t) {
        auto& f = merged.frames[static_cast<std::size_t>(t)];
        const double level = 50.0 * std::exp(-(t - 10.0) * (t - 10.0) / 18.0);
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) {
                if (std::hypot(y - 32, x - 32) < 12) f(y, x) += level;
                f(y, x) += g(rng);
            }
    }
    CHECK_THROWS_AS(bounding_box_temporal_variance(merged, 0.95, 4), ValidationError);
}

TEST_CASE("segment assignment on a perfect annulus") {
    const int n = 101;
    const PixelPoint c{50.0, 50.0};
    const Eigen::MatrixXd mask = annulus(n, c.y, c.x, 20, 40);
    const std::array<PixelPoint, 2> rv{{{50.0, 95.0}, {85.0, 25.0}}};  // anterior at 0 deg

    const Eigen::MatrixXi seg = assign_segments(mask, rv, SliceLevel::basal, c);

    // partition: nonzero exactly on the mask
    std::map<int, int> counts;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            CHECK((seg(y, x) != 0) == (mask(y, x) != 0.0));
            if (seg(y, x) != 0) ++counts[seg(y, x)];
        }
    CHECK(counts.size() == 12);  // 6 sectors x 2 layers

    // sectors of equal pixel count within 2% (summing endo+epi per sector)
    long total = 0;
    std::array<long, 6> sector_count{};
    for (const auto& [id, cnt] : counts) {
        const int base = id > 16 ? id - 16 : id;
        sector_count[static_cast<std::size_t>(base - 1)] += cnt;
        total += cnt;
    }
    for (int k = 0; k < 6; ++k)
        CHECK(std::abs(sector_count[static_cast<std::size_t>(k)] - total / 6.0) <
              0.02 * total / 6.0 + 2.0);

    // rotating the insertion points by 60 degrees rotates labels one sector
    const double a = 60.0 * M_PI / 180.0;
    const std::array<PixelPoint, 2> rv60{{{c.y - 45.0 * std::sin(a), c.x + 45.0 * std::cos(a)},
                                          {c.y - 45.0 * std::sin(a + 4.19), c.x + 45.0 * std::cos(a + 4.19)}}};
    const Eigen::MatrixXi seg60 = assign_segments(mask, rv60, SliceLevel::basal, c);
    int agree = 0, seen = 0;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            if (seg(y, x) == 0) continue;
            ++seen;
            const int b0 = seg(y, x) > 16 ? seg(y, x) - 16 : seg(y, x);
            const int b1 = seg60(y, x) > 16 ? seg60(y, x) - 16 : seg60(y, x);
            if (b1 == ((b0 - 1 + 5) % 6) + 1) ++agree;  // one sector back
        }
    CHECK(agree > 0.98 * seen);
}

TEST_CASE("endo/epi split follows the radial midline along rays") {
    const int n = 101;
    const PixelPoint c{50.0, 50.0};
    const Eigen::MatrixXd mask = annulus(n, c.y, c.x, 20, 40);
    const std::array<PixelPoint, 2> rv{{{50.0, 95.0}, {85.0, 25.0}}};
    const Eigen::MatrixXi seg = assign_segments(mask, rv, SliceLevel::basal, c);

    // walk rays from the centroid: the inner half of the annulus is endo
    for (int k = 0; k < 360; k += 7) {
        const double ang = k * M_PI / 180.0;
        for (double r = 20.5; r <= 39.5; r += 0.7) {
            const int y = static_cast<int>(std::round(c.y - r * std::sin(ang)));
            const int x = static_cast<int>(std::round(c.x + r * std::cos(ang)));
            if (y < 0 || y >= n || x < 0 || x >= n || seg(y, x) == 0) continue;
            const double rr = std::hypot(y - c.y, x - c.x);
            if (rr < 29.0)
                CHECK(seg(y, x) <= 16);  // endo
            else if (rr > 31.0)
                CHECK(seg(y, x) > 16);   // epi
        }
    }
}

TEST_CASE("apical slices use four sectors") {
    const int n = 81;
    const PixelPoint c{40.0, 40.0};
    const Eigen::MatrixXd mask = annulus(n, c.y, c.x, 12, 26);
    const std::array<PixelPoint, 2> rv{{{40.0, 75.0}, {70.0, 20.0}}};
    const Eigen::MatrixXi seg = assign_segments(mask, rv, SliceLevel::apical, c);
    std::map<int, int> ids;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
            if (seg(y, x) != 0) ++ids[seg(y, x) > 16 ? seg(y, x) - 16 : seg(y, x)];
    CHECK(ids.size() == 4);
    for (const auto& [id, cnt] : ids) {
        CHECK(id >= 13);
        CHECK(id <= 16);
    }
}

TEST_CASE("segment assignment error paths") {
    const Eigen::MatrixXd empty = Eigen::MatrixXd::Zero(10, 10);
    const std::array<PixelPoint, 2> rv{{{1.0, 2.0}, {3.0, 4.0}}};
    CHECK_THROWS_AS(assign_segments(empty, rv, SliceLevel::basal, {5.0, 5.0}),
                    ValidationError);

    const Eigen::MatrixXd mask = annulus(41, 20, 20, 8, 16);
    const std::array<PixelPoint, 2> same{{{1.0, 2.0}, {1.0, 2.0}}};
    CHECK_THROWS_AS(assign_segments(mask, same, SliceLevel::basal, {20.0, 20.0}),
                    ValidationError);
}

TEST_CASE("per-vessel statistic: mean of the four lowest") {
    // eight LAD layer-segments with the worked-example means
    const std::array<int, 8> ids{1, 2, 7, 8, 17, 18, 23, 24};
    const std::array<double, 8> means{2.0, 1.0, 1.5, 1.2, 3.0, 0.8, 2.2, 1.9};
    Eigen::MatrixXi seg = Eigen::MatrixXi::Zero(8, 10);
    Eigen::MatrixXd mbf = Eigen::MatrixXd::Zero(8, 10);
    for (int k = 0; k < 8; ++k)
        for (int x = 0; x < 10; ++x) {
            seg(k, x) = ids[static_cast<std::size_t>(k)];
            mbf(k, x) = means[static_cast<std::size_t>(k)];
        }
    const auto stat = per_vessel_statistic(mbf, seg);
    CHECK(stat.at(Territory::LAD) == doctest::Approx(1.125).epsilon(1e-12));

    // all segments equal
    Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(8, 10, 1.7);
    CHECK(per_vessel_statistic(flat, seg).at(Territory::LAD) ==
          doctest::Approx(1.7).epsilon(1e-12));

    // fewer than four segments in a present territory
    Eigen::MatrixXi sparse = Eigen::MatrixXi::Zero(8, 10);
    sparse(0, 0) = 3;
    sparse(0, 1) = 4;
    CHECK_THROWS_AS(per_vessel_statistic(mbf, sparse), ValidationError);
}

TEST_CASE("per-vessel statistic is monotone in segment means") {
    const std::array<int, 8> ids{1, 2, 7, 8, 17, 18, 23, 24};
    Eigen::MatrixXi seg = Eigen::MatrixXi::Zero(8, 1);
    Eigen::MatrixXd mbf = Eigen::MatrixXd::Zero(8, 1);
    auto rng = make_rng(8);
    std::uniform_real_distribution<double> u(0.5, 3.0);
    for (int trial = 0; trial < 20; ++trial) {
        for (int k = 0; k < 8; ++k) {
            seg(k, 0) = ids[static_cast<std::size_t>(k)];
            mbf(k, 0) = u(rng);
        }
        const double base = per_vessel_statistic(mbf, seg).at(Territory::LAD);
        Eigen::MatrixXd lower = mbf;
        const int pick = trial % 8;
        lower(pick, 0) -= 0.3;
        const double dropped = per_vessel_statistic(lower, seg).at(Territory::LAD);
        CHECK(dropped <= base + 1e-12);
    }
}

TEST_CASE("classification thresholds") {
    std::map<Territory, double> v{{Territory::LAD, 1.2},
                                  {Territory::LCx, 2.0},
                                  {Territory::RCA, 1.34}};
    const DiagnosticResult r = classify(v, 1.34);
    CHECK(r.positive.at(Territory::LAD));        // 1.2 < 1.34
    CHECK_FALSE(r.positive.at(Territory::LCx));
    CHECK_FALSE(r.positive.at(Territory::RCA));  // boundary is negative
    CHECK(r.patient_positive);

    std::map<Territory, double> healthy{{Territory::LAD, 1.5},
                                        {Territory::LCx, 2.0},
                                        {Territory::RCA, 1.9}};
    CHECK_FALSE(classify(healthy, 1.34).patient_positive);

    // raising the threshold never flips a positive vessel to negative
    for (double lo : {1.0, 1.3, 1.6}) {
        const auto a = classify(v, lo);
        const auto b = classify(v, lo + 0.2);
        for (const auto& [t, pos] : a.positive)
            if (pos) CHECK(b.positive.at(t));
    }
}

TEST_CASE("roc analysis") {
    // perfectly separated: positives (low) below negatives (high)
    std::vector<double> s1{0.5, 0.7, 1.0, 2.0, 2.5, 3.0};
    std::vector<int> l1{1, 1, 1, 0, 0, 0};
    CHECK(roc_analysis(s1, l1).auc == doctest::Approx(1.0));

    // palindromic interleaving gives exactly one half
    std::vector<double> s2{1.0, 2.0, 3.0, 4.0};
    std::vector<int> l2{1, 0, 0, 1};
    CHECK(roc_analysis(s2, l2).auc == doctest::Approx(0.5).epsilon(1e-12));

    // 20-point instance equals the pairwise concordance oracle
    auto rng = make_rng(17);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    std::bernoulli_distribution coin(0.45);
    for (int trial = 0; trial < 25; ++trial) {
        std::vector<double> scores;
        std::vector<int> labels;
        bool have[2] = {false, false};
        for (int i = 0; i < 20; ++i) {
            double v = u(rng);
            if (i % 5 == 0 && i > 0) v = scores[static_cast<std::size_t>(i - 1)];  // ties
            scores.push_back(v);
            labels.push_back(coin(rng) ? 1 : 0);
            have[labels.back()] = true;
        }
        if (!have[0] || !have[1]) {
            labels[0] = 0;
            labels[1] = 1;
        }
        const RocResult r = roc_analysis(scores, labels);
        CHECK(std::abs(r.auc - concordance(scores, labels)) < 1e-12);
    }

    // the reported optimal threshold maximises Youden's index
    const RocResult r = roc_analysis(s1, l1);
    double best = -1.0;
    for (const auto& p : r.points) best = std::max(best, p.sensitivity + p.specificity - 1.0);
    bool found = false;
    for (const auto& p : r.points)
        if (p.threshold == r.optimal_threshold)
            found = (p.sensitivity + p.specificity - 1.0) == doctest::Approx(best);
    CHECK(found);

    std::vector<int> ones{1, 1, 1, 1, 1, 1};
    CHECK_THROWS_AS(roc_analysis(s1, ones), ValidationError);
}
