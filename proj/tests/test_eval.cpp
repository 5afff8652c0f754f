#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>

#include "error.hpp"
#include "eval.hpp"
#include "testutil.hpp"

using namespace vcm;

TEST_CASE("pearson examples and affine invariance") {
    std::vector<double> x{1, 2, 3, 4, 5};
    CHECK(eval::pearson(x, x) == doctest::Approx(1.0).epsilon(1e-12));

    std::vector<double> neg;
    for (double v : x) neg.push_back(-v);
    CHECK(eval::pearson(x, neg) == doctest::Approx(-1.0).epsilon(1e-12));

    std::mt19937_64 rng(5);
    std::vector<double> y;
    for (size_t i = 0; i < x.size(); ++i) y.push_back(testutil::unit(rng));
    std::vector<double> x_affine;
    for (double v : x) x_affine.push_back(2 * v + 3);
    CHECK(eval::pearson(x_affine, y) == doctest::Approx(eval::pearson(x, y)).epsilon(1e-12));

    std::vector<double> constant{2, 2, 2, 2, 2};
    CHECK_THROWS_AS(eval::pearson(x, constant), Error);
    CHECK_THROWS_AS(eval::pearson(std::vector<double>{1}, std::vector<double>{1}), Error);
}

TEST_CASE("rmse examples") {
    std::vector<double> a{1, 2, 3}, b{2, 3, 4};
    CHECK(eval::rmse(a, a) == 0.0);
    CHECK(eval::rmse(a, b) == doctest::Approx(1.0).epsilon(1e-12));
    // hand arithmetic: mean((3-0)^2, (4-0)^2) = 12.5
    CHECK(eval::rmse(std::vector<double>{0, 0}, std::vector<double>{3, 4}) ==
          doctest::Approx(std::sqrt(12.5)).epsilon(1e-12));
    CHECK_THROWS_AS(eval::rmse(a, std::vector<double>{1, 2}), Error);
}

TEST_CASE("fit_mapping on identity data reaches rmse < 0.05") {
    std::mt19937_64 rng(77);
    std::vector<double> mos;
    for (int i = 0; i < 40; ++i) mos.push_back(1.0 + 4.0 * testutil::unit(rng));
    const auto mapping = eval::fit_mapping(mos, mos);
    std::vector<double> mapped;
    for (double v : mos) mapped.push_back(mapping(v));
    CHECK(eval::rmse(mapped, mos) < 0.05);
}

TEST_CASE("fitted mapping is monotone non-decreasing") {
    std::mt19937_64 rng(13);
    std::vector<double> raw, mos;
    for (int i = 0; i < 30; ++i) {
        raw.push_back(100.0 * testutil::unit(rng));
        mos.push_back(std::clamp(1.0 + raw.back() / 25.0 + 0.3 * testutil::gaussian(rng), 1.0,
                                 5.0));
    }
    const auto mapping = eval::fit_mapping(raw, mos);
    double prev = -1e9;
    for (double x = -10; x <= 110; x += 0.5) {
        const double v = mapping(x);
        CHECK(v >= prev - 1e-12);
        CHECK(v >= 1.0);
        CHECK(v <= 5.0);
        prev = v;
    }
}

TEST_CASE("fitting a linear 0-100 metric preserves the rank order") {
    std::vector<double> mos, raw;
    for (int i = 0; i < 25; ++i) {
        mos.push_back(1.0 + 4.0 * i / 24.0);
        raw.push_back(100.0 * i / 24.0); // VMAF-style range, linear in MOS
    }
    const auto mapping = eval::fit_mapping(raw, mos);
    std::vector<double> mapped;
    for (double v : raw) mapped.push_back(mapping(v));

    auto argsort = [](const std::vector<double>& v) {
        std::vector<size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), size_t(0));
        std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
        return idx;
    };
    CHECK(argsort(mapped) == argsort(raw));
    CHECK(eval::pearson(mapped, mos) > 0.999);
}

TEST_CASE("degenerate fits are errors") {
    std::vector<double> constant{3, 3, 3, 3, 3}, mos{1, 2, 3, 4, 5};
    CHECK_THROWS_AS(eval::fit_mapping(constant, mos), Error);
    CHECK_THROWS_AS(eval::fit_mapping(std::vector<double>{1, 2}, std::vector<double>{1, 2}),
                    Error);
}

TEST_CASE("evaluate_model on perfect predictions") {
    std::mt19937_64 rng(3);
    std::vector<double> mos;
    for (int i = 0; i < 30; ++i) mos.push_back(1.0 + 4.0 * testutil::unit(rng));
    const auto report = eval::evaluate_model(mos, mos);
    CHECK(report.pcc > 0.999);
    CHECK(report.rmse < 0.05);
}

TEST_CASE("shuffled labels give small correlation (permutation baseline)") {
    std::mt19937_64 rng(17);
    std::vector<double> preds, mos;
    for (int i = 0; i < 60; ++i) {
        preds.push_back(testutil::unit(rng));
        mos.push_back(1.0 + 4.0 * testutil::unit(rng));
    }
    std::vector<double> abs_pcc;
    std::vector<double> shuffled = mos;
    for (int trial = 0; trial < 100; ++trial) {
        for (size_t i = shuffled.size(); i > 1; --i)
            std::swap(shuffled[i - 1], shuffled[rng() % i]);
        abs_pcc.push_back(std::fabs(eval::pearson(preds, shuffled)));
    }
    std::sort(abs_pcc.begin(), abs_pcc.end());
    CHECK(abs_pcc[94] < 0.35); // 95th percentile of |pcc| under the null stays small
}

TEST_CASE("evaluate_model is deterministic") {
    std::mt19937_64 rng(29);
    std::vector<double> preds, mos;
    for (int i = 0; i < 20; ++i) {
        preds.push_back(10 * testutil::unit(rng));
        mos.push_back(1.0 + 4.0 * testutil::unit(rng));
    }
    const auto a = eval::evaluate_model(preds, mos);
    const auto b = eval::evaluate_model(preds, mos);
    CHECK(a.pcc == b.pcc);
    CHECK(a.rmse == b.rmse);
    CHECK(a.mapped == b.mapped);
}

TEST_CASE("timeline export writes the documented columns") {
    testutil::TempDir tmp("timeline");
    std::vector<double> q(180, 3.5), freeze(180, 0.0), skip(180, 0.0);
    q[0] = 5.7;          // clamps to 5
    freeze[10] = 10.0;   // written as 1.0
    eval::TimelineColumns cols;
    cols.quality = q;
    cols.freeze = freeze;
    cols.skip = skip;
    eval::export_timeline(cols, tmp.file("t.csv"));

    std::ifstream in(tmp.file("t.csv"));
    std::string header;
    std::getline(in, header);
    CHECK(header == "frame,q_raw,q_clamped,freeze_div10,skip_div10");
    size_t rows = 0;
    std::string line, row10;
    std::vector<std::string> all;
    while (std::getline(in, line)) {
        all.push_back(line);
        ++rows;
    }
    CHECK(rows == 180);
    CHECK(all[0] == "0,5.7,5,0,0");
    CHECK(all[10] == "10,3.5,3.5,1,0");

    eval::TimelineColumns empty;
    CHECK_THROWS_AS(eval::export_timeline(empty, tmp.file("e.csv")), Error);

    eval::TimelineColumns mismatched;
    std::vector<double> short_freeze(5, 0.0);
    mismatched.quality = q;
    mismatched.freeze = short_freeze;
    CHECK_THROWS_AS(eval::export_timeline(mismatched, tmp.file("m.csv")), Error);
}
