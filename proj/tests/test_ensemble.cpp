#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "bqda/ensemble.hpp"
#include "bqda/split.hpp"
#include "bqda/synth.hpp"

using namespace bqda;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

// Builds a labeled cube where realization r of pixel i is base(i) + noise.
DataCube make_cube(std::size_t pixels, std::size_t realizations, double noise_sd, std::uint64_t seed,
                   bool identical = false) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    const std::size_t p = 2;
    std::vector<PixelId> ids(pixels);
    std::vector<int> labels(pixels);
    std::vector<double> values;
    values.reserve(pixels * realizations * p);
    for (std::size_t i = 0; i < pixels; ++i) {
        ids[i] = static_cast<PixelId>(100 + i);
        labels[i] = static_cast<int>(i % 2);
        const double shift = labels[i] == 0 ? 0.0 : 1.5;
        const double b0 = shift + z(rng), b1 = -shift + 0.5 * z(rng);
        double e0 = noise_sd * z(rng), e1 = noise_sd * z(rng);
        for (std::size_t r = 0; r < realizations; ++r) {
            if (!identical) {
                e0 = noise_sd * z(rng);
                e1 = noise_sd * z(rng);
            }
            values.push_back(b0 + e0);
            values.push_back(b1 + e1);
        }
    }
    return DataCube(p, realizations, std::move(ids), std::move(values), {"a", "b"}, std::move(labels));
}

std::vector<std::size_t> all_pixels(const DataCube& c) {
    std::vector<std::size_t> v(c.num_pixels());
    std::iota(v.begin(), v.end(), std::size_t{0});
    return v;
}

void check_rows_sum_to_one(const Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        CHECK_THAT(m.row(i).sum(), WithinAbs(1.0, 1e-12));
        CHECK((m.row(i).array() >= 0.0).all());
    }
}

}  // namespace

TEST_CASE("single realization ensemble equals a plain fit", "[ensemble]") {
    const DataCube c = make_cube(40, 1, 0.1, 1);
    const auto px = all_pixels(c);
    for (ModelKind kind : {ModelKind::QDA, ModelKind::LDA, ModelKind::BQDA}) {
        const auto models = ensemble_fit(c, kind, px, c.catalog());
        REQUIRE(models.size() == 1);
        const FittedModel direct = fit(kind, c.realization_rows(px, 0), c.label_indices(px), c.catalog());
        for (std::size_t k = 0; k < 2; ++k) {
            CHECK(models[0].per_class()[k].count == direct.per_class()[k].count);
            CHECK(models[0].per_class()[k].mean == direct.per_class()[k].mean);
            CHECK(models[0].per_class()[k].scatter == direct.per_class()[k].scatter);
        }
        const auto a = ensemble_predict(models, c, px, 3);
        const auto b = predict_proba(direct, c.realization_rows(px, 0));
        CHECK(a.probabilities == b.probabilities);
        CHECK(a.pixel_ids == c.pixel_ids());
    }
}

TEST_CASE("identical realizations give bit-identical ensemble output", "[ensemble]") {
    const DataCube c = make_cube(60, 7, 0.2, 2, /*identical=*/true);
    const auto px = all_pixels(c);
    const auto models = ensemble_fit(c, ModelKind::QDA, px, c.catalog());
    for (std::size_t r = 1; r < models.size(); ++r) {
        CHECK(models[r].per_class()[0].mean == models[0].per_class()[0].mean);
        CHECK(models[r].per_class()[1].scatter == models[0].per_class()[1].scatter);
    }
    const auto single = predict_proba(models[0], c.realization_rows(px, 0));
    for (std::uint64_t seed : {0ULL, 5ULL, 99ULL}) {
        const auto avg = ensemble_predict(models, c, px, seed);
        CHECK(avg.probabilities == single.probabilities);
    }
    const auto bq = fit_pooled(c, ModelKind::BQDA, px, c.catalog());
    const auto bq_avg = bqda_predict_averaged(bq, c, px);
    CHECK(bq_avg.probabilities == predict_proba(bq, c.realization_rows(px, 0)).probabilities);
}

TEST_CASE("realization permutation is seeded and complete", "[ensemble]") {
    for (std::size_t n : {1u, 2u, 5u, 25u}) {
        const auto a = realization_permutation(n, 17);
        const auto b = realization_permutation(n, 17);
        CHECK(a == b);
        std::set<std::size_t> seen(a.begin(), a.end());
        CHECK(seen.size() == n);
        CHECK(*seen.rbegin() == n - 1);
    }
    CHECK(realization_permutation(25, 1) != realization_permutation(25, 2));
    // Frequency of each position over many seeds is close to uniform.
    const std::size_t n = 5, trials = 20000;
    std::vector<std::size_t> hits(n, 0);
    for (std::uint64_t s = 0; s < trials; ++s) ++hits[realization_permutation(n, s)[0]];
    for (std::size_t h : hits) CHECK(std::abs(static_cast<double>(h) / trials - 0.2) < 0.02);
}

TEST_CASE("ensemble average matches a brute force mean", "[ensemble]") {
    const DataCube c = make_cube(50, 6, 0.3, 4);
    const auto px = all_pixels(c);
    const std::uint64_t seed = 11;
    const auto models = ensemble_fit(c, ModelKind::QDA, px, c.catalog());
    const auto avg = ensemble_predict(models, c, px, seed);
    const auto perm = realization_permutation(models.size(), seed);
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(px.size()), 2);
    for (std::size_t j = 0; j < models.size(); ++j) {
        sum += predict_proba(models[j], c.realization_rows(px, perm[j])).probabilities;
    }
    sum /= static_cast<double>(models.size());
    CHECK((avg.probabilities - sum).cwiseAbs().maxCoeff() < 1e-14);
    check_rows_sum_to_one(avg.probabilities);

    const auto bq = fit_pooled(c, ModelKind::BQDA, px, c.catalog());
    const auto bavg = bqda_predict_averaged(bq, c, px);
    Eigen::MatrixXd bsum = Eigen::MatrixXd::Zero(sum.rows(), 2);
    for (std::size_t r = 0; r < c.num_realizations(); ++r) {
        bsum += predict_proba(bq, c.realization_rows(px, r)).probabilities;
    }
    bsum /= static_cast<double>(c.num_realizations());
    CHECK((bavg.probabilities - bsum).cwiseAbs().maxCoeff() < 1e-14);
    check_rows_sum_to_one(bavg.probabilities);
}

TEST_CASE("pooled fit counts every realization", "[ensemble]") {
    const DataCube c = make_cube(30, 4, 0.3, 5);
    const auto px = all_pixels(c);
    const auto m = fit_pooled(c, ModelKind::BQDA, px, c.catalog());
    CHECK(m.per_class()[0].count == 15 * 4);
    CHECK(m.per_class()[1].count == 15 * 4);
}

TEST_CASE("ensemble size must match the realization count", "[ensemble][errors]") {
    const DataCube c = make_cube(30, 4, 0.3, 6);
    const DataCube c3 = make_cube(30, 3, 0.3, 6);
    const auto px = all_pixels(c);
    const auto models = ensemble_fit(c, ModelKind::QDA, px, c.catalog());
    CHECK_THROWS_AS(ensemble_predict(models, c3, px, 0), EvalError);
    CHECK_THROWS_WITH(ensemble_predict(models, c3, px, 0), ContainsSubstring("4 models"));
}

TEST_CASE("fit errors carry the realization index", "[ensemble][errors]") {
    // Realization 2 of class 'a' is collinear; all others are fine.
    std::mt19937_64 rng(9);
    std::normal_distribution<double> z;
    std::vector<double> values;
    std::vector<int> labels;
    std::vector<PixelId> ids;
    for (int i = 0; i < 20; ++i) {
        ids.push_back(i);
        labels.push_back(i % 2);
        for (int r = 0; r < 3; ++r) {
            const double t = z(rng);
            if (r == 2 && i % 2 == 0) {
                values.push_back(t);
                values.push_back(2.0 * t);
            } else {
                values.push_back(t);
                values.push_back(z(rng));
            }
        }
    }
    const DataCube c(2, 3, ids, values, {"a", "b"}, labels);
    const auto px = all_pixels(c);
    CHECK_THROWS_AS(ensemble_fit(c, ModelKind::QDA, px, c.catalog()), FitError);
    CHECK_THROWS_WITH(ensemble_fit(c, ModelKind::QDA, px, c.catalog()),
                      ContainsSubstring("realization 2") && ContainsSubstring("'a'"));
    CHECK_NOTHROW(ensemble_fit(c, ModelKind::BQDA, px, c.catalog()));
}

TEST_CASE("member mean spread follows the measurement noise", "[ensemble][statistics]") {
    const double sd = 0.4;
    const std::size_t pixels = 400, r = 25;
    const DataCube c = make_cube(pixels, r, sd, 7);
    const auto px = all_pixels(c);
    const auto models = ensemble_fit(c, ModelKind::QDA, px, c.catalog());
    // Pool the spread over both classes and both bands.
    double ss = 0.0;
    std::size_t dof = 0;
    for (std::size_t k = 0; k < 2; ++k) {
        for (Eigen::Index b = 0; b < 2; ++b) {
            double mean = 0.0;
            for (const auto& m : models) mean += m.per_class()[k].mean(b);
            mean /= static_cast<double>(r);
            for (const auto& m : models) ss += std::pow(m.per_class()[k].mean(b) - mean, 2);
            dof += r - 1;
        }
    }
    const double spread = std::sqrt(ss / static_cast<double>(dof));
    const double expected = sd / std::sqrt(static_cast<double>(pixels / 2));
    CHECK(std::abs(spread / expected - 1.0) < 0.2);
}

TEST_CASE("averaging commutes with pixel subsetting", "[ensemble]") {
    const DataCube c = make_cube(80, 5, 0.3, 8);
    const auto px = all_pixels(c);
    const auto models = ensemble_fit(c, ModelKind::LDA, px, c.catalog());
    const auto bq = fit_pooled(c, ModelKind::BQDA, px, c.catalog());
    const auto full = ensemble_predict(models, c, px, 21);
    const auto bfull = bqda_predict_averaged(bq, c, px);
    const std::vector<std::size_t> subset{3, 17, 42, 79};
    const auto part = ensemble_predict(models, c, subset, 21);
    const auto bpart = bqda_predict_averaged(bq, c, subset);
    for (std::size_t i = 0; i < subset.size(); ++i) {
        const auto row = static_cast<Eigen::Index>(subset[i]);
        CHECK(part.probabilities.row(static_cast<Eigen::Index>(i)) == full.probabilities.row(row));
        CHECK(bpart.probabilities.row(static_cast<Eigen::Index>(i)) == bfull.probabilities.row(row));
        CHECK(part.pixel_ids[i] == c.pixel_ids()[subset[i]]);
    }
}

TEST_CASE("synthetic cube ensembles produce valid tables", "[ensemble][synth]") {
    SynthSpec spec;
    spec.num_pixels = 300;
    spec.num_realizations = 10;
    spec.seed = 3;
    spec.measurement_cov = 0.01 * Eigen::MatrixXd::Identity(3, 3);
    SynthClass a{"a", 0.5, Eigen::Vector3d(0.0, 0.0, 0.0), 0.05 * Eigen::MatrixXd::Identity(3, 3)};
    SynthClass b{"b", 0.3, Eigen::Vector3d(0.3, 0.1, 0.0), 0.04 * Eigen::MatrixXd::Identity(3, 3)};
    SynthClass d{"c", 0.2, Eigen::Vector3d(0.0, 0.3, 0.2), 0.06 * Eigen::MatrixXd::Identity(3, 3)};
    spec.classes = {a, b, d};
    const DataCube c = synth_cube(spec);
    const Split s = split_pixels(c, SplitSpec{0.2, 0});
    for (ModelKind kind : {ModelKind::QDA, ModelKind::LDA}) {
        const auto models = ensemble_fit(c, kind, s.train, c.catalog());
        check_rows_sum_to_one(ensemble_predict(models, c, s.validation, 1).probabilities);
    }
    const auto bq = fit_pooled(c, ModelKind::BQDA, s.train, c.catalog());
    check_rows_sum_to_one(bqda_predict_averaged(bq, c, s.validation).probabilities);
}
