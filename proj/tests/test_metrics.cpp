#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "bqda/metrics.hpp"
#include "bqda/pca.hpp"
#include "bqda/report.hpp"
#include "support/oracles.hpp"

using namespace bqda;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

using Labels = std::vector<std::size_t>;

ClassCatalog cat(std::size_t k) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < k; ++i) names.push_back("c" + std::to_string(i));
    return ClassCatalog(names);
}

Eigen::MatrixXd one_hot(const Labels& y, std::size_t k) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(y.size()), static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < y.size(); ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(y[i])) = 1.0;
    return m;
}

Eigen::MatrixXd prior_rows(const PriorClassDistribution& q, std::size_t n) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(q.size()));
    for (std::size_t k = 0; k < q.size(); ++k) m.col(static_cast<Eigen::Index>(k)).setConstant(q[k]);
    return m;
}

// Reference cross-entropy ratio written independently.
double xe_reference(const Eigen::MatrixXd& p, const Labels& y, const std::vector<double>& q) {
    double num = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        double v = p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(y[i]));
        v = std::min(std::max(v, 1e-15), 1.0 - 1e-15);
        num += std::log(v);
    }
    num /= static_cast<double>(y.size());
    double den = 0.0;
    for (double qk : q) den += qk * std::log(qk);
    return num / den;
}

}  // namespace

TEST_CASE("confusion matrix tallies", "[metrics][confusion]") {
    const Labels truth{0, 1, 2, 0, 1, 2, 0, 1, 2};
    const ConfusionMatrix perfect(cat(3), truth, truth);
    for (std::size_t t = 0; t < 3; ++t)
        for (std::size_t p = 0; p < 3; ++p) CHECK(perfect.count(t, p) == (t == p ? 3u : 0u));

    const ConfusionMatrix ones(cat(3), truth, Labels(9, 1));
    for (std::size_t t = 0; t < 3; ++t) CHECK(ones.count(t, 1) == 3);
    CHECK(ones.total() == 9);

    // hand-built case
    const Labels pred{0, 1, 1, 2, 1, 0, 0, 2, 2};
    const ConfusionMatrix cm(cat(3), truth, pred);
    CHECK(cm.tp(0) == 2);
    CHECK(cm.fn(0) == 1);
    CHECK(cm.fp(0) == 1);
    CHECK(cm.tn(0) == 5);
    CHECK(cm.tp(1) == 2);
    CHECK(cm.fn(1) == 1);
    CHECK(cm.fp(1) == 1);
    CHECK(cm.tp(2) == 1);
    CHECK(cm.fn(2) == 2);
    CHECK(cm.fp(2) == 2);
    const ClassRates r = cm.rates(1);
    CHECK_THAT(r.tp_rate, WithinAbs(2.0 / 3.0, 1e-15));
    CHECK_THAT(r.fp_rate, WithinAbs(1.0 / 6.0, 1e-15));
    CHECK_THAT(r.tn_rate + r.fp_rate, WithinAbs(1.0, 1e-15));

    const std::vector<std::string> st{"c0", "c1"}, sp{"c0", "zz"};
    CHECK_THROWS_WITH(confusion(st, sp, cat(2)), ContainsSubstring("unknown class label"));
    CHECK_THROWS_AS(ConfusionMatrix(cat(3), truth, Labels{0, 1}), DimensionError);
    CHECK_THROWS_AS(ConfusionMatrix(cat(3), Labels{0, 7}, Labels{0, 1}), DataError);
}

TEST_CASE("confusion counts follow a catalog reordering", "[metrics][confusion]") {
    const std::vector<std::string> truth{"b", "a", "c", "c", "a", "b", "b"};
    const std::vector<std::string> pred{"b", "c", "c", "a", "a", "a", "b"};
    const ConfusionMatrix m1 = confusion(truth, pred, ClassCatalog({"a", "b", "c"}));
    // rename so that the sorted order becomes c, a, b
    auto rename = [](const std::string& s) { return s == "c" ? std::string("0c") : "1" + s; };
    std::vector<std::string> t2, p2;
    for (const auto& s : truth) t2.push_back(rename(s));
    for (const auto& s : pred) p2.push_back(rename(s));
    const ConfusionMatrix m2 = confusion(t2, p2, ClassCatalog({"0c", "1a", "1b"}));
    const std::size_t map[3] = {1, 2, 0};  // a->1, b->2, c->0
    for (std::size_t t = 0; t < 3; ++t)
        for (std::size_t p = 0; p < 3; ++p) CHECK(m1.count(t, p) == m2.count(map[t], map[p]));
}

TEST_CASE("weighted F-beta", "[metrics][fbeta]") {
    const PriorClassDistribution half({0.5, 0.5});
    const Labels truth{0, 0, 1};
    const Labels pred{0, 1, 0};
    const ConfusionMatrix cm(cat(2), truth, pred);
    CHECK(cm.tp(0) == 1);
    CHECK(cm.fn(0) == 1);
    CHECK(cm.fp(0) == 1);
    CHECK(cm.tp(1) == 0);
    CHECK_THAT(f_beta(cm, half, 1.0), WithinAbs(0.25, 1e-15));

    const ConfusionMatrix perfect(cat(2), truth, truth);
    for (double beta : {0.5, 1.0, 2.0}) CHECK(f_beta(perfect, PriorClassDistribution({0.2, 0.8}), beta) == 1.0);

    // class 2 absent from truth and prediction contributes q_2 * 1
    const ConfusionMatrix absent(cat(3), Labels{0, 1, 1}, Labels{0, 1, 0});
    const PriorClassDistribution q3({0.5, 0.3, 0.2});
    const double f0 = 2.0 / (2.0 + 0.0 + 1.0), f1 = 2.0 / (2.0 + 1.0 + 0.0);
    CHECK_THAT(f_beta(absent, q3, 1.0), WithinAbs(0.5 * f0 + 0.3 * f1 + 0.2, 1e-15));
    CHECK_THROWS_AS(f_beta(perfect, half, 0.0), ConfigError);
    CHECK_THROWS_AS(f_beta(perfect, q3, 1.0), DimensionError);
}

TEST_CASE("F1 equals the precision-recall harmonic mean", "[metrics][fbeta]") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t k = 2 + static_cast<std::size_t>(trial % 4);
        std::uniform_int_distribution<std::size_t> lab(0, k - 1);
        const std::size_t n = 5 + static_cast<std::size_t>(trial % 40);
        Labels truth(n), pred(n);
        for (std::size_t i = 0; i < n; ++i) {
            truth[i] = lab(rng);
            pred[i] = lab(rng) == 0 ? truth[i] : lab(rng);
        }
        const ConfusionMatrix cm(cat(k), truth, pred);
        std::vector<double> qv(k);
        double s = 0.0;
        for (auto& v : qv) s += (v = 0.1 + static_cast<double>(lab(rng)));
        for (auto& v : qv) v /= s;
        const PriorClassDistribution q(qv);
        double ref = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            double tp = 0, fp = 0, fn = 0;
            for (std::size_t i = 0; i < n; ++i) {
                tp += truth[i] == c && pred[i] == c;
                fp += truth[i] != c && pred[i] == c;
                fn += truth[i] == c && pred[i] != c;
            }
            double f = 1.0;
            if (tp + fp + fn > 0) {
                const double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
                const double recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
                f = precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
            }
            ref += qv[c] * f;
        }
        const double got = f_beta(cm, q, 1.0);
        CHECK(std::abs(got - ref) <= 1e-12);
        CHECK(got >= 0.0);
        CHECK(got <= 1.0);
        bool diagonal = true;
        for (std::size_t i = 0; i < n; ++i) diagonal = diagonal && truth[i] == pred[i];
        if (!diagonal) CHECK(got < 1.0);
    }
}

TEST_CASE("normalised cross-entropy", "[metrics][xe]") {
    const Labels y{0, 0, 1, 2, 1, 0, 2, 2, 0, 1};
    const PriorClassDistribution q = PriorClassDistribution::from_labels(y, 3);
    CHECK(std::abs(xe_norm(prior_rows(q, y.size()), y, q) - 1.0) <= 1e-12);
    CHECK(xe_norm(one_hot(y, 3), y, q) <= 1e-10);
    CHECK(xe_norm(one_hot(y, 3), y, q) >= 0.0);

    Eigen::MatrixXd p(10, 3);
    p << 0.7, 0.2, 0.1, 0.5, 0.25, 0.25, 0.1, 0.8, 0.1, 0.0, 0.0, 1.0, 0.3, 0.3, 0.4,  //
        0.9, 0.05, 0.05, 0.2, 0.2, 0.6, 0.1, 0.1, 0.8, 0.35, 0.6, 0.05, 0.5, 0.0, 0.5;
    const std::vector<double> qv = q.values();
    CHECK(std::abs(xe_norm(p, y, q) - xe_reference(p, y, qv)) <= 1e-12);

    // a zero probability on the true class is clipped, not infinite
    Eigen::MatrixXd wrong = one_hot(Labels(10, 1), 3);
    CHECK(std::isfinite(xe_norm(wrong, y, q)));
    CHECK(xe_norm(wrong, y, q) > 1.0);
}

TEST_CASE("normalised Brier score", "[metrics][brier]") {
    // exact-frequency label multiset: 2, 3, 5 of 10
    const Labels y{0, 1, 1, 2, 2, 2, 2, 2, 0, 1};
    const PriorClassDistribution q = PriorClassDistribution::from_labels(y, 3);
    CHECK(std::abs(bs_norm(prior_rows(q, y.size()), y, q) - 1.0) <= 1e-12);
    CHECK(bs_norm(one_hot(y, 3), y, q) == 0.0);

    // hand case: K = 2, q = (0.5, 0.5) so the denominator is 0.5
    Eigen::MatrixXd p(4, 2);
    p << 0.8, 0.2, 0.4, 0.6, 0.5, 0.5, 1.0, 0.0;
    const Labels y2{0, 0, 1, 1};
    const double per_row[4] = {2 * 0.04, 2 * 0.36, 2 * 0.25, 2 * 1.0};
    const double expect = (per_row[0] + per_row[1] + per_row[2] + per_row[3]) / 4.0 / 0.5;
    CHECK(std::abs(bs_norm(p, y2, PriorClassDistribution({0.5, 0.5})) - expect) <= 1e-15);

    // class-order permutation
    Eigen::MatrixXd pp(10, 3);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    for (Eigen::Index i = 0; i < 10; ++i) {
        for (Eigen::Index k = 0; k < 3; ++k) pp(i, k) = u(rng);
        pp.row(i) /= pp.row(i).sum();
    }
    const std::size_t perm[3] = {2, 0, 1};
    Eigen::MatrixXd pq(10, 3);
    Labels yq;
    std::vector<double> qq(3);
    for (std::size_t k = 0; k < 3; ++k) {
        pq.col(static_cast<Eigen::Index>(perm[k])) = pp.col(static_cast<Eigen::Index>(k));
        qq[perm[k]] = q[k];
    }
    for (std::size_t l : y) yq.push_back(perm[l]);
    CHECK(std::abs(bs_norm(pp, y, q) - bs_norm(pq, yq, PriorClassDistribution(qq))) <= 1e-14);
    CHECK(bs_norm(pp, y, q) >= 0.0);
}

TEST_CASE("scoring input validation", "[metrics]") {
    const PriorClassDistribution q({0.5, 0.5});
    CHECK_THROWS_AS(bs_norm(Eigen::MatrixXd::Constant(2, 3, 1.0 / 3), Labels{0, 1}, q), DimensionError);
    CHECK_THROWS_AS(xe_norm(Eigen::MatrixXd::Constant(2, 2, 0.5), Labels{0}, q), DimensionError);
    CHECK_THROWS_AS(PriorClassDistribution({0.5, 0.6}), DataError);
    CHECK_THROWS_AS(PriorClassDistribution({1.0, 0.0}), DataError);
    CHECK_THROWS_AS(PriorClassDistribution::from_labels(Labels{0, 0}, 2), DataError);
}

TEST_CASE("report JSON carries every field", "[metrics][report]") {
    const Labels y{0, 1, 1, 2};
    ProbabilityTable t;
    t.probabilities = one_hot(Labels{0, 1, 2, 2}, 3);
    t.pixel_ids = {10, 11, 12, 13};
    const auto q = PriorClassDistribution::from_labels(y, 3);
    const EvalReport r = evaluate_table(t, y, cat(3), q, {{"model_kind", "bqda"}});
    const nlohmann::json j = to_json(r);
    for (const char* key : {"format_version", "metadata", "num_pixels", "classes", "prior", "f1", "f2", "xe_norm",
                            "bs_norm", "confusion", "per_class"}) {
        CHECK(j.contains(key));
    }
    CHECK(j["num_pixels"] == 4);
    CHECK(j["confusion"][1][2] == 1);
    CHECK(j["per_class"][2]["fp"] == 1);
    CHECK(j["metadata"]["model_kind"] == "bqda");

    std::ostringstream s;
    write_probability_csv(s, t, cat(3), {"c0", "c1", "c1", "c2"});
    const ProbabilityTable back = parse_probability_csv(s.str(), cat(3));
    CHECK(back.pixel_ids == t.pixel_ids);
    CHECK(back.probabilities == t.probabilities);
    CHECK_THROWS_AS(parse_probability_csv("pixel_id,label,p_x,p_y,p_z\n", cat(3)), DataError);

    std::ostringstream c;
    write_confusion_csv(c, r.confusion);
    CHECK(c.str().rfind("true\\predicted,c0,c1,c2\nc0,1,0,0\n", 0) == 0);
}

TEST_CASE("PCA on a line, an isotropic cloud and a concentrated cube", "[metrics][pca]") {
    Eigen::MatrixXd line(50, 2);
    for (int i = 0; i < 50; ++i) line.row(i) << i * 0.1, 3.0 - i * 0.2;
    const PCAResult a = pca_project(line, 2);
    CHECK_THAT(a.explained(0), WithinAbs(1.0, 1e-10));
    CHECK(a.explained(0) >= a.explained(1));
    // sign convention: largest-magnitude loading positive
    for (Eigen::Index c = 0; c < 2; ++c) {
        Eigen::Index top = 0;
        a.components.col(c).cwiseAbs().maxCoeff(&top);
        CHECK(a.components(top, c) > 0.0);
    }

    std::mt19937_64 rng(7);
    const Eigen::MatrixXd iso = oracle::random_normal_rows(10000, Eigen::Vector2d(1, -1), Eigen::MatrixXd::Identity(2, 2), rng);
    const PCAResult b = pca_project(iso, 2);
    CHECK_THAT(b.explained(0), WithinAbs(0.5, 0.05));
    CHECK_THAT(b.explained(1), WithinAbs(0.5, 0.05));

    // variance concentrated in a 2-D subspace of 10 bands
    const int p = 10;
    Eigen::MatrixXd basis = Eigen::MatrixXd::Random(p, 2);
    Eigen::MatrixXd cov = basis * basis.transpose() + 1e-4 * Eigen::MatrixXd::Identity(p, p);
    const Eigen::MatrixXd cube = oracle::random_normal_rows(5000, Eigen::VectorXd::Zero(p), cov, rng);
    const PCAResult c = pca_project(cube, 2);
    CHECK(c.explained.sum() > 0.99);
    CHECK(c.scores.rows() == 5000);
    CHECK((c.transform(cube) - c.scores).cwiseAbs().maxCoeff() < 1e-12);

    // residual is non-increasing in the number of components
    double previous = std::numeric_limits<double>::infinity();
    const Eigen::MatrixXd centered = cube.rowwise() - cube.colwise().mean();
    for (std::size_t m = 1; m <= static_cast<std::size_t>(p); ++m) {
        const PCAResult r = pca_project(cube, m);
        const double residual = (centered - r.scores * r.components.transpose()).squaredNorm();
        CHECK(residual <= previous + 1e-9);
        previous = residual;
    }
    CHECK(previous < 1e-18 * centered.squaredNorm() + 1e-9);

    CHECK_THROWS_WITH(pca_project(Eigen::MatrixXd::Constant(5, 3, 2.0)), ContainsSubstring("zero variance"));
    CHECK_THROWS_AS(pca_project(Eigen::MatrixXd::Random(1, 3)), DataError);
    CHECK_THROWS_AS(pca_project(Eigen::MatrixXd::Random(5, 3), 4), DataError);
}
