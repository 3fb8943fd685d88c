#include <doctest.h>

#include <random>

#include "relcal/calibrate.hpp"
#include "relcal/errors.hpp"
#include "test_util.hpp"

using namespace relcal;
using namespace testutil;

namespace {

Priorities make_prio(const VectorXd& p, double r) { return Priorities{p, r}; }

// Independent minimizer oracle: form H densely and solve H u = s.
VectorXd dense_calibrate(const MatrixXd& x, const VectorXd& t, double n_pop, const VectorXd& w,
                         const VectorXd& p, double r) {
  const Eigen::Index n = x.rows();
  const MatrixXd h = dense_h(x, p);
  const VectorXd s = r * w +
                     (1.0 - r) * (n_pop / static_cast<double>(n)) * VectorXd::Ones(n) +
                     x * p.cwiseProduct(t);
  return h.partialPivLu().solve(s);
}

}  // namespace

TEST_CASE("standardize: hand-computed case") {
  // column 1..10, N = 100, raw target 550
  MatrixXd raw(10, 1);
  for (int i = 0; i < 10; ++i) raw(i, 0) = i + 1.0;
  const VectorXd targets = VectorXd::Constant(1, 550.0);
  const VectorXd w = VectorXd::Constant(10, 10.0);
  const StandardizedDesign d = standardize(raw, targets, 100.0, w);
  CHECK(d.means(0) == doctest::Approx(5.5).epsilon(1e-15));
  CHECK(d.sds(0) == doctest::Approx(2.8722813232690143).epsilon(1e-15));  // sqrt(8.25)
  CHECK(std::abs(d.t(1)) < 1e-12);
  CHECK(d.t(0) == 100.0);
  CHECK(std::abs(d.X.col(1).sum()) < 1e-12);
  CHECK(d.X.col(1).squaredNorm() == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("standardize: already standardized column is a fixed point") {
  std::mt19937_64 rng(31);
  const Eigen::Index n = 24;
  const MatrixXd base = standardized_design_matrix(rng, n, 1);
  MatrixXd raw(n, 1);
  raw.col(0) = base.col(1);
  const double t_raw = 123.4;
  const StandardizedDesign d =
      standardize(raw, VectorXd::Constant(1, t_raw), 1000.0, VectorXd::Constant(n, 5.0));
  CHECK(rel_err(d.X.col(1), raw.col(0)) < 1e-12);
  CHECK(d.t(1) == doctest::Approx(t_raw).epsilon(1e-12));
}

TEST_CASE("standardize: invariant under affine transformation of a column") {
  std::mt19937_64 rng(32);
  const Eigen::Index n = 30;
  const double n_pop = 900.0;
  const VectorXd w = VectorXd::Constant(n, 30.0);
  MatrixXd raw(n, 1);
  raw.col(0) = random_vector(rng, n, 2.0);
  const double t_raw = 510.0;

  const double a = 3.25, b = -7.5;
  MatrixXd raw2(n, 1);
  raw2.col(0) = a * raw.col(0).array() - b;
  const double t_raw2 = a * t_raw - b * n_pop;

  const StandardizedDesign d1 = standardize(raw, VectorXd::Constant(1, t_raw), n_pop, w);
  const StandardizedDesign d2 = standardize(raw2, VectorXd::Constant(1, t_raw2), n_pop, w);
  CHECK(rel_err(d2.X.col(1), d1.X.col(1)) < 1e-12);
  CHECK(d2.t(1) == doctest::Approx(d1.t(1)).epsilon(1e-12));
}

TEST_CASE("standardize rejects bad input") {
  MatrixXd raw = MatrixXd::Ones(8, 1);  // zero variance
  const VectorXd t = VectorXd::Zero(1);
  const VectorXd w = VectorXd::Ones(8);
  CHECK_THROWS_AS(standardize(raw, t, 100.0, w), DegenerateInputError);

  std::mt19937_64 rng(33);
  MatrixXd ok(8, 1);
  ok.col(0) = random_vector(rng, 8);
  CHECK_THROWS_AS(standardize(ok, t, 0.0, w), DegenerateInputError);
  CHECK_THROWS_AS(standardize(ok, t, -5.0, w), DegenerateInputError);
}

TEST_CASE("standardize names duplicated columns") {
  std::mt19937_64 rng(34);
  MatrixXd raw(20, 3);
  raw.col(0) = random_vector(rng, 20);
  raw.col(1) = random_vector(rng, 20);
  raw.col(2) = 2.0 * raw.col(0).array() + 1.0;  // affine duplicate of column 0
  const VectorXd t = VectorXd::Zero(3);
  const VectorXd w = VectorXd::Ones(20);
  try {
    standardize(raw, t, 100.0, w);
    FAIL("expected RankDeficiencyError");
  } catch (const RankDeficiencyError& e) {
    REQUIRE(e.duplicate_pairs.size() >= 1);
    CHECK(e.duplicate_pairs[0].first == 1);
    CHECK(e.duplicate_pairs[0].second == 3);
  }
}

TEST_CASE("calibrate: no penalties and R=1 returns the design weights") {
  std::mt19937_64 rng(35);
  const StandardizedDesign d = random_design(rng, 20, 2);
  const VectorXd w = positive_weights(rng, 20);
  const CalibrationResult res = calibrate_weights(d, w, make_prio(VectorXd::Zero(3), 1.0));
  CHECK(rel_err(res.u, w) < 1e-12);
}

TEST_CASE("calibrate: no penalties blends weights with the mean-weight vector") {
  std::mt19937_64 rng(36);
  const StandardizedDesign d = random_design(rng, 20, 2);
  const VectorXd w = positive_weights(rng, 20);
  const CalibrationResult res = calibrate_weights(d, w, make_prio(VectorXd::Zero(3), 0.5));
  const VectorXd want =
      0.5 * w + 0.5 * (d.n_pop / 20.0) * VectorXd::Ones(20);
  CHECK(rel_err(res.u, want) < 1e-12);
}

TEST_CASE("calibrate matches the dense minimizer") {
  std::mt19937_64 rng(37);
  const StandardizedDesign d = random_design(rng, 30, 3);
  const VectorXd w = positive_weights(rng, 30);
  const VectorXd p = nonneg_priorities(rng, 4);
  const CalibrationResult res = calibrate_weights(d, w, make_prio(p, 0.4));
  const VectorXd want = dense_calibrate(d.X, d.t, d.n_pop, w, p, 0.4);
  CHECK(rel_err(res.u, want) < 1e-10);
}

TEST_CASE("first-order optimality and oracle equivalence on random instances") {
  std::mt19937_64 rng(38);
  std::uniform_int_distribution<int> nd(8, 50), kd(0, 5);
  std::uniform_real_distribution<double> rd(0.0, 1.0);
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::Index n = nd(rng);
    const Eigen::Index k = std::min<Eigen::Index>(kd(rng), (n - 2) / 3);
    const StandardizedDesign d = random_design(rng, n, k);
    const VectorXd w = positive_weights(rng, n);
    const VectorXd p = nonneg_priorities(rng, k + 1);
    const double r = rd(rng);
    const CalibrationResult res = calibrate_weights(d, w, make_prio(p, r));

    const VectorXd want = dense_calibrate(d.X, d.t, d.n_pop, w, p, r);
    CHECK(rel_err(res.u, want) < 1e-10);

    // gradient of the objective: 2 (H u - s)
    const VectorXd s = r * w + (1.0 - r) * (d.n_pop / static_cast<double>(n)) * VectorXd::Ones(n) +
                       d.X * p.cwiseProduct(d.t);
    const VectorXd grad = 2.0 * (dense_h(d.X, p) * res.u - s);
    CHECK(grad.cwiseAbs().maxCoeff() < 1e-8 * s.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("objective: penalty-sum form against direct cases") {
  std::mt19937_64 rng(39);
  const StandardizedDesign d = random_design(rng, 15, 2);
  const VectorXd w = positive_weights(rng, 15);
  CHECK(objective_value(d, w, make_prio(VectorXd::Zero(3), 1.0), w) == doctest::Approx(0.0));
}

TEST_CASE("objective: penalty-sum equals the expanded quadratic form") {
  std::mt19937_64 rng(40);
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::Index n = 18;
    const StandardizedDesign d = random_design(rng, n, 3);
    const VectorXd w = positive_weights(rng, n);
    const VectorXd p = nonneg_priorities(rng, 4);
    const double r = 0.35;
    const VectorXd u = random_vector(rng, n, 20.0);
    const double direct = objective_value(d, w, make_prio(p, r), u);

    const VectorXd s = r * w + (1.0 - r) * (d.n_pop / static_cast<double>(n)) * VectorXd::Ones(n) +
                       d.X * p.cwiseProduct(d.t);
    const double dconst = d.t.dot(p.cwiseProduct(d.t)) + r * w.squaredNorm() +
                          (1.0 - r) * d.n_pop * d.n_pop / static_cast<double>(n);
    const double expanded = u.dot(dense_h(d.X, p) * u) - 2.0 * u.dot(s) + dconst;
    CHECK(std::abs(direct - expanded) < 1e-9 * std::max(1.0, std::abs(direct)));
  }
}

TEST_CASE("discrepancies: definition checks") {
  std::mt19937_64 rng(41);
  const StandardizedDesign d = random_design(rng, 16, 2);
  const VectorXd w = positive_weights(rng, 16);

  // with u scaled so the intercept total matches, delta_0 vanishes
  VectorXd u = w * (d.t(0) / w.sum());
  CHECK(std::abs(discrepancies(d, u)(0)) < 1e-9 * d.t(0));

  // pre-calibration discrepancies are X^T w - t by definition
  const VectorXd pre = discrepancies(d, w);
  CHECK(rel_err(pre, VectorXd(d.X.transpose() * w - d.t)) < 1e-15);
}

TEST_CASE("estimate_total basics") {
  std::mt19937_64 rng(42);
  const VectorXd w = positive_weights(rng, 12);
  CHECK(estimate_total(w, VectorXd::Zero(12)) == 0.0);
  const VectorXd y = random_vector(rng, 12);
  CHECK(estimate_total(w, y) == doctest::Approx(w.dot(y)).epsilon(1e-15));
  CHECK_THROWS_AS(estimate_total(w, VectorXd::Zero(5)), DimensionError);
}

TEST_CASE("transform_design: identity and diagonal scalings") {
  std::mt19937_64 rng(43);
  const StandardizedDesign d = random_design(rng, 20, 2);
  const Priorities prio = make_prio(nonneg_priorities(rng, 3, 0.0), 0.5);

  const TransformedDesign id = transform_design(d, prio, MatrixXd::Identity(3, 3));
  CHECK(rel_err(id.t, d.t) < 1e-14);
  CHECK((id.X - d.X).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((id.P - MatrixXd(prio.p.asDiagonal())).cwiseAbs().maxCoeff() < 1e-12);

  VectorXd diag(3);
  diag << 1.0, 2.0, 3.0;
  const TransformedDesign sc = transform_design(d, prio, MatrixXd(diag.asDiagonal()));
  for (int j = 0; j < 3; ++j) {
    CHECK(rel_err(sc.X.col(j), VectorXd(diag(j) * d.X.col(j))) < 1e-14);
    CHECK(sc.t(j) == doctest::Approx(diag(j) * d.t(j)).epsilon(1e-12));
    CHECK(sc.P(j, j) == doctest::Approx(prio.p(j) / (diag(j) * diag(j))).epsilon(1e-12));
  }
}

TEST_CASE("transform_design rejects singular transforms") {
  std::mt19937_64 rng(44);
  const StandardizedDesign d = random_design(rng, 20, 2);
  const Priorities prio = make_prio(VectorXd::Ones(3), 0.5);
  MatrixXd e = MatrixXd::Zero(3, 3);
  e(0, 0) = 1.0;
  e(1, 1) = 1.0;  // third row/column zero
  CHECK_THROWS_AS(transform_design(d, prio, e), DegenerateInputError);
}

TEST_CASE("calibration is invariant under random basis changes") {
  std::mt19937_64 rng(45);
  std::uniform_real_distribution<double> rd(0.1, 0.9);
  for (int rep = 0; rep < 25; ++rep) {
    const StandardizedDesign d = random_design(rng, 30, 3);
    const VectorXd w = positive_weights(rng, 30);
    const Priorities prio = make_prio(nonneg_priorities(rng, 4, 0.0), rd(rng));
    const CalibrationResult base = calibrate_weights(d, w, prio);

    // keep the transform comfortably conditioned
    MatrixXd e;
    for (;;) {
      e = random_matrix(rng, 4, 4) + 2.5 * MatrixXd::Identity(4, 4);
      Eigen::JacobiSVD<MatrixXd> svd(e);
      if (svd.singularValues().minCoeff() > 1e-3 * svd.singularValues().maxCoeff()) break;
    }
    const TransformedDesign tf = transform_design(d, prio, e);
    const CalibrationResult moved = calibrate_weights(tf.X, tf.t, tf.n_pop, w, tf.P, prio.R);
    CHECK(rel_err(moved.u, base.u) < 1e-9);
  }
}

TEST_CASE("raising a priority does not increase its own discrepancy") {
  std::mt19937_64 rng(46);
  const StandardizedDesign d = random_design(rng, 40, 3);
  const VectorXd w = positive_weights(rng, 40);
  VectorXd p = VectorXd::Constant(4, 0.05);
  double previous = std::numeric_limits<double>::infinity();
  for (double pk : {0.0, 0.01, 0.1, 0.5, 2.0, 10.0, 100.0}) {
    p(2) = pk;
    const CalibrationResult res = calibrate_weights(d, w, make_prio(p, 0.5));
    const double now = std::abs(res.deltas(2));
    CHECK(now <= previous * (1.0 + 1e-12));
    previous = now;
  }
}

TEST_CASE("calibrate validates inputs") {
  std::mt19937_64 rng(47);
  const StandardizedDesign d = random_design(rng, 10, 1);
  VectorXd w = positive_weights(rng, 10);
  w(3) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(calibrate_weights(d, w, make_prio(VectorXd::Ones(2), 0.5)),
                  DegenerateInputError);
  CHECK_THROWS_AS(calibrate_weights(d, positive_weights(rng, 10),
                                    make_prio(VectorXd::Ones(3), 0.5)),
                  DimensionError);
  CHECK_THROWS_AS(calibrate_weights(d, positive_weights(rng, 10),
                                    make_prio(VectorXd::Ones(2), 1.5)),
                  DegenerateInputError);
}
