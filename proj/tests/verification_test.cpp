#include "absorb/verification.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "absorb/planar.hpp"
#include "test_util.hpp"

namespace absorb {
namespace {

using testing::scalar;
using testing::vec;

constexpr std::size_t kSamples = 10000;

class PlanarChecks : public ::testing::Test {
 protected:
  planar::Example ex = testing::default_planar();
  const PlantModel& plant = ex.plant;
  const AssumptionData& assm = ex.assm;
};

// --- samplers --------------------------------------------------------------

TEST(Halton, UnitCubeAndSeeded) {
  HaltonSequence a(5, 9);
  HaltonSequence b(5, 9);
  HaltonSequence c(5, 10);
  bool differs = false;
  for (int i = 0; i < 1000; ++i) {
    const Vector p = a.next();
    EXPECT_TRUE((p.array() >= 0.0).all() && (p.array() < 1.0).all());
    EXPECT_EQ(p, b.next());
    differs = differs || p != c.next();
  }
  EXPECT_TRUE(differs);
}

TEST(SublevelBox, QuadraticLevelSet) {
  const auto [lo, hi] = sublevel_box(
      [](const Vector& x) { return 0.5 * x.squaredNorm(); }, 2, 1.0);
  for (int i = 0; i < 2; ++i) {
    EXPECT_GE(hi(i), std::sqrt(2.0));
    EXPECT_NEAR(hi(i), std::sqrt(2.0), 1e-9);
    EXPECT_LE(lo(i), -std::sqrt(2.0));
    EXPECT_NEAR(lo(i), -std::sqrt(2.0), 1e-9);
  }
}

TEST_F(PlanarChecks, SamplesMeetSideConditions) {
  const auto set = sample_h4(plant, assm, 2000, 4);
  ASSERT_EQ(set.points.size(), 2000u);
  for (const auto& p : set.points) {
    const double vz = assm.V(p.segment(0, 2));
    EXPECT_GT(vz, assm.a);
    EXPECT_LE(vz, assm.b);
    EXPECT_LE(assm.V(p.segment(2, 2)), assm.R);
    EXPECT_TRUE(plant.input_box.contains(p.tail(1)));
  }
}

TEST(RunCheck, EmptyPointSetIsConfigError) {
  EXPECT_THROW(run_check("x", {}, [](const Vector&) { return 0.0; }, 1e-9, 0),
               ConfigError);
}

TEST(RunCheck, PassIffWorstWithinTolerance) {
  const std::vector<Vector> pts = {scalar(-1.0), scalar(2e-9), scalar(-3.0)};
  auto id = [](const Vector& p) -> std::optional<double> { return p(0); };
  const auto loose = run_check("x", pts, id, 1e-8, 0);
  EXPECT_TRUE(loose.pass);
  EXPECT_EQ(loose.worst_margin, 2e-9);
  EXPECT_EQ(loose.worst_point, scalar(2e-9));
  EXPECT_FALSE(run_check("x", pts, id, 1e-9, 0).pass);
}

// --- H1 --------------------------------------------------------------------

TEST_F(PlanarChecks, H1HandPoint) {
  const auto m = margin_h1(plant, assm, vec({3, 0, 0}));
  ASSERT_TRUE(m.has_value());
  EXPECT_NEAR(*m, -808.785, 1e-9);
}

TEST_F(PlanarChecks, H1Grid) {
  const auto rep = check_h1(plant, assm, sample_h1(plant, assm, kSamples, 1));
  EXPECT_TRUE(rep.pass) << rep.worst_margin;
  EXPECT_EQ(rep.points_tested, kSamples);
}

TEST(H1, CounterexampleOutsideZetaBound) {
  const auto bad = planar::make_example_unchecked(0.2);
  const auto m = margin_h1(bad.plant, bad.assm, vec({0, std::sqrt(2.0), 14.14}));
  ASSERT_TRUE(m.has_value());
  EXPECT_NEAR(*m, 13.746979771955564, 1e-12);
  const auto rep = check_h1(bad.plant, bad.assm, sample_h1(bad.plant, bad.assm, 2000, 1));
  EXPECT_FALSE(rep.pass);
  EXPECT_GT(rep.worst_margin, 0.0);
}

// --- H2 --------------------------------------------------------------------

TEST_F(PlanarChecks, H2AtOrigin) {
  const auto m = margin_h2(plant, assm, vec({0, 0}));
  ASSERT_TRUE(m.has_value());
  EXPECT_EQ(*m, 0.0);
}

TEST_F(PlanarChecks, H2Grid) {
  const auto rep = check_h2(plant, assm, sample_h2(plant, assm, kSamples, 2));
  EXPECT_TRUE(rep.pass) << rep.worst_margin;
}

TEST_F(PlanarChecks, H2SignFlippedControllerFails) {
  // The flipped law destabilizes the linearization; the violating strip hugs
  // the origin, so the grid is drawn from a small sublevel set of S1.
  AssumptionData flipped = assm;
  flipped.k_local = [k = assm.k_local](const Vector& x) { return Vector(-k(x)); };
  const auto set = draw_samples({SampleBlock::sublevel(2, 0.005)}, assm.V, kSamples, 2);
  const auto rep = check_h2(plant, flipped, set);
  EXPECT_FALSE(rep.pass);
  EXPECT_GT(rep.worst_margin, 0.0);
  EXPECT_TRUE(check_h2(plant, assm, set).pass);
}

// --- H3 --------------------------------------------------------------------

TEST_F(PlanarChecks, H3DiagonalIsZero) {
  const auto m = margin_h3(plant, assm, vec({0.3, -0.2, 0.3, -0.2, 0.5}));
  ASSERT_TRUE(m.has_value());
  EXPECT_EQ(*m, 0.0);
}

TEST_F(PlanarChecks, H3HandPoint) {
  const auto m = margin_h3(plant, assm, vec({1, 1, 0, 0, 0}));
  ASSERT_TRUE(m.has_value());
  EXPECT_NEAR(*m, -13.24, 1e-12);
}

TEST_F(PlanarChecks, H3Grid) {
  const auto rep = check_h3(plant, assm, sample_h3(plant, assm, kSamples, 3));
  EXPECT_TRUE(rep.pass) << rep.worst_margin;
}

// --- H4 --------------------------------------------------------------------

TEST_F(PlanarChecks, H4IsVacuousWithIdentityMetric) {
  // With Q = I the sign condition gradV(z) Q (z - x) < 0 needs |z|^2 < z.x,
  // which V(z) > a >= R >= V(x) rules out.
  EXPECT_THROW(check_h4(plant, assm, sample_h4(plant, assm, 2000, 4)),
               InsufficientDataError);
}

TEST_F(PlanarChecks, H4HandPointWithWeightedMetric) {
  AssumptionData weighted = assm;
  weighted.Q = Matrix::Identity(2, 2);
  weighted.Q(1, 1) = 10.0;
  ASSERT_NO_THROW(validate(weighted, plant));
  const Vector p = vec({1.4, 0.5, 0.0, 1.4, 0.0});
  const Vector z = p.segment(0, 2);
  const Vector x = p.segment(2, 2);
  EXPECT_NEAR(assm.grad_V(z).dot(weighted.Q * (z - x)), -2.54, 1e-12);
  const auto m = margin_h4(plant, weighted, p);
  ASSERT_TRUE(m.has_value());
  EXPECT_NEAR(*m, -62.21191417322834, 1e-10);
  const auto rep = run_check(
      "H4", {p}, [&](const Vector& q) { return margin_h4(plant, weighted, q); }, 1e-9, 0);
  EXPECT_EQ(rep.worst_margin, *m);
}

TEST_F(PlanarChecks, H4SkipsWrongSign) {
  AssumptionData weighted = assm;
  weighted.Q(1, 1) = 10.0;
  const std::vector<Vector> pts = {vec({1.4, 0.5, 0.0, 1.4, 0.0}),
                                   vec({1.4, 0.5, 0.0, 0.0, 0.0})};
  const auto rep = check_h4(plant, weighted, SampleSet{pts, 0, 0});
  EXPECT_EQ(rep.points_tested, 1u);
  EXPECT_EQ(rep.skipped, 1u);
}

TEST_F(PlanarChecks, H4SufficientGrid) {
  const auto rep =
      check_h4_sufficient(plant, assm, sample_h4(plant, assm, kSamples, 4));
  EXPECT_TRUE(rep.pass) << rep.worst_margin;
  EXPECT_EQ(rep.points_tested, kSamples);
}

TEST_F(PlanarChecks, H4SufficientBoundsH4WhereAdmissible) {
  AssumptionData weighted = assm;
  weighted.Q(1, 1) = 10.0;
  const auto set = sample_h4(plant, weighted, 4000, 8);
  std::size_t admissible = 0;
  for (const auto& p : set.points) {
    const auto full = margin_h4(plant, weighted, p);
    if (!full) continue;
    ++admissible;
    // The H4 margin subtracts a non-negative multiple of the H3 left side
    // divided by a negative number; where H3 holds with Q it stays below.
    const double h3 = detail::local_observer_contraction(
        plant, weighted, p.segment(0, 2), p.segment(2, 2), p.tail(1));
    if (h3 <= 0.0) EXPECT_LE(*full, *margin_h4_sufficient(plant, weighted, p) + 1e-12);
  }
  EXPECT_GT(admissible, 0u);
}

// --- A1 and dissipation ----------------------------------------------------

TEST_F(PlanarChecks, A1DiagonalIsZero) {
  const auto m = margin_contraction_a1(plant, assm, ex.blend, vec({0.3, 0.4, 0.3, 0.4, 0.1}));
  ASSERT_TRUE(m.has_value());
  EXPECT_EQ(*m, 0.0);
}

TEST_F(PlanarChecks, A1Grid) {
  const auto rep =
      check_contraction_a1(plant, assm, ex.blend, sample_a1(plant, assm, kSamples, 5));
  EXPECT_TRUE(rep.pass) << rep.worst_margin;
}

TEST_F(PlanarChecks, A1FailsWithFractionAboveOne) {
  AssumptionData strict = assm;
  strict.c = 1.25;
  const double ub = plant.input_box.hi(0);
  const auto set = draw_samples(
      {SampleBlock::box(Vector::Constant(2, -0.005), Vector::Constant(2, 0.005)),
       SampleBlock::box(Vector::Constant(2, -0.005), Vector::Constant(2, 0.005)),
       SampleBlock::box(scalar(-ub), scalar(ub))},
      assm.V, kSamples, 5);
  const auto rep = check_contraction_a1(plant, strict, ex.blend, set);
  EXPECT_FALSE(rep.pass);
  EXPECT_GT(rep.worst_margin, 1e-9);
}

TEST_F(PlanarChecks, DissipationGrid) {
  const auto rep = check_dissipation_37(plant, assm, ex.blend,
                                        sample_dissipation(plant, assm, kSamples, 6));
  EXPECT_TRUE(rep.pass) << rep.worst_margin;
}

TEST(Dissipation, DampingCancelsExcessWithMatchingOutput) {
  // For zeta = 0.01, H1 already keeps gradV f + W <= 0 above R. Outside the
  // zeta bound it does not, and with w = h(z) the damping alone has to
  // cancel the excess.
  auto bad = planar::make_example_unchecked(0.2, 60.0);
  bad.assm.b = 1.0;
  std::mt19937_64 rng(7);
  const double ub = bad.plant.input_box.hi(0);
  std::size_t excess = 0;
  for (int i = 0; i < 10000; ++i) {
    const Vector z = testing::random_vector(rng, 2, -2.0, 2.0);
    if (bad.assm.V(z) < bad.assm.b) continue;
    const Vector u = testing::random_vector(rng, 1, -ub, ub);
    if (bad.assm.grad_V(z).dot(bad.plant.f(z, u)) + bad.assm.W(z) > 0.0) ++excess;
    const Vector p = (Vector(4) << z, bad.plant.h(z), u).finished();
    const auto m = margin_dissipation(bad.plant, bad.assm, bad.blend, p);
    ASSERT_TRUE(m.has_value());
    EXPECT_LE(*m, 1e-9);
  }
  EXPECT_GT(excess, 100u);
}

TEST_F(PlanarChecks, DissipationAblationFails) {
  const auto rep =
      check_dissipation_37(plant, assm, ex.blend, sample_dissipation(plant, assm, kSamples, 6),
                           kDefaultTolerance, Damping::kDisabled);
  EXPECT_FALSE(rep.pass);
}

TEST_F(PlanarChecks, WorstPointsReproduce) {
  const auto h1 = check_h1(plant, assm, sample_h1(plant, assm, 2000, 11));
  EXPECT_NEAR(*margin_h1(plant, assm, h1.worst_point), h1.worst_margin, 1e-12);
  const auto h3 = check_h3(plant, assm, sample_h3(plant, assm, 2000, 11));
  EXPECT_NEAR(*margin_h3(plant, assm, h3.worst_point), h3.worst_margin, 1e-12);
  const auto a1 =
      check_contraction_a1(plant, assm, ex.blend, sample_a1(plant, assm, 2000, 11));
  EXPECT_NEAR(*margin_contraction_a1(plant, assm, ex.blend, a1.worst_point),
              a1.worst_margin, 1e-12);
}

TEST_F(PlanarChecks, SeededReportsAreDeterministic) {
  const auto a = check_h3(plant, assm, sample_h3(plant, assm, 2000, 12));
  const auto b = check_h3(plant, assm, sample_h3(plant, assm, 2000, 12));
  EXPECT_EQ(a.worst_margin, b.worst_margin);
  EXPECT_EQ(a.worst_point, b.worst_point);
  EXPECT_EQ(a.seed, 12u);
}

// --- derivative checks -----------------------------------------------------

TEST(DerivativeChecks, DetectWrongGradient) {
  const ScalarMap V = [](const Vector& x) { return 0.5 * x.squaredNorm(); };
  const std::vector<Vector> pts = {vec({1, 2}), vec({-0.5, 0.25})};
  EXPECT_LT(gradient_mismatch(V, [](const Vector& x) { return Vector(x); }, pts), 1e-8);
  EXPECT_GT(gradient_mismatch(V, [](const Vector& x) { return Vector(2.0 * x); }, pts),
            0.1);
}

// --- convergence study -----------------------------------------------------

TEST(ConvergenceStudy, ZeroDataGivesZeroErrors) {
  const auto ex = testing::default_planar(0.5, 0.5);
  const InputHistory hist(-1.0, 0.0, scalar(0.0));
  for (const auto& p : predictor_convergence_study(ex.plant, vec({0, 0}), hist,
                                                   {8, 16, 32, 64})) {
    EXPECT_EQ(p.error, 0.0);
  }
}

TEST(ConvergenceStudy, PlanarFirstOrder) {
  const auto ex = testing::default_planar(0.5, 0.5);
  const auto hist = InputHistory::from_segments(
      {{-1.0, scalar(0.05)}, {-0.6, scalar(-0.1)}, {-0.2, scalar(0.2)}}, 0.0);
  const auto study =
      predictor_convergence_study(ex.plant, vec({0.5, -0.3}), hist, {8, 16, 32, 64});
  // Reference values come from an independent adaptive integrator.
  const std::array<double, 4> expected = {0.02477259427887275, 0.011002165947286134,
                                          0.005276232738176013, 0.002606682939074242};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(study[i].error, expected[i], 1e-9) << "N = " << study[i].N;
    if (i > 0) EXPECT_LT(study[i].error, study[i - 1].error);
  }
  const double ratio = study[2].error / study[3].error;
  EXPECT_GE(ratio, 1.6);
  EXPECT_LE(ratio, 2.4);
}

TEST(ConvergenceStudy, ScalarClosedForm) {
  const PlantModel plant = testing::scalar_plant(
      [](const Vector& x, const Vector&) { return Vector(-x); }, 0.0, 1.0);
  const InputHistory hist(-1.0, 0.0, scalar(0.0));
  const auto study = predictor_convergence_study(plant, scalar(1.0), hist, {8, 16, 32, 64});
  const std::array<double, 4> frozen = {0.024270525365625684, 0.01180531071964952,
                                        0.005824151915125753, 0.0028929169275349054};
  for (std::size_t i = 0; i < 4; ++i) {
    const double N = study[i].N;
    EXPECT_NEAR(study[i].error, std::abs(std::exp(-1.0) - std::pow(1.0 - 1.0 / N, N)),
                1e-12);
    EXPECT_NEAR(study[i].error, frozen[i], 1e-12);
  }
}

TEST(ConvergenceStudy, RejectsBadArguments) {
  const PlantModel plant = testing::scalar_plant(
      [](const Vector& x, const Vector&) { return Vector(-x); }, 0.0, 1.0);
  const InputHistory hist(-1.0, 0.0, scalar(0.0));
  EXPECT_THROW(predictor_convergence_study(plant, scalar(1.0), hist, {8}, 1e-3),
               ConfigError);
  EXPECT_THROW(predictor_convergence_study(plant, scalar(1.0), hist, {16, 8}),
               ConfigError);
  const InputHistory short_hist(-0.5, 0.0, scalar(0.0));
  EXPECT_THROW(predictor_convergence_study(plant, scalar(1.0), short_hist, {8}),
               CoverageError);
}

}  // namespace
}  // namespace absorb
