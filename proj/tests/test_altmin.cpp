#include "test_util.hpp"

#include <ds2p/altmin.hpp>
#include <ds2p/deepfact.hpp>
#include <ds2p/genmodel.hpp>

#include <gtest/gtest.h>

using namespace ds2p;

namespace {

struct ShallowRun
{
    DeepModelInstance inst;
    AltMinResult result;
};

ShallowRun shallow_run(std::uint64_t seed, double snr_db)
{
    ShallowRun run{synthesize(DeepModelSpec::shallow(50, 100, 3), 1500, seed), {}};
    const auto inits = initial_dictionaries(run.inst, FactorMode::forward, alpha_from_snr_db(snr_db), seed);
    AltMinConfig cfg;
    cfg.max_iterations = 10;
    run.result = altmin_dict(run.inst.observations, inits[0], cfg, 3, run.inst.dicts[0]);
    return run;
}

} // namespace

TEST(HardThreshold, Examples)
{
    Matrix x(2, 2);
    x << 1, -2, 0.1, 0.3;
    EXPECT_EQ(hard_threshold(x, 0.0), x);
    Matrix want(2, 2);
    want << 1, -2, 0, 0;
    EXPECT_EQ(hard_threshold(x, 0.5), want);
    const Matrix r = testutil::gaussian(4, 5, 1);
    EXPECT_EQ(hard_threshold(r, r.cwiseAbs().maxCoeff()), Matrix::Zero(4, 5));
    EXPECT_THROW(hard_threshold(x, -1.0), ParameterError);
}

TEST(HardThreshold, SurvivorsExceedThreshold)
{
    const Matrix r = testutil::gaussian(30, 30, 2);
    const Matrix t = hard_threshold(r, 0.7);
    for (Index i = 0; i < t.size(); ++i) {
        if (t.data()[i] != 0.0) EXPECT_GT(std::abs(t.data()[i]), 0.7);
    }
}

TEST(DictError, Examples)
{
    const Matrix a = testutil::gaussian(6, 4, 3);
    EXPECT_NEAR(dict_error(a, a), 0.0, 1e-7);
    EXPECT_NEAR(dict_error(-a, a), 0.0, 1e-7);
    Matrix e1(2, 1);
    e1 << 1, 0;
    Matrix e2(2, 1);
    e2 << 0, 1;
    EXPECT_DOUBLE_EQ(dict_error(e1, e2), 1.0);
}

TEST(DictError, SignFlipInvariance)
{
    Rng rng(4);
    const Matrix a = testutil::gaussian(8, 10, 5);
    const Matrix b = a + 0.1 * testutil::gaussian(8, 10, 6);
    const double base = dict_error(b, a);
    for (int k = 0; k < 20; ++k) {
        Matrix fb = b;
        Matrix fa = a;
        for (Index j = 0; j < 10; ++j) {
            fb.col(j) *= rng.rademacher();
            fa.col(j) *= rng.rademacher();
        }
        EXPECT_NEAR(dict_error(fb, fa), base, 1e-14);
    }
}

TEST(DictError, ZeroColumnNamed)
{
    Matrix a = Matrix::Ones(3, 3);
    Matrix b = a;
    b.col(1).setZero();
    try {
        dict_error(b, a);
        FAIL();
    } catch (const DegenerateColumnError& e) {
        EXPECT_EQ(e.column(), 1);
    }
    EXPECT_THROW(dict_error(Matrix::Ones(3, 2), a), ParameterError);
}

TEST(Schedule, Geometric)
{
    EXPECT_EQ(accuracy_schedule(1.0, 0.5, 3), (std::vector<double>{1.0, 0.5, 0.25}));
    EXPECT_THROW(accuracy_schedule(1.0, 1.0, 3), ParameterError);
    EXPECT_THROW(accuracy_schedule(1.0, 0.0, 3), ParameterError);
}

TEST(Schedule, TheoreticalParameters)
{
    const auto th = theoretical_schedule(3, 1, 100);
    EXPECT_NEAR(th.eps0, 1.0 / 23328.0, 1e-18);
    EXPECT_NEAR(th.eps0, 4.2867e-5, 1e-9);
    EXPECT_NEAR(th.ratio, 67635.0, 1e-9);
    EXPECT_FALSE(th.decreasing);
}

TEST(Config, Validation)
{
    AltMinConfig cfg;
    cfg.rho = 1.0;
    EXPECT_THROW(cfg.validate(), ParameterError);
    cfg = {};
    cfg.eps0 = 0.0;
    EXPECT_THROW(cfg.validate(), ParameterError);
    cfg = {};
    cfg.max_iterations = 0;
    EXPECT_THROW(cfg.validate(), ParameterError);
}

TEST(AltMin, ConvergedStartStaysPut)
{
    // Orthogonal dictionary and its own codes.
    const Matrix q = Eigen::HouseholderQR<Matrix>(testutil::gaussian(8, 8, 7)).householderQ();
    Rng rng(8);
    const Matrix x = sample_codes(8, 200, 2, NonzeroLaw::uniform_shell(1, 2), rng);
    AltMinConfig cfg;
    cfg.max_iterations = 1;
    cfg.eps0 = 1e-10;  // lasso shrinkage would otherwise tilt the refit by O(eps0)
    const auto res = altmin_dict(q * x, q, cfg, 2, q);
    EXPECT_LT(dict_error(res.dictionary, q), 1e-7);  // resolution floor of √(1 − cos²)
    for (Index j = 0; j < x.cols(); ++j) {
        EXPECT_EQ(support_of(res.codes.col(j)), support_of(x.col(j)));
    }
}

TEST(AltMin, ShallowRecoveryShape)
{
    const auto run = shallow_run(1, 6.0);
    const auto& it = run.result.trace.iterations;
    ASSERT_LE(it.size(), 10u);
    for (std::size_t k = 2; k < it.size(); ++k) EXPECT_LE(it[k].err, it[k - 1].err) << "iteration " << k + 1;
    EXPECT_LT(it.back().err, 1e-3);
    // Columns are unit norm after every update.
    for (Index j = 0; j < run.result.dictionary.cols(); ++j) {
        EXPECT_NEAR(run.result.dictionary.col(j).norm(), 1.0, 1e-12);
    }
    // Surviving codes exceed the last threshold.
    const double tau = 9.0 * 3.0 * it.back().eps;
    for (Index i = 0; i < run.result.codes.size(); ++i) {
        const double v = run.result.codes.data()[i];
        if (v != 0.0) EXPECT_GT(std::abs(v), tau);
    }
    // Codes follow the dictionary (up to column signs).
    Matrix aligned = run.result.codes;
    for (Index j = 0; j < aligned.rows(); ++j) {
        if (run.result.dictionary.col(j).dot(run.inst.dicts[0].col(j)) < 0) aligned.row(j) *= -1.0;
    }
    EXPECT_LT((aligned - run.inst.codes).norm() / run.inst.codes.norm(), 1e-2);
}

TEST(AltMin, LowSnrDegrades)
{
    const auto good = shallow_run(1, 6.0);
    const auto bad = shallow_run(1, -3.0);
    EXPECT_GT(bad.result.trace.back().err, good.result.trace.back().err);
}

TEST(AltMin, TraceCsvHeader)
{
    AltMinTrace trace;
    trace.iterations.push_back({1, 0.5, 0.1, std::numeric_limits<double>::quiet_NaN(), 0.0, 0, 0});
    const std::string csv = trace.csv();
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "iter,eps_t,dict_change,err,seconds");
    EXPECT_NE(csv.find("nan"), std::string::npos);
}

TEST(AltMin, DegenerateCodesAbortWithTrace)
{
    const auto inst = synthesize(DeepModelSpec::shallow(10, 15, 2), 40, 3);
    AltMinConfig cfg;
    cfg.eps0 = 1e6;  // every code is zero after thresholding
    try {
        altmin_dict(inst.observations, inst.dicts[0], cfg, 2);
        FAIL() << "expected AltMinError";
    } catch (const AltMinError& e) {
        EXPECT_TRUE(e.trace().empty());
        EXPECT_NE(std::string(e.what()).find("iteration 1"), std::string::npos);
    }
}

TEST(AltMin, InfeasibleColumnNamed)
{
    const Matrix a = testutil::gaussian(6, 3, 9);
    Matrix y = a * testutil::gaussian(3, 5, 10);
    y.col(3) += testutil::gaussian_vector(6, 11);
    AltMinConfig cfg;
    cfg.eps0 = 1e-3;
    try {
        altmin_dict(y, a, cfg, 2);
        FAIL() << "expected AltMinError";
    } catch (const AltMinError& e) {
        EXPECT_NE(std::string(e.what()).find("column 3"), std::string::npos) << e.what();
    }
}

TEST(AltMin, RejectsShapeMismatch)
{
    EXPECT_THROW(altmin_dict(Matrix::Ones(4, 5), Matrix::Ones(3, 5), AltMinConfig{}, 1), ParameterError);
    EXPECT_THROW(altmin_dict(Matrix::Ones(4, 5), Matrix::Ones(4, 5), AltMinConfig{}, 6), ParameterError);
}

TEST(MatchedError, UndoesPermutationAndSigns)
{
    const Matrix a = column_normalize(testutil::gaussian(12, 9, 20));
    const std::vector<Index> perm = {4, 0, 8, 2, 7, 1, 3, 6, 5};
    Matrix shuffled(12, 9);
    for (Index j = 0; j < 9; ++j) shuffled.col(perm[static_cast<std::size_t>(j)]) = (j % 2 ? -1.0 : 1.0) * a.col(j);
    EXPECT_GT(dict_error(shuffled, a), 0.1);
    const auto m = matched_dict_error(shuffled, a);
    EXPECT_LT(m.err, 1e-7);
    EXPECT_EQ(m.match, perm);
}

TEST(MatchedError, NearbyEstimateKeepsOrder)
{
    const Matrix a = column_normalize(testutil::gaussian(20, 6, 21));
    const Matrix b = a + 0.05 * testutil::gaussian(20, 6, 22);
    const auto m = matched_dict_error(b, a);
    EXPECT_EQ(m.match, (std::vector<Index>{0, 1, 2, 3, 4, 5}));
    EXPECT_NEAR(m.err, dict_error(b, a), 1e-12);
}
