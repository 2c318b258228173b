#include "moments.hpp"
#include "test_util.hpp"

#include <ds2p/genmodel.hpp>

#include <gtest/gtest.h>

#include <map>

using namespace ds2p;

TEST(SampleSupport, FullSupportForced)
{
    Rng rng(1);
    EXPECT_EQ(sample_support(5, 5, rng).indices(), (std::vector<Index>{0, 1, 2, 3, 4}));
}

TEST(SampleSupport, RejectsOversizedSupport)
{
    Rng rng(1);
    EXPECT_THROW(sample_support(3, 4, rng), ParameterError);
}

TEST(SampleSupport, SingletonsAreUniform)
{
    Rng rng(2);
    const int trials = 100000;
    std::vector<int> counts(4, 0);
    for (int t = 0; t < trials; ++t) ++counts[static_cast<std::size_t>(sample_support(4, 1, rng).indices()[0])];
    // Chi-square with 3 degrees of freedom; 16.27 is the 0.999 quantile.
    double chi2 = 0.0;
    for (int c : counts) {
        EXPECT_NEAR(c / double(trials), 0.25, 0.01);
        chi2 += (c - trials / 4.0) * (c - trials / 4.0) / (trials / 4.0);
    }
    EXPECT_LT(chi2, 16.27);
}

TEST(SampleSupport, PairsAreUniform)
{
    Rng rng(3);
    const int trials = 100000;
    std::map<std::pair<Index, Index>, int> counts;
    for (int t = 0; t < trials; ++t) {
        const auto s = sample_support(6, 2, rng);
        ++counts[{s.indices()[0], s.indices()[1]}];
    }
    // Every one of the 15 pairs appears with frequency 1/15.
    ASSERT_EQ(counts.size(), 15u);
    for (Index i = 0; i < 6; ++i) {
        for (Index j = i + 1; j < 6; ++j) EXPECT_NEAR((counts[{i, j}] / double(trials)), 1.0 / 15.0, 0.005);
    }
}

TEST(SparseDictionary, ScaleCollapsesWhenDense)
{
    Rng rng(4);
    const Matrix a = sample_sparse_dictionary(4, 1, 4, NonzeroLaw::rademacher(), rng);
    for (Index i = 0; i < 4; ++i) EXPECT_EQ(std::abs(a(i, 0)), 1.0);
}

TEST(SparseDictionary, SecondMoments)
{
    Rng rng(5);
    const Matrix a = sample_sparse_dictionary(100, 5000, 10, NonzeroLaw::rademacher(), rng);
    double nz_sum = 0.0;
    Index nz = 0;
    for (Index j = 0; j < a.cols(); ++j) {
        EXPECT_EQ(count_nonzeros(a.col(j)), 10);
        EXPECT_LE(a.col(j).squaredNorm(), 100.0 + 1e-9);
        for (Index i = 0; i < a.rows(); ++i) {
            if (a(i, j) != 0.0) {
                nz_sum += a(i, j) * a(i, j);
                ++nz;
            }
        }
    }
    EXPECT_NEAR(nz_sum / static_cast<double>(nz), 10.0, 1e-12);
    EXPECT_NEAR(a.squaredNorm() / static_cast<double>(a.size()), 1.0, 0.05);
}

TEST(SparseDictionary, CrossCorrelationVanishes)
{
    Rng rng(6);
    const Matrix a = sample_sparse_dictionary(50, 2000, 5, NonzeroLaw::rademacher(), rng);
    double sum = 0.0;
    Index count = 0;
    for (Index j = 0; j + 1 < a.cols(); j += 2) {
        for (Index i = 0; i < a.rows(); ++i) {
            sum += a(i, j) * a(i, j + 1);
            ++count;
        }
    }
    const double mean = sum / static_cast<double>(count);
    EXPECT_GE(mean, -0.02);
    EXPECT_LE(mean, 0.02);
}

TEST(SparseDictionary, MomentBatteryWithinThreeStandardErrors)
{
    const auto battery = testutil::moment_battery(100, 5000, 10, 7);
    EXPECT_LE(battery.max_column_norm_sq, 100.0 + 1e-9);
    for (const auto& c : battery.checks) {
        EXPECT_TRUE(c.within(3.0)) << c.name << ": mean " << c.mean << " expected " << c.expected << " se "
                                   << c.stderr_mean;
    }
}

TEST(SparseDictionary, ColumnNormBoundForOtherLaws)
{
    Rng rng(8);
    for (const auto& law : {NonzeroLaw::rademacher(), NonzeroLaw::gaussian_truncated(1.0)}) {
        const Matrix a = sample_sparse_dictionary(30, 400, 6, law, rng);
        for (Index j = 0; j < a.cols(); ++j) EXPECT_LE(a.col(j).squaredNorm(), 30.0 + 1e-9);
    }
}

TEST(DenseDictionary, ColumnNormsNearOne)
{
    Rng rng(9);
    const Matrix a = sample_dense_dictionary(100, 200, rng);
    EXPECT_NEAR(column_norms(a).mean(), 1.0, 0.05);
}

TEST(DenseDictionary, Deterministic)
{
    Rng r1(10);
    Rng r2(10);
    const Matrix a = sample_dense_dictionary(1, 1, r1);
    const Matrix b = sample_dense_dictionary(1, 1, r2);
    EXPECT_EQ(a(0, 0), b(0, 0));
    Rng r3(11);
    Rng r4(11);
    EXPECT_EQ(sample_dense_dictionary(7, 9, r3), sample_dense_dictionary(7, 9, r4));
}

TEST(Codes, DenseRademacherColumn)
{
    Rng rng(12);
    const Matrix x = sample_codes(8, 1, 8, NonzeroLaw::rademacher(), rng);
    for (Index i = 0; i < 8; ++i) EXPECT_EQ(std::abs(x(i, 0)), 1.0);
}

TEST(Codes, UniformShellMagnitudes)
{
    Rng rng(13);
    const Matrix x = sample_codes(800, 6400, 3, NonzeroLaw::uniform_shell(1.0, 2.0), rng);
    for (Index j = 0; j < x.cols(); ++j) {
        ASSERT_EQ(count_nonzeros(x.col(j)), 3);
        for (Index i = 0; i < x.rows(); ++i) {
            const double v = std::abs(x(i, j));
            if (v != 0.0) {
                ASSERT_GE(v, 1.0);
                ASSERT_LE(v, 2.0);
            }
        }
    }
}

TEST(Codes, RademacherSecondMoment)
{
    Rng rng(14);
    const Matrix x = sample_codes(100, 10000, 5, NonzeroLaw::rademacher(), rng);
    EXPECT_NEAR(x.squaredNorm() / static_cast<double>(x.size()), 0.05, 0.003);
}

TEST(Synthesize, ShallowHasNoIntermediates)
{
    const auto inst = synthesize(DeepModelSpec::shallow(10, 20, 2), 50, 1);
    EXPECT_TRUE(inst.intermediates.empty());
    EXPECT_LT((inst.observations - inst.dicts[0] * inst.codes).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Synthesize, FullScaleDimensions)
{
    const auto inst = synthesize(DeepModelSpec::full_two_layer(), 6400, 3);
    EXPECT_EQ(inst.observations.rows(), 100);
    EXPECT_EQ(inst.observations.cols(), 6400);
    EXPECT_EQ(inst.dicts[0].rows(), 200);
    EXPECT_EQ(inst.dicts[0].cols(), 800);
    EXPECT_EQ(inst.dicts[1].rows(), 100);
    EXPECT_EQ(inst.dicts[1].cols(), 200);
    EXPECT_LE(max_column_nonzeros(inst.intermediates[0]), 9);
}

TEST(Synthesize, ChainIsExactAndNormalized)
{
    const auto inst = synthesize(DeepModelSpec::desk_two_layer(), 300, 4);
    const Matrix y = inst.dicts[1] * (inst.dicts[0] * inst.codes);
    EXPECT_LT((y - inst.observations).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((inst.dicts[0] * inst.codes - inst.intermediates[0]).cwiseAbs().maxCoeff(), 1e-12);
    for (const auto& a : inst.dicts) {
        for (Index j = 0; j < a.cols(); ++j) EXPECT_NEAR(a.col(j).norm(), 1.0, 1e-12);
    }
    for (Index j = 0; j < inst.dicts[0].cols(); ++j) EXPECT_EQ(count_nonzeros(inst.dicts[0].col(j)), 3);
    for (Index j = 0; j < inst.codes.cols(); ++j) EXPECT_EQ(count_nonzeros(inst.codes.col(j)), 3);
}

TEST(Synthesize, IntermediateSparsityBounded)
{
    DeepModelSpec spec;
    spec.dims = {{30, 60}, {25, 30}, {20, 25}};
    spec.code_sparsity = 2;
    spec.column_sparsities = {2, 3};
    const auto inst = synthesize(spec, 400, 5);
    EXPECT_LE(max_column_nonzeros(inst.intermediates[0]), 4);
    EXPECT_LE(max_column_nonzeros(inst.intermediates[1]), 12);
}

TEST(Synthesize, DeterministicGivenSeed)
{
    const auto a = synthesize(DeepModelSpec::desk_two_layer(), 100, 9);
    const auto b = synthesize(DeepModelSpec::desk_two_layer(), 100, 9);
    EXPECT_EQ(a.observations, b.observations);
    EXPECT_EQ(a.codes, b.codes);
    EXPECT_EQ(a.dicts[0], b.dicts[0]);
    EXPECT_EQ(a.dicts[1], b.dicts[1]);
    const auto c = synthesize(DeepModelSpec::desk_two_layer(), 100, 10);
    EXPECT_NE(a.observations, c.observations);
}

TEST(Synthesize, RejectsInconsistentSpec)
{
    DeepModelSpec spec = DeepModelSpec::desk_two_layer();
    spec.dims[1].r = 59;
    EXPECT_THROW(synthesize(spec, 10, 1), ParameterError);
    spec = DeepModelSpec::desk_two_layer();
    spec.code_sparsity = 151;
    EXPECT_THROW(synthesize(spec, 10, 1), ParameterError);
}

TEST(Perturb, SnrConversions)
{
    EXPECT_NEAR(snr_db_from_alpha(0.5), 6.0206, 1e-4);
    EXPECT_NEAR(snr_db_from_alpha(1.0), 0.0, 1e-15);
    EXPECT_NEAR(alpha_from_snr_db(snr_db_from_alpha(0.3)), 0.3, 1e-15);
}

TEST(Perturb, NoiseVariance)
{
    Rng rng(15);
    const Matrix a = Matrix::Zero(100, 10000);
    const auto p = perturb_dictionary(a, 0.5, rng);
    const double var = p.dictionary.squaredNorm() / static_cast<double>(a.size());
    EXPECT_NEAR(var, 0.25 / 100.0, 0.1 * 0.25 / 100.0);
    EXPECT_NEAR(p.snr_db, 6.0206, 1e-4);
    Rng rng2(16);
    EXPECT_THROW(perturb_dictionary(a, 0.0, rng2), ParameterError);
}

TEST(Rng, SplitStreamsAreIndependentAndStable)
{
    const Rng root(42);
    Rng a = root.split(1);
    Rng b = root.split(1);
    Rng c = root.split(2);
    const auto va = a();
    EXPECT_EQ(va, b());
    EXPECT_NE(va, c());
}
