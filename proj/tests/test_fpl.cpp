#include <algorithm>
#include <vector>

#include <gtest/gtest.h>

#include "nlva/fpl.hpp"
#include "nlva/rng.hpp"
#include "oracles.hpp"

using nlva::PoolKind;
using nlva::Tensor;

namespace {

TEST(Fpl, ConstantInputAveragesToConstant) {
	const Tensor v = Tensor::full({3, 2, 4, 4}, -1.5);
	const auto f = nlva::fpl_forward(v, PoolKind::avg, nlva::make_identity_bn(3));
	ASSERT_EQ(f.pre_bn.shape(), (std::vector<std::size_t>{3}));
	for (std::size_t c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(f.pre_bn.at(c), -1.5);
}

TEST(Fpl, IdentityBnKeepsPreBn) {
	nlva::Rng rng(173);
	const Tensor v = oracles::random_tensor({4, 2, 3, 3}, rng);
	const auto f = nlva::fpl_forward(v, PoolKind::avg, nlva::make_identity_bn(4));
	EXPECT_EQ(f.post_bn, f.pre_bn);
	EXPECT_EQ(f.pre_bn.size(), f.post_bn.size());
}

TEST(Fpl, MaxPoolMatchesLoopOracle) {
	nlva::Rng rng(179);
	const Tensor v = oracles::random_tensor({5, 3, 2, 4}, rng);
	const auto f = nlva::fpl_forward(v, PoolKind::max, nlva::make_identity_bn(5));
	const std::size_t span = 3 * 2 * 4;
	for (std::size_t c = 0; c < 5; ++c) {
		const double want = *std::max_element(v.data() + c * span, v.data() + (c + 1) * span);
		EXPECT_DOUBLE_EQ(f.pre_bn.at(c), want);
	}
}

TEST(Fpl, AvgIsInvariantToPositionPermutation) {
	nlva::Rng rng(181);
	const Tensor v = oracles::random_tensor({2, 2, 2, 3}, rng);
	// permuting T/H/W axes reorders positions without changing their multiset
	const Tensor shuffled = permute(v, {0, 3, 1, 2});
	const auto a = nlva::fpl_forward(v, PoolKind::avg, nlva::make_identity_bn(2));
	const auto b = nlva::fpl_forward(shuffled, PoolKind::avg, nlva::make_identity_bn(2));
	for (std::size_t c = 0; c < 2; ++c) EXPECT_NEAR(a.pre_bn.at(c), b.pre_bn.at(c), 1e-12);
}

TEST(Fpl, MaxDominatesAvgPerChannel) {
	nlva::Rng rng(191);
	const Tensor v = oracles::random_tensor({4, 2, 3, 2}, rng);
	const auto mx = nlva::fpl_forward(v, PoolKind::max, nlva::make_identity_bn(4));
	const auto av = nlva::fpl_forward(v, PoolKind::avg, nlva::make_identity_bn(4));
	for (std::size_t c = 0; c < 4; ++c) EXPECT_GE(mx.pre_bn.at(c), av.pre_bn.at(c));
}

TEST(Fpl, BnLengthMismatchIsDimError) {
	const Tensor v = Tensor::full({3, 1, 1, 1}, 1.0);
	EXPECT_THROW(nlva::fpl_forward(v, PoolKind::avg, nlva::make_identity_bn(2)), nlva::dim_error);
}

TEST(Fpl, AppliesSuppliedBnStatistics) {
	const Tensor v = Tensor::full({1, 1, 1, 2}, 2.0);
	nlva::BnParams bn = nlva::make_identity_bn(1);
	bn.mean.at(0) = 2.0;
	bn.var.at(0) = 4.0;
	bn.beta.at(0) = 5.0;
	const auto f = nlva::fpl_forward(v, PoolKind::avg, bn);
	EXPECT_DOUBLE_EQ(f.pre_bn.at(0), 2.0);
	EXPECT_DOUBLE_EQ(f.post_bn.at(0), 5.0);
}

} // namespace
