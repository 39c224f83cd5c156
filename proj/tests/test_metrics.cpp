#include <gtest/gtest.h>

#include "support.hpp"

using namespace rsf;

TEST(Psnr, IdenticalImagesHitTheCap)
{
    std::mt19937_64 rng(1);
    Image a = test::random_image(5, 5, rng);
    EXPECT_EQ(psnr(a, a), psnr_cap_db);
}

TEST(Psnr, ConstantOffsetOfATenthIsTwentyDecibels)
{
    Image a(6, 6, 0.3), b(6, 6, 0.4);
    EXPECT_NEAR(psnr(a, b), 20.0, 1e-12);
}

TEST(Psnr, MatchesReference)
{
    const auto& f = test::oracles()["psnr_pair"];
    int w = f["w"], h = f["h"];
    EXPECT_NEAR(psnr(test::image_from(f["a"], w, h), test::image_from(f["b"], w, h)), f["expected"].get<double>(),
                1e-9);
}

TEST(Psnr, IsSymmetric)
{
    std::mt19937_64 rng(2);
    Image a = test::random_image(5, 5, rng), b = test::random_image(5, 5, rng);
    EXPECT_EQ(psnr(a, b), psnr(b, a));
}

TEST(Ssim, SelfIsOne)
{
    Image a = test::scene_image(24, 20, 1);
    EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
}

TEST(Ssim, ConstantsReduceToTheLuminanceTerm)
{
    const double a = 0.3, b = 0.55, c1 = 1e-4;
    EXPECT_NEAR(ssim(Image(16, 16, a), Image(16, 16, b)), (2 * a * b + c1) / (a * a + b * b + c1), 1e-12);
}

TEST(Ssim, MatchesReference)
{
    const auto& f = test::oracles()["ssim_pair"];
    int w = f["w"], h = f["h"];
    EXPECT_NEAR(ssim(test::image_from(f["a"], w, h), test::image_from(f["b"], w, h)), f["expected"].get<double>(),
                1e-4);
}

TEST(Ssim, SymmetricAndShiftInvariant)
{
    Image a = test::scene_image(20, 20, 2, 0.2, 0.6), b = test::scene_image(20, 20, 3, 0.2, 0.6);
    EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-12);
    Image a2 = a, b2 = b;
    for (double& v : a2.values())
        v += 0.1;
    for (double& v : b2.values())
        v += 0.1;
    // Only the C1 term of the luminance factor notices a common offset.
    EXPECT_NEAR(ssim(a2, b2), ssim(a, b), 1e-2);
    EXPECT_LE(ssim(a, b), 1.0);
}

TEST(Ssim, RejectsSmallImages)
{
    EXPECT_THROW(ssim(Image(10, 20, 0.1), Image(10, 20, 0.1)), Error);
}

TEST(DeltaE, WhiteVersusBlackIsOneHundred)
{
    EXPECT_NEAR(delta_e_ab(Image(3, 3, 1.0), Image(3, 3, 0.0)), 100.0, 1e-9);
}

TEST(Dice, IdenticalDisjointAndEmpty)
{
    std::mt19937_64 rng(4);
    Mask a = test::random_mask(6, 6, rng);
    EXPECT_NEAR(dice(a, a), 1.0, 1e-15);
    Mask l(4, 4, 0.0), r(4, 4, 0.0);
    for (int y = 0; y < 4; ++y) {
        l.at(0, y) = 1.0;
        r.at(3, y) = 1.0;
    }
    EXPECT_EQ(dice(l, r), 0.0);
    EXPECT_EQ(dice(Mask(3, 3, 0.0), Mask(3, 3, 0.0)), 1.0);
}

TEST(Dice, MatchesReference)
{
    const auto& f = test::oracles()["dice_pair"];
    int w = f["w"], h = f["h"];
    Mask a = test::mask_from(f["a"], w, h), b = test::mask_from(f["b"], w, h);
    EXPECT_NEAR(dice(a, b), f["expected"].get<double>(), 1e-9);
    EXPECT_NEAR(dice(a, b), dice(b, a), 1e-15);
}

TEST(Compare, OmitsSsimBelowTheWindow)
{
    MetricReport r = compare(Image(8, 8, 0.2), Image(8, 8, 0.3));
    EXPECT_FALSE(r.ssim);
    EXPECT_NEAR(r.psnr, 20.0, 1e-9);
    EXPECT_TRUE(compare(Image(12, 12, 0.2), Image(12, 12, 0.2)).ssim.has_value());
}
