#include <airl/augment/augment.hpp>

#include <gtest/gtest.h>

namespace airl {
namespace {

Image random_image(std::size_t h, std::size_t w, Rng& rng) {
  Image img(h, w);
  for (double& p : img.pixels) p = rng.uniform();
  return img;
}

bool in_unit_range(const Image& img) {
  for (double p : img.pixels)
    if (!(p >= 0.0 && p <= 1.0)) return false;
  return true;
}

TEST(Solarize, ThresholdBehaviour) {
  const double t = 128.0 / 255.0;
  Image img(1, 1);
  img.pixels = {0.0, 1.0, 128.0 / 255.0};
  Image out = solarize(img, t);
  EXPECT_EQ(out.pixels[0], 0.0);
  EXPECT_EQ(out.pixels[1], 0.0);
  EXPECT_NEAR(out.pixels[2], 127.0 / 255.0, 1e-15);
}

TEST(Hflip, Involution) {
  Rng rng(1, 0);
  Image img = random_image(5, 7, rng);
  EXPECT_EQ(hflip(hflip(img)), img);
  EXPECT_FALSE(hflip(img) == img);
}

TEST(Grayscale, GrayImageIsFixedPoint) {
  Rng rng(2, 0);
  Image g = grayscale(random_image(6, 6, rng));
  Image gg = grayscale(g);
  for (std::size_t k = 0; k < g.pixels.size(); ++k) EXPECT_NEAR(gg.pixels[k], g.pixels[k], 1e-15);
  for (std::size_t i = 0; i < g.pixels.size(); i += 3) {
    EXPECT_EQ(g.pixels[i], g.pixels[i + 1]);
    EXPECT_EQ(g.pixels[i], g.pixels[i + 2]);
  }
}

TEST(ColorJitter, ZeroStrengthIsIdentity) {
  Rng rng(3, 0);
  Image img = random_image(6, 6, rng);
  EXPECT_EQ(color_jitter(img, {0, 0, 0, 0}, rng), img);
}

TEST(ColorJitter, ChangesImageAndStaysInRange) {
  Rng rng(4, 0);
  Image img = random_image(6, 6, rng);
  Image out = color_jitter(img, {}, rng);
  EXPECT_FALSE(out == img);
  EXPECT_TRUE(in_unit_range(out));
}

TEST(ColorJitter, HueRotationPreservesGray) {
  Image img(2, 2, 0.3);
  Rng rng(5, 0);
  Image out = color_jitter(img, {0, 0, 0, 0.1}, rng);
  for (double p : out.pixels) EXPECT_NEAR(p, 0.3, 1e-12);
}

TEST(GaussianBlur, KernelRadiusAndNormalization) {
  for (double s : {0.1, 0.5, 1.3, 2.0}) {
    auto k = gaussian_kernel(s);
    EXPECT_EQ(k.size(), 2 * static_cast<std::size_t>(std::ceil(2 * s)) + 1);
    double t = 0;
    for (double v : k) t += v;
    EXPECT_NEAR(t, 1.0, 1e-14);
  }
}

TEST(GaussianBlur, ConstantImageUnchanged) {
  Image img(5, 5, 0.42);
  Rng rng(6, 0);
  Image out = gaussian_blur(img, {0.1, 2.0}, rng);
  for (double p : out.pixels) EXPECT_NEAR(p, 0.42, 1e-14);
}

TEST(RandomResizedCrop, FullScaleSquareIsPlainResize) {
  Rng rng(7, 0);
  Image img = random_image(8, 8, rng);
  Image out = random_resized_crop(img, {1.0, 1.0}, 8, rng, {1.0, 1.0});
  EXPECT_EQ(out, img);
  Image down = random_resized_crop(img, {1.0, 1.0}, 4, rng, {1.0, 1.0});
  EXPECT_EQ(down, crop_resize(img, 0, 0, 8, 8, 4));
}

TEST(RandomResizedCrop, OutputSideAndRange) {
  Rng rng(8, 0);
  Image img = random_image(20, 14, rng);
  for (int t = 0; t < 200; ++t) {
    Image out = random_resized_crop(img, {0.08, 1.0}, 16, rng);
    ASSERT_EQ(out.height, 16u);
    ASSERT_EQ(out.width, 16u);
    ASSERT_TRUE(in_unit_range(out));
  }
}

TEST(RandomResizedCrop, InfeasibleFallsBackToCenterCrop) {
  // Aspect ratios far outside what a 4x40 image can host.
  Rng rng(9, 0);
  CropWindow c = sample_crop(4, 40, {0.9, 1.0}, {0.5, 0.6}, rng);
  EXPECT_EQ(c.height, 4u);
  EXPECT_EQ(c.width, 2u);
  EXPECT_EQ(c.left, 19u);
  EXPECT_THROW(random_resized_crop(Image(1, 5), {0.08, 1.0}, 4, rng), DimensionError);
}

TEST(RandomResizedCrop, DeterministicForFixedSeed) {
  Rng src(10, 0);
  Image img = random_image(12, 12, src);
  Rng a(99, 1), b(99, 1);
  EXPECT_EQ(random_resized_crop(img, {0.08, 1.0}, 16, a), random_resized_crop(img, {0.08, 1.0}, 16, b));
}

TEST(Pipeline, StandardMatchesAugmentationTable) {
  AugPipeline p = AugPipeline::standard();
  validate(p);
  ASSERT_EQ(p.steps.size(), 6u);
  EXPECT_EQ(p.steps[0].kind, AugKind::random_resized_crop);
  EXPECT_EQ(p.steps[0].probability, 1.0);
  EXPECT_EQ(p.steps[0].params[0], 0.08);
  EXPECT_EQ(p.steps[0].params[1], 1.0);
  EXPECT_EQ(p.steps[1].probability, 0.5);
  EXPECT_EQ(p.steps[2].probability, 0.8);
  EXPECT_EQ(p.steps[2].params, (std::vector<double>{0.4, 0.4, 0.2, 0.1}));
  EXPECT_EQ(p.steps[3].probability, 0.2);
  EXPECT_EQ(p.steps[4].probability, 0.5);
  EXPECT_EQ(p.steps[4].params, (std::vector<double>{0.1, 2.0}));
  EXPECT_EQ(p.steps[5].probability, 0.2);
  EXPECT_EQ(p.steps[5].params[0], 128.0 / 255.0);
}

TEST(Pipeline, IdentityPipelineViewsEqualSource) {
  Rng rng(11, 0);
  Image img = random_image(16, 16, rng);
  AugPipeline p = AugPipeline::standard();
  p.steps[0].params = {1.0, 1.0, 1.0, 1.0};
  for (auto& s : p.steps)
    if (s.kind != AugKind::random_resized_crop) s.probability = 0.0;
  auto [a, b] = two_views(img, p, Rng(5, 5), 3);
  EXPECT_EQ(a, img);
  EXPECT_EQ(b, img);
  auto [c, d] = two_views(img, AugPipeline::identity(), Rng(5, 5), 3);
  EXPECT_EQ(c, img);
  EXPECT_EQ(d, img);
}

TEST(Pipeline, TwoViewsDeterministicPerSample) {
  Rng rng(12, 0);
  Image img = random_image(20, 20, rng);
  AugPipeline p = AugPipeline::standard();
  auto v1 = two_views(img, p, Rng(7, 0), 42);
  auto v2 = two_views(img, p, Rng(7, 0), 42);
  EXPECT_EQ(v1, v2);
  EXPECT_FALSE(v1.first == v1.second);
  auto other = two_views(img, p, Rng(7, 0), 43);
  EXPECT_FALSE(other.first == v1.first);
}

TEST(Pipeline, OutputsStayInUnitRange) {
  Rng rng(13, 0);
  AugPipeline p = AugPipeline::standard();
  for (std::uint64_t s = 0; s < 200; ++s) {
    Image img = random_image(20, 20, rng);
    auto [a, b] = two_views(img, p, Rng(3, 3), s);
    ASSERT_TRUE(in_unit_range(a));
    ASSERT_TRUE(in_unit_range(b));
  }
}

TEST(Pipeline, EmpiricalFiringProbabilities) {
  AugPipeline p = AugPipeline::standard();
  std::vector<int> counts(p.steps.size(), 0);
  const int draws = 100000;
  Rng base(2024, 0);
  for (int i = 0; i < draws; ++i) {
    auto fired = sample_firing(p, base.substream({static_cast<std::uint64_t>(i), 0}));
    for (std::size_t k = 0; k < fired.size(); ++k) counts[k] += fired[k];
  }
  for (std::size_t k = 0; k < p.steps.size(); ++k)
    EXPECT_NEAR(counts[k] / double(draws), p.steps[k].probability, 0.01) << aug_name(p.steps[k].kind);
}

TEST(Pipeline, RemovalLadderOrderAndPairedStreams) {
  AugPipeline full = AugPipeline::standard();
  EXPECT_TRUE(removal_ladder(full, 0).contains(AugKind::solarize));
  AugPipeline r1 = removal_ladder(full, 1);
  EXPECT_FALSE(r1.contains(AugKind::solarize));
  EXPECT_TRUE(r1.contains(AugKind::gaussian_blur));
  AugPipeline r2 = removal_ladder(full, 2);
  EXPECT_FALSE(r2.contains(AugKind::gaussian_blur));
  EXPECT_TRUE(r2.contains(AugKind::grayscale));
  AugPipeline r3 = removal_ladder(full, 3);
  EXPECT_FALSE(r3.contains(AugKind::grayscale));
  EXPECT_TRUE(r3.contains(AugKind::color_jitter));
  AugPipeline r4 = removal_ladder(full, 4);
  EXPECT_EQ(r4.steps.size(), 2u);  // crop + flip: the supervised-style set
  EXPECT_THROW(removal_ladder(full, 5), ConfigError);

  // Steps that remain fire identically in every rung.
  for (std::uint64_t i = 0; i < 500; ++i) {
    Rng v = Rng(1, 1).substream({i, 0});
    auto f_full = sample_firing(full, v);
    auto f_r4 = sample_firing(r4, v);
    EXPECT_EQ(f_full[0], f_r4[0]);
    EXPECT_EQ(f_full[1], f_r4[1]);
  }
  // With solarization never firing, removing it leaves views bit-identical.
  Rng rng(14, 0);
  Image img = random_image(20, 20, rng);
  AugPipeline no_fire = full;
  no_fire.steps[5].probability = 0.0;
  EXPECT_EQ(two_views(img, no_fire, Rng(4, 4), 9), two_views(img, r1, Rng(4, 4), 9));
}

TEST(Pipeline, ValidationRejectsBadConfigs) {
  AugPipeline p = AugPipeline::standard();
  p.steps[2].params.pop_back();
  EXPECT_THROW(validate(p), ConfigError);
  AugPipeline q = AugPipeline::standard();
  q.steps[1].probability = 1.5;
  EXPECT_THROW(validate(q), ConfigError);
  AugPipeline r = AugPipeline::standard();
  r.steps.erase(r.steps.begin());
  EXPECT_THROW(validate(r), ConfigError);
}

}  // namespace
}  // namespace airl
