#include <airl/frameworks/config.hpp>
#include <airl/surgery/cka.hpp>
#include <airl/surgery/norm_rescale.hpp>

#include <gtest/gtest.h>

#include <cmath>

namespace airl {
namespace {

Tensor random_tensor(Shape s, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(s));
  for (double& v : t.values()) v = scale * rng.normal();
  return t;
}

double cosine(const Tensor& a, const Tensor& b) {
  return dot(a.values(), b.values()) / (l2_norm(a) * l2_norm(b));
}

ParamSet random_model(Rng& rng, double scale) {
  ParamSet p;
  p.add("backbone.0.0.weight", Role::weight, random_tensor({6, 5}, rng, scale));
  p.add("backbone.0.1.gain", Role::norm_gain, random_tensor({6}, rng, scale));
  p.add("backbone.0.1.bias", Role::norm_bias, random_tensor({6}, rng, scale));
  p.add("projector.0.bias", Role::bias, random_tensor({4}, rng, scale));
  p.add("backbone.0.1.running_var", Role::buffer, random_tensor({6}, rng, scale));
  p.add("queue.storage", Role::state, random_tensor({3, 4}, rng, scale));
  return p;
}

TEST(NormRescale, ThreeFourFive) {
  Tensor w = norm_rescale(Tensor::vector({3, 4}), 1.0);
  EXPECT_NEAR(w[0], 0.6, 1e-15);
  EXPECT_NEAR(w[1], 0.8, 1e-15);
}

TEST(NormRescale, IdenticalAnchorIsIdentity) {
  Rng rng(1, 0);
  ParamSet p = random_model(rng, 2.0);
  const ParamSet before = p;
  auto rep = norm_rescale(p, Anchor::from_params(before));
  EXPECT_EQ(p, before);
  EXPECT_EQ(rep.touched.size(), 4u);
}

TEST(NormRescale, CheckpointAnchorContract) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed, 1);
    ParamSet lars = random_model(rng, 7.0);
    const ParamSet anchor = random_model(rng, 0.3);
    const ParamSet source = lars;
    auto rep = norm_rescale(lars, Anchor::from_params(anchor));
    ASSERT_EQ(rep.touched.size(), 4u);
    for (const auto& name : rep.touched) {
      const double target = l2_norm(anchor.at(name));
      EXPECT_NEAR(l2_norm(lars.at(name)) / target, 1.0, 1e-9) << name;
      EXPECT_NEAR(cosine(lars.at(name), source.at(name)), 1.0, 1e-12) << name;
    }
    // Statistics and training state are never touched by default.
    EXPECT_EQ(lars.at("backbone.0.1.running_var"), source.at("backbone.0.1.running_var"));
    EXPECT_EQ(lars.at("queue.storage"), source.at("queue.storage"));

    ParamSet again = lars;
    norm_rescale(again, Anchor::from_params(anchor));
    for (const auto& e : lars) {
      const Tensor& b = again.at(e.name);
      for (std::size_t i = 0; i < b.size(); ++i)
        EXPECT_NEAR(b[i], e.value[i], 1e-14 * (1.0 + std::abs(e.value[i])));
    }
  }
}

TEST(NormRescale, ConstantFactorScalesEveryNorm) {
  Rng rng(2, 0);
  ParamSet p = random_model(rng, 1.0);
  const ParamSet before = p;
  auto rep = norm_rescale(p, Anchor::constant(0.1));
  EXPECT_EQ(rep.touched.size(), 4u);
  for (const auto& name : rep.touched)
    EXPECT_NEAR(l2_norm(p.at(name)) / l2_norm(before.at(name)), 0.1, 1e-15);
  EXPECT_THROW(Anchor::constant(0.0), ConfigError);
  EXPECT_THROW(Anchor::constant(-2.0), ConfigError);
}

TEST(NormRescale, BuffersOnlyWithFlag) {
  Rng rng(3, 0);
  ParamSet p = random_model(rng, 1.0);
  auto rep = norm_rescale(p, Anchor::constant(2.0), {.include_buffers = true});
  EXPECT_EQ(rep.touched.size(), 5u);
  EXPECT_EQ(std::count(rep.touched.begin(), rep.touched.end(), "queue.storage"), 0);
}

TEST(NormRescale, ReportsUnmatchedAndZeroNorm) {
  Rng rng(4, 0);
  ParamSet p = random_model(rng, 1.0);
  p.at("projector.0.bias").fill(0.0);
  ParamSet anchor;
  anchor.add("backbone.0.0.weight", Role::weight, random_tensor({6, 5}, rng));
  anchor.add("projector.0.bias", Role::bias, random_tensor({4}, rng));
  const ParamSet before = p;
  auto rep = norm_rescale(p, Anchor::from_params(anchor));
  EXPECT_EQ(rep.touched, std::vector<std::string>{"backbone.0.0.weight"});
  EXPECT_EQ(rep.unmatched, (std::vector<std::string>{"backbone.0.1.gain", "backbone.0.1.bias"}));
  ASSERT_EQ(rep.warnings.size(), 1u);
  EXPECT_NE(rep.warnings[0].find("projector.0.bias"), std::string::npos);
  EXPECT_EQ(p.at("backbone.0.1.gain"), before.at("backbone.0.1.gain"));
  EXPECT_THROW(norm_rescale(Tensor::vector({0, 0}), 1.0), DegenerateError);

  ParamSet wrong;
  wrong.add("backbone.0.0.weight", Role::weight, random_tensor({5, 6}, rng));
  EXPECT_THROW(norm_rescale(p, Anchor::from_params(wrong)), DimensionError);
}

// ---------------------------------------------------------------- CKA

// Kernel form with n x n Gram matrices: HSIC(K, L) / sqrt(HSIC(K, K) HSIC(L, L)).
double gram_cka(const Tensor& x, const Tensor& y) {
  const std::size_t n = x.rows();
  auto centered_gram = [n](const Tensor& a) {
    Tensor k = matmul(a, transpose(a));
    std::vector<double> rm(n, 0.0);
    double all = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) rm[i] += k(i, j) / n;
      all += rm[i] / n;
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) k(i, j) += all - rm[i] - rm[j];
    return k;
  };
  const Tensor k = centered_gram(x), l = centered_gram(y);
  auto hsic = [](const Tensor& a, const Tensor& b) { return dot(a.values(), b.values()); };
  return hsic(k, l) / std::sqrt(hsic(k, k) * hsic(l, l));
}

// Product of Householder reflections.
Tensor random_orthogonal(std::size_t d, Rng& rng) {
  Tensor q = Tensor::identity(d);
  for (int r = 0; r < 4; ++r) {
    Tensor v = random_tensor({d}, rng);
    const double vv = dot(v.values(), v.values());
    Tensor h = Tensor::identity(d);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) h(i, j) -= 2.0 * v[i] * v[j] / vv;
    q = matmul(q, h);
  }
  return q;
}

TEST(LinearCka, MatchesGramMatrixOracle) {
  Rng rng(5, 0);
  for (int t = 0; t < 10; ++t) {
    Tensor x = random_tensor({20, 7}, rng), y = random_tensor({20, 4}, rng);
    for (std::size_t i = 0; i < 20; ++i) y(i, 0) += 2.0 * x(i, 1);
    EXPECT_NEAR(linear_cka(x, y), gram_cka(x, y), 1e-12);
  }
}

TEST(LinearCka, Invariances) {
  Rng rng(6, 0);
  for (int t = 0; t < 10; ++t) {
    Tensor x = random_tensor({30, 6}, rng), y = random_tensor({30, 9}, rng);
    EXPECT_NEAR(linear_cka(x, x), 1.0, 1e-9);
    EXPECT_NEAR(linear_cka(x, x * -3.7), 1.0, 1e-9);
    EXPECT_NEAR(linear_cka(x, matmul(x, random_orthogonal(6, rng))), 1.0, 1e-9);
    EXPECT_NEAR(linear_cka(x, y), linear_cka(y, x), 1e-12);
    const double c = linear_cka(x, y);
    EXPECT_GE(c, 0.0);
    EXPECT_LE(c, 1.0 + 1e-12);
    Tensor shifted = x;
    for (std::size_t i = 0; i < 30; ++i)
      for (std::size_t j = 0; j < 6; ++j) shifted(i, j) += 10.0 * (j + 1);
    EXPECT_NEAR(linear_cka(shifted, y), c, 1e-9);
  }
}

TEST(LinearCka, DegenerateAndShapeErrors) {
  Rng rng(7, 0);
  Tensor x = random_tensor({10, 3}, rng);
  Tensor constant({10, 3}, 0.3);
  EXPECT_THROW(linear_cka(constant, x), DegenerateError);
  EXPECT_THROW(linear_cka(x, Tensor({10, 2})), DegenerateError);
  EXPECT_THROW(linear_cka(x, random_tensor({9, 3}, rng)), DimensionError);
  EXPECT_THROW(linear_cka(random_tensor({1, 3}, rng), random_tensor({1, 3}, rng)), DimensionError);
}

TEST(StagewiseCka, SelfComparisonAndMismatch) {
  Rng rng(8, 0);
  FrameworkConfig cfg = FrameworkConfig::preset(FrameworkKind::byol);
  cfg.dims = {12, {8, 6}, 6, 4};
  Network net = student_network(cfg);
  EncoderParams p = init_params(net, rng);
  Tensor probe = random_tensor({16, 12}, rng);
  auto rows = stagewise_cka(net, p, net, p, probe);
  ASSERT_EQ(rows.size(), net.stages.size());
  for (const auto& r : rows) EXPECT_NEAR(r.cka, 1.0, 1e-9) << r.stage;
  EXPECT_EQ(rows[0].stage, "backbone.0");

  Network other = teacher_network(cfg);
  EncoderParams q = init_params(other, rng);
  EXPECT_THROW(stagewise_cka(net, p, other, q, probe), DimensionError);
}

}  // namespace
}  // namespace airl
