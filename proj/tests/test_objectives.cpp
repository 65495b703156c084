#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "aemil/gradcheck.hpp"
#include "aemil/model.hpp"
#include "aemil/objectives.hpp"
#include "aemil/ops.hpp"
#include "aemil/rng.hpp"

using namespace aemil;

namespace {

std::vector<double> random_simplex(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return softmax_stable(v);
}

} // namespace

TEST_CASE("cross entropy: uniform, saturated and out-of-range cases") {
  auto [loss, grad] = cross_entropy({1.0, 1.0, 1.0, 1.0}, 2);
  REQUIRE(loss == Catch::Approx(std::log(4.0)).margin(1e-12));
  REQUIRE(grad[2] == Catch::Approx(0.25 - 1.0).margin(1e-12));

  auto [sat, sat_grad] = cross_entropy({1e4, 0.0, 0.0}, 0);
  (void)sat_grad;
  REQUIRE(sat >= 0.0);
  REQUIRE(sat < 1e-4);

  // wrong class at the spike: large but finite loss
  auto [bad, bad_grad] = cross_entropy({1e4, 0.0, 0.0}, 1);
  (void)bad_grad;
  REQUIRE(std::isfinite(bad));
  REQUIRE(bad > 100.0);

  REQUIRE_THROWS_AS(cross_entropy({0.0, 0.0}, 2), DomainError);
}

TEST_CASE("cross entropy gradient matches finite differences") {
  Rng rng(8);
  std::vector<double> logits(4);
  for (double& v : logits) v = rng.normal();
  const std::size_t label = 1;
  auto f = [&](const std::vector<double>& t) {
    return cross_entropy(t, label).first;
  };
  const auto analytic = cross_entropy(logits, label).second;
  REQUIRE(check_gradient(f, logits, analytic, 1e-5) < 1e-6);
}

TEST_CASE("attention entropy values and domain checks") {
  REQUIRE(attention_entropy({0.25, 0.25, 0.25, 0.25}) ==
          Catch::Approx(std::log(4.0)).margin(1e-12));
  REQUIRE(attention_entropy({0.0, 1.0, 0.0}) == 0.0);
  REQUIRE(attention_entropy({0.5, 0.25, 0.25}) ==
          Catch::Approx(1.5 * std::log(2.0)).margin(1e-12));

  REQUIRE_THROWS_AS(attention_entropy({0.7, 0.7}), DomainError);
  REQUIRE_THROWS_AS(attention_entropy({1.2, -0.2}), DomainError);
}

TEST_CASE("aem loss: values, bounds, gradient convention at zero") {
  auto [uniform, ug] = aem_loss({0.25, 0.25, 0.25, 0.25});
  REQUIRE(uniform == Catch::Approx(-std::log(4.0)).margin(1e-12));
  for (double g : ug)
    REQUIRE(g == Catch::Approx(1.0 - std::log(4.0)).margin(1e-12));

  auto [onehot, og] = aem_loss({0.0, 1.0});
  REQUIRE(onehot == 0.0);
  REQUIRE(og[0] == 0.0); // 0 ln 0 convention: zero entries get zero grad
  REQUIRE(og[1] == 1.0);

  auto [mixed, mg] = aem_loss({0.5, 0.25, 0.25});
  (void)mg;
  REQUIRE(mixed == Catch::Approx(-1.0397207708399179).margin(1e-9));

  Rng rng(77);
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 1 + rng.uniform_int(0, 19);
    const auto a = random_simplex(n, rng);
    const double loss = aem_loss(a).first;
    REQUIRE(loss <= 1e-12);
    REQUIRE(loss >= -std::log(static_cast<double>(n)) - 1e-12);
    REQUIRE(loss == Catch::Approx(-attention_entropy(a)).margin(1e-12));
  }
}

TEST_CASE("aem end-to-end gradient through softmax matches finite differences") {
  Rng rng(31);
  std::vector<double> scores(6);
  for (double& v : scores) v = rng.normal();
  auto f = [](const std::vector<double>& t) {
    return aem_loss(softmax_stable(t)).first;
  };
  const auto a = softmax_stable(scores);
  const auto analytic = softmax_backward(aem_loss(a).second, a);
  REQUIRE(check_gradient(f, scores, analytic, 1e-5) < 1e-4);
}

TEST_CASE("kl uniform loss: values, positivity, domain error at zero") {
  const auto uniform = kl_uniform_loss({0.25, 0.25, 0.25, 0.25});
  REQUIRE(std::fabs(uniform.first) < 1e-12);

  const auto skew = kl_uniform_loss({0.75, 0.25});
  const double expect = -std::log(2.0) - 0.5 * (std::log(0.75) + std::log(0.25));
  REQUIRE(skew.first == Catch::Approx(expect).margin(1e-12));
  REQUIRE(skew.first == Catch::Approx(0.143841036).margin(1e-9));
  REQUIRE(skew.second[0] == Catch::Approx(-1.0 / (2.0 * 0.75)).margin(1e-12));

  REQUIRE_THROWS_AS(kl_uniform_loss({0.0, 1.0}), DomainError);

  Rng rng(41);
  for (int i = 0; i < 200; ++i) {
    const auto a = random_simplex(2 + rng.uniform_int(0, 10), rng);
    REQUIRE(kl_uniform_loss(a).first >= -1e-12);
  }
}

TEST_CASE("forward KL identity: KL(A||U) = ln N - H(A)") {
  // documents why the forward direction is excluded from the ablation: its
  // gradient coincides with the negative-entropy loss
  Rng rng(53);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 2 + rng.uniform_int(0, 14);
    const auto a = random_simplex(n, rng);
    double kl_forward = 0.0;
    for (double x : a) kl_forward += x * std::log(x * static_cast<double>(n));
    const double identity = std::log(static_cast<double>(n)) - attention_entropy(a);
    REQUIRE(std::fabs(kl_forward - identity) < 1e-12);
  }
}

TEST_CASE("kl gradient through softmax matches finite differences") {
  Rng rng(67);
  std::vector<double> scores(5);
  for (double& v : scores) v = rng.normal();
  auto f = [](const std::vector<double>& t) {
    return kl_uniform_loss(softmax_stable(t)).first;
  };
  const auto a = softmax_stable(scores);
  const auto analytic = softmax_backward(kl_uniform_loss(a).second, a);
  REQUIRE(check_gradient(f, scores, analytic, 1e-5) < 1e-4);
}

TEST_CASE("total loss arithmetic and lambda validation") {
  const LossBreakdown at_zero = total_loss(1.7, -0.4, 0.0, RegKind::Aem);
  REQUIRE(at_zero.total == 1.7);

  const LossBreakdown lb = total_loss(1.0, -1.386294, 0.2, RegKind::Aem);
  REQUIRE(lb.total == Catch::Approx(0.7227412).margin(1e-7));
  REQUIRE(lb.total == lb.ce + lb.lambda * lb.reg);

  const LossBreakdown none = total_loss(1.0, -1.386294, 0.2, RegKind::None);
  REQUIRE(none.lambda == 0.0);
  REQUIRE(none.total == 1.0);

  REQUIRE_THROWS_AS(total_loss(1.0, 0.0, -0.1, RegKind::Aem), ConfigError);

  // preset weights from the three dataset profiles
  for (double lambda : {0.001, 0.1, 0.2})
    REQUIRE(total_loss(1.0, -1.0, lambda, RegKind::Aem).total ==
            Catch::Approx(1.0 - lambda).margin(1e-15));
}

TEST_CASE("total loss is linear in lambda (exact on dyadic inputs)") {
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    // dyadic rationals with small mantissas make every fp op exact
    const double ce = static_cast<double>(rng.uniform_int(0, 512)) / 256.0;
    const double reg = -static_cast<double>(rng.uniform_int(0, 512)) / 256.0;
    const double l1 = static_cast<double>(rng.uniform_int(0, 64)) / 128.0;
    const double l2 = static_cast<double>(rng.uniform_int(0, 64)) / 128.0;
    const double lhs = total_loss(ce, reg, l1, RegKind::Aem).total +
                       total_loss(ce, reg, l2, RegKind::Aem).total;
    const double rhs =
        2.0 * total_loss(ce, reg, 0.5 * (l1 + l2), RegKind::Aem).total;
    REQUIRE(lhs == rhs);
  }
}

TEST_CASE("a descent step on the aem loss strictly increases entropy") {
  Rng rng(29);
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 2 + rng.uniform_int(0, 10);
    std::vector<double> scores(n);
    for (double& v : scores) v = rng.normal();
    const auto a = softmax_stable(scores);
    const double h0 = attention_entropy(a);
    if (std::log(static_cast<double>(n)) - h0 < 1e-9) continue; // already uniform
    const auto grad_scores = softmax_backward(aem_loss(a).second, a);
    std::vector<double> stepped = scores;
    for (std::size_t j = 0; j < n; ++j) stepped[j] -= 1e-6 * grad_scores[j];
    REQUIRE(attention_entropy(softmax_stable(stepped)) > h0);
  }
}

TEST_CASE("regularizer dispatch: single map, per-head averaging, none") {
  ArchitectureSpec spec;
  spec.input_dim = 4;
  spec.embed_dim = 5;
  spec.attn_hidden = 3;
  spec.n_classes = 2;
  spec.variant = AttentionVariant::Gated;
  const ModelParams params = init_params(spec, 5);
  Rng rng(6);
  Matrix bag(4, 4);
  for (double& v : bag.data) v = rng.normal();
  const AttentionOutput out = model_forward(bag, params);

  const RegResult aem = regularizer_for_variant(out, RegKind::Aem);
  const auto direct = aem_loss(out.weights);
  REQUIRE(aem.value == direct.first);
  REQUIRE(aem.grad_heads.size() == 1);
  REQUIRE(aem.grad_heads[0] == direct.second);

  const RegResult off = regularizer_for_variant(out, RegKind::None);
  REQUIRE(off.value == 0.0);
  for (double g : off.grad_heads[0]) REQUIRE(g == 0.0);

  // synthetic two-head output: one uniform map, one one-hot map
  AttentionOutput multi;
  multi.head_weights = {{0.25, 0.25, 0.25, 0.25}, {1.0, 0.0, 0.0, 0.0}};
  const RegResult avg = regularizer_for_variant(multi, RegKind::Aem);
  REQUIRE(avg.value == Catch::Approx(-std::log(4.0) / 2.0).margin(1e-12));
  REQUIRE(avg.grad_heads.size() == 2);
  REQUIRE(avg.grad_heads[0][0] ==
          Catch::Approx(0.5 * (std::log(0.25) + 1.0)).margin(1e-12));
  REQUIRE(avg.grad_heads[1][1] == 0.0);
}
