#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "scda/error.hpp"
#include "scda/losses.hpp"
#include "scda/net.hpp"
#include "scda/rng.hpp"

using scda::Matrix;

namespace {

Matrix softmax_batch(int m, int k, scda::Rng& rng, double scale = 3.0) {
  Matrix logits(m, k);
  for (double& v : logits.values()) v = rng.uniform(-scale, scale);
  return scda::softmax(logits);
}

// Central finite differences of a correlation loss directly in probability
// space. h is small enough that perturbed rows still pass the distribution
// check (sum within 1e-6 of 1).
Matrix fd_probs(const Matrix& probs,
                const std::function<double(const Matrix&)>& value,
                double h = 1e-7) {
  Matrix fd(probs.rows(), probs.cols());
  Matrix work = probs;
  for (int i = 0; i < probs.rows(); ++i)
    for (int j = 0; j < probs.cols(); ++j) {
      const double orig = work.at(i, j);
      work.at(i, j) = orig + h;
      const double up = value(work);
      work.at(i, j) = orig - h;
      const double down = value(work);
      work.at(i, j) = orig;
      fd.at(i, j) = (up - down) / (2.0 * h);
    }
  return fd;
}

bool matrices_close(const Matrix& a, const Matrix& b, double rel,
                    double floor) {
  if (!a.same_shape(b)) return false;
  for (std::size_t i = 0; i < a.values().size(); ++i) {
    const double x = a.values()[i], y = b.values()[i];
    if (std::abs(x - y) > rel * std::max(std::abs(x), std::abs(y)) + floor)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("entropy hand values") {
  std::vector<double> one_hot = {0.0, 1.0, 0.0};
  CHECK_EQ(scda::entropy(one_hot), 0.0);

  std::vector<double> uniform4 = {0.25, 0.25, 0.25, 0.25};
  CHECK(scda::entropy(uniform4) == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  std::vector<double> half = {0.5, 0.5, 0.0, 0.0};
  CHECK(scda::entropy(half) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  std::vector<double> negative = {1.2, -0.2};
  CHECK_THROWS_AS(scda::entropy(negative), scda::ContractViolation);
  std::vector<double> unnormalized = {0.4, 0.4};
  CHECK_THROWS_AS(scda::entropy(unnormalized), scda::ContractViolation);
}

TEST_CASE("entropy stays in [0, ln K]") {
  scda::Rng rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 2 + static_cast<int>(rng.next_below(6));
    Matrix p = softmax_batch(1, k, rng, 6.0);
    const double h = scda::entropy(p.row(0));
    CHECK(h >= 0.0);
    CHECK(h <= std::log(static_cast<double>(k)) + 1e-12);
  }
}

TEST_CASE("correlation matrix hand examples") {
  SUBCASE("orthogonal confident predictions give the identity") {
    Matrix p(2, 2, {1.0, 0.0, 0.0, 1.0});
    auto cm = scda::correlation_matrix(p);
    CHECK(cm.weights[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(cm.weights[1] == doctest::Approx(1.0).epsilon(1e-15));
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        CHECK(cm.r.at(i, j) == doctest::Approx(i == j ? 1.0 : 0.0));
        CHECK(cm.r_hat.at(i, j) == doctest::Approx(i == j ? 1.0 : 0.0));
      }
    CHECK_FALSE(cm.any_degenerate);
  }

  SUBCASE("uniform predictions spread the mass evenly") {
    Matrix p(2, 2, {0.5, 0.5, 0.5, 0.5});
    auto cm = scda::correlation_matrix(p);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        CHECK(cm.r.at(i, j) == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(cm.r_hat.at(i, j) == doctest::Approx(0.5).epsilon(1e-12));
      }
  }

  SUBCASE("batches of one row are rejected") {
    CHECK_THROWS_AS(scda::correlation_matrix(Matrix(1, 3, {0.2, 0.3, 0.5})),
                    scda::ContractViolation);
  }

  SUBCASE("a never-predicted class degenerates its row") {
    Matrix p(2, 2, {1.0, 0.0, 1.0, 0.0});
    auto cm = scda::correlation_matrix(p);
    CHECK(cm.any_degenerate);
    CHECK(cm.degenerate_rows[1] == 1);
    CHECK(cm.r_hat.at(1, 0) == doctest::Approx(0.5));
    CHECK(cm.r_hat.at(1, 1) == doctest::Approx(0.5));
  }
}

TEST_CASE("correlation matrix matches the naive oracle") {
  scda::Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix p = softmax_batch(8, 5, rng);
    auto cm = scda::correlation_matrix(p);
    auto want = oracles::naive_correlation(p);

    double wsum = 0.0;
    for (int n = 0; n < 8; ++n) {
      CHECK(cm.weights[n] == doctest::Approx(want.weights[n]).epsilon(1e-12));
      wsum += cm.weights[n];
    }
    CHECK(wsum == doctest::Approx(8.0).epsilon(1e-12));

    for (int i = 0; i < 5; ++i) {
      double row = 0.0;
      for (int j = 0; j < 5; ++j) {
        CHECK(cm.r.at(i, j) == doctest::Approx(want.r.at(i, j)).epsilon(1e-12));
        CHECK(cm.r_hat.at(i, j) ==
              doctest::Approx(want.r_hat.at(i, j)).epsilon(1e-12));
        CHECK(std::abs(cm.r.at(i, j) - cm.r.at(j, i)) < 1e-9);
        CHECK(cm.r_hat.at(i, j) >= 0.0);
        CHECK(cm.r_hat.at(i, j) <= 1.0 + 1e-12);
        row += cm.r_hat.at(i, j);
      }
      CHECK(row == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("adversarial loss hand values") {
  SUBCASE("balanced confusion sits at the minimum ln 2") {
    Matrix p(2, 2, {0.5, 0.5, 0.5, 0.5});
    auto cm = scda::correlation_matrix(p);
    auto loss = scda::loss_adv(cm, 1);
    CHECK(loss.value == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }

  SUBCASE("p = 0.25 closed form") {
    // Identical rows [0.75, 0.25] make r_hat row 0 equal [0.75, 0.25].
    Matrix p(2, 2, {0.75, 0.25, 0.75, 0.25});
    auto cm = scda::correlation_matrix(p);
    auto loss = scda::loss_adv(cm, 1);
    const double want = -0.5 * (std::log(0.25) + std::log(0.75));
    CHECK(loss.value == doctest::Approx(want).epsilon(1e-12));
    CHECK(loss.value == doctest::Approx(0.836988).epsilon(1e-6));
  }

  SUBCASE("clamped p freezes the gradient") {
    Matrix p(2, 2, {1.0, 0.0, 1.0, 0.0});
    auto cm = scda::correlation_matrix(p);
    auto loss = scda::loss_adv(cm, 1);
    CHECK(std::isfinite(loss.value));
    for (double v : loss.d_probs.values()) CHECK_EQ(v, 0.0);
  }

  SUBCASE("missing implicit block is a contract violation") {
    scda::Rng rng(50);
    Matrix p = softmax_batch(4, 3, rng);
    auto cm = scda::correlation_matrix(p);
    CHECK_THROWS_AS(scda::loss_adv(cm, 3), scda::ContractViolation);
    CHECK_THROWS_AS(scda::loss_kcc(cm, 3), scda::ContractViolation);
    CHECK_THROWS_AS(scda::loss_adv(cm, 0), scda::ContractViolation);
  }
}

TEST_CASE("adversarial loss stays above ln 2") {
  scda::Rng rng(43);
  for (int trial = 0; trial < 30; ++trial) {
    Matrix p = softmax_batch(6, 4, rng);
    auto cm = scda::correlation_matrix(p);
    CHECK(scda::loss_adv(cm, 3).value >= std::log(2.0) - 1e-12);
  }
}

TEST_CASE("known-class confusion hand values") {
  SUBCASE("identity correlation means no confusion") {
    Matrix p(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    auto cm = scda::correlation_matrix(p);
    CHECK(scda::loss_kcc(cm, 2).value == doctest::Approx(0.0));
    CHECK(scda::loss_tcc(cm).value == doctest::Approx(0.0));
  }

  SUBCASE("uniform rows over three classes") {
    Matrix p(2, 3, {1.0 / 3, 1.0 / 3, 1.0 / 3, 1.0 / 3, 1.0 / 3, 1.0 / 3});
    auto cm = scda::correlation_matrix(p);
    CHECK(scda::loss_kcc(cm, 2).value == doctest::Approx(1.0 / 3).epsilon(1e-12));
    CHECK(scda::loss_tcc(cm).value == doctest::Approx(2.0 / 3).epsilon(1e-12));
  }
}

TEST_CASE("confusion losses are bounded and nested") {
  scda::Rng rng(44);
  for (int trial = 0; trial < 30; ++trial) {
    const int k = 3 + static_cast<int>(rng.next_below(4));
    const int nk = k - 1;
    Matrix p = softmax_batch(7, k, rng);
    auto cm = scda::correlation_matrix(p);
    const double kcc = scda::loss_kcc(cm, nk).value;
    const double tcc = scda::loss_tcc(cm).value;
    CHECK(kcc >= 0.0);
    CHECK(kcc <= 1.0 + 1e-12);
    CHECK(tcc >= 0.0);
    CHECK(tcc <= 1.0 + 1e-12);
    // Total off-diagonal mass includes the known block.
    CHECK(k * tcc >= nk * kcc - 1e-12);
  }
}

TEST_CASE("correlation loss gradients match finite differences in prob space") {
  scda::Rng rng(45);
  for (int trial = 0; trial < 5; ++trial) {
    Matrix p = softmax_batch(6, 4, rng, 2.0);
    auto cm = scda::correlation_matrix(p);

    auto adv = scda::loss_adv(cm, 3);
    Matrix fd = fd_probs(p, [](const Matrix& q) {
      return scda::loss_adv(scda::correlation_matrix(q), 3).value;
    });
    CHECK(matrices_close(adv.d_probs, fd, 1e-4, 1e-8));

    auto kcc = scda::loss_kcc(cm, 3);
    fd = fd_probs(p, [](const Matrix& q) {
      return scda::loss_kcc(scda::correlation_matrix(q), 3).value;
    });
    CHECK(matrices_close(kcc.d_probs, fd, 1e-4, 1e-8));

    auto tcc = scda::loss_tcc(cm);
    fd = fd_probs(p, [](const Matrix& q) {
      return scda::loss_tcc(scda::correlation_matrix(q)).value;
    });
    CHECK(matrices_close(tcc.d_probs, fd, 1e-4, 1e-8));
  }
}

TEST_CASE("correlation backward is linear in the upstream seed") {
  scda::Rng rng(46);
  Matrix p = softmax_batch(6, 4, rng);
  auto cm = scda::correlation_matrix(p);
  auto adv = scda::loss_adv(cm, 3);
  auto kcc = scda::loss_kcc(cm, 3);

  Matrix g(4, 4);
  // Upstream seeds of adv and kcc reconstructed, then pushed back together.
  Matrix combined = adv.d_probs;
  scda::add_inplace(combined, kcc.d_probs);

  Matrix seed_sum(4, 4);
  {
    // adv seed
    double psum = 0.0;
    for (int j = 0; j < 3; ++j) psum += cm.r_hat.at(j, 3);
    psum /= 3;
    const double dp = 0.5 * (1.0 / (1.0 - psum) - 1.0 / psum);
    for (int j = 0; j < 3; ++j) seed_sum.at(j, 3) += dp / 3;
    // kcc seed
    for (int j = 0; j < 3; ++j)
      for (int j2 = 0; j2 < 3; ++j2)
        if (j2 != j) seed_sum.at(j, j2) += 1.0 / 3;
  }
  Matrix together = scda::correlation_backward(cm, seed_sum);
  CHECK(matrices_close(combined, together, 1e-10, 1e-12));
}

TEST_CASE("cross entropy hand values and gradient") {
  SUBCASE("perfect prediction scores zero") {
    Matrix p(2, 3, {1, 0, 0, 0, 0, 1});
    std::vector<int> labels = {0, 2};
    CHECK_EQ(scda::cross_entropy(p, labels).value, 0.0);
  }

  SUBCASE("uniform prediction scores ln K") {
    Matrix p(2, 4);
    p.fill(0.25);
    std::vector<int> labels = {1, 3};
    CHECK(scda::cross_entropy(p, labels).value ==
          doctest::Approx(std::log(4.0)).epsilon(1e-12));
  }

  SUBCASE("gradient is (probs - onehot) / batch") {
    scda::Rng rng(47);
    Matrix p = softmax_batch(3, 4, rng);
    std::vector<int> labels = {2, 0, 1};
    auto loss = scda::cross_entropy(p, labels);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 4; ++j) {
        const double want = (p.at(i, j) - (labels[i] == j ? 1.0 : 0.0)) / 3.0;
        CHECK(loss.d_logits.at(i, j) == doctest::Approx(want).epsilon(1e-15));
      }
  }

  SUBCASE("labels must be in range") {
    Matrix p(2, 3);
    p.fill(1.0 / 3);
    std::vector<int> bad = {0, 3};
    CHECK_THROWS_AS(scda::cross_entropy(p, bad), scda::ContractViolation);
    std::vector<int> neg = {-1, 0};
    CHECK_THROWS_AS(scda::cross_entropy(p, neg), scda::ContractViolation);
    std::vector<int> short_labels = {1};
    CHECK_THROWS_AS(scda::cross_entropy(p, short_labels), scda::ShapeError);
  }
}

TEST_CASE("every loss gradient survives a full-graph finite-difference check") {
  scda::Rng rng(48);
  scda::Mlp f = scda::make_mlp(4, {6}, 5, rng);
  for (auto& layer : f.layers)
    if (layer.activation == scda::Activation::Relu)
      layer.activation = scda::Activation::Tanh;
  scda::SoftmaxClassifier c = scda::make_classifier(5, 3, 1, rng);
  Matrix x(8, 4);
  for (double& v : x.values()) v = rng.uniform(-1.5, 1.5);
  auto params = oracles::parameter_view(f, c);

  SUBCASE("adversarial") {
    auto out = scda::forward(f, c, x);
    auto loss = scda::loss_adv(scda::correlation_matrix(out.probs), 3);
    auto g = scda::backward_from_probs(f, c, out.cache, loss.d_probs);
    auto fd = oracles::finite_difference(params, [&]() {
      auto r = scda::forward(f, c, x);
      return scda::loss_adv(scda::correlation_matrix(r.probs), 3).value;
    });
    CHECK(oracles::gradients_close(oracles::flatten(g), fd));
  }

  SUBCASE("known-class confusion") {
    auto out = scda::forward(f, c, x);
    auto loss = scda::loss_kcc(scda::correlation_matrix(out.probs), 3);
    auto g = scda::backward_from_probs(f, c, out.cache, loss.d_probs);
    auto fd = oracles::finite_difference(params, [&]() {
      auto r = scda::forward(f, c, x);
      return scda::loss_kcc(scda::correlation_matrix(r.probs), 3).value;
    });
    CHECK(oracles::gradients_close(oracles::flatten(g), fd));
  }

  SUBCASE("total confusion") {
    auto out = scda::forward(f, c, x);
    auto loss = scda::loss_tcc(scda::correlation_matrix(out.probs));
    auto g = scda::backward_from_probs(f, c, out.cache, loss.d_probs);
    auto fd = oracles::finite_difference(params, [&]() {
      auto r = scda::forward(f, c, x);
      return scda::loss_tcc(scda::correlation_matrix(r.probs)).value;
    });
    CHECK(oracles::gradients_close(oracles::flatten(g), fd));
  }

  SUBCASE("cross entropy") {
    std::vector<int> labels = {0, 1, 2, 0, 1, 2, 0, 1};
    auto out = scda::forward(f, c, x);
    auto loss = scda::cross_entropy(out.probs, labels);
    auto g = scda::backward_from_logits(f, c, out.cache, loss.d_logits);
    auto fd = oracles::finite_difference(params, [&]() {
      auto r = scda::forward(f, c, x);
      return scda::cross_entropy(r.probs, labels).value;
    });
    CHECK(oracles::gradients_close(oracles::flatten(g), fd));
  }
}

TEST_CASE("objective bookkeeping") {
  scda::LossBundle b;
  b.l_s = 1.0;
  b.l_adv = 0.7;
  b.l_kcc = 0.2;
  auto obj = scda::pretrain_objectives(b);
  CHECK(obj.objective_f == doctest::Approx(0.5));
  CHECK(obj.objective_c == doctest::Approx(1.9));

  scda::LossBundle incomplete;
  incomplete.l_s = 1.0;
  CHECK_THROWS_AS(scda::pretrain_objectives(incomplete),
                  scda::ContractViolation);

  scda::LossBundle adapt;
  adapt.l_s = 1.0;
  adapt.l_tcc = 0.25;
  CHECK(scda::adapt_objective(adapt) == doctest::Approx(1.25));
  adapt.l_t = 0.5;
  CHECK(scda::adapt_objective(adapt) == doctest::Approx(1.75));
  CHECK(scda::adapt_objective(adapt) >= 0.0);

  scda::LossBundle missing;
  missing.l_t = 0.5;
  CHECK_THROWS_AS(scda::adapt_objective(missing), scda::ContractViolation);
}
