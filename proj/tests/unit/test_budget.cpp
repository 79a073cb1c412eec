#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <vector>

#include "ppft/budget.hpp"
#include "ppft/rng.hpp"
#include "test_util.hpp"

using namespace ppft;

namespace {

std::string fmt3(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", round_half_even(x));
  return buf;
}

PooledEmbeddings slots_from(const Matrix& m) {
  PooledEmbeddings u;
  u.slots = m;
  u.k = 1;
  u.source_rows = m.rows();
  for (std::size_t j = 0; j < m.rows(); ++j) u.blocks.push_back({j, j + 1});
  return u;
}

}  // namespace

TEST_CASE("calibration reproduces the reference table at B=150") {
  struct Row {
    const char* dataset;
    double n, d_max;
    const char* eps;
    const char* tau;
  };
  const Row rows[] = {
      {"Pri-DDXP", 106.00, 1.64, "0.863", "1.413"},
      {"Pri-NLICE", 72.00, 1.39, "1.499", "0.960"},
      {"Pri-SLJA", 193.00, 1.45, "0.536", "2.573"},
      {"SQuAD", 178.78, 1.70, "0.494", "2.384"},
      {"CSQA", 48.43, 1.68, "1.844", "0.646"},
  };
  for (const auto& row : rows) {
    INFO(row.dataset);
    const auto p = calibrate({150.0, row.n, row.d_max});
    REQUIRE(fmt3(p.eps_dchi) == row.eps);
    REQUIRE(fmt3(p.tau) == row.tau);
    REQUIRE(p.eps_vector == 75.0);
  }

  const auto built_in = reference_budget_rows();
  REQUIRE(built_in.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    REQUIRE(built_in[i].dataset == rows[i].dataset);
    REQUIRE(built_in[i].n == rows[i].n);
    REQUIRE(built_in[i].d_max == rows[i].d_max);
  }
}

TEST_CASE("all three formulas coincide at (B=2, n=1, D_max=2)") {
  const auto p = calibrate({2.0, 1.0, 2.0});
  REQUIRE(p.eps_dchi == 1.0);
  REQUIRE(p.tau == 1.0);
  REQUIRE(p.eps_vector == 1.0);
}

TEST_CASE("calibrate rejects non-positive inputs") {
  REQUIRE_ERROR(calibrate({0.0, 10.0, 1.0}), ErrorCode::BadBudget);
  REQUIRE_ERROR(calibrate({150.0, 0.5, 1.0}), ErrorCode::BadBudget);
  REQUIRE_ERROR(calibrate({150.0, 10.0, -1.0}), ErrorCode::BadBudget);
}

TEST_CASE("display rounding is half-to-even") {
  REQUIRE(round_half_even(0.0625) == 0.062);  // 62.5 -> 62, even
  REQUIRE(round_half_even(0.1875) == 0.188);  // 187.5 -> 188, even
  REQUIRE(fmt3(0.96) == "0.960");
}

TEST_CASE("monotonicity across random specs") {
  CounterRng rng(808, 0);
  for (int t = 0; t < 200; ++t) {
    const double b = 1.0 + 200.0 * rng.next_double();
    const double n = 1.0 + 300.0 * rng.next_double();
    const double dmax = 0.1 + 2.0 * rng.next_double();
    const double dn = 0.5 + 10.0 * rng.next_double();
    const double dd = 0.05 + rng.next_double();
    const auto base = calibrate({b, n, dmax});
    const auto more_n = calibrate({b, n + dn, dmax});
    const auto more_d = calibrate({b, n, dmax + dd});
    REQUIRE(more_n.eps_dchi < base.eps_dchi);
    REQUIRE(more_d.eps_dchi < base.eps_dchi);
    REQUIRE(more_n.tau > base.tau);
    // eps_vector depends on B alone
    REQUIRE(more_n.eps_vector == base.eps_vector);
    REQUIRE(more_d.eps_vector == base.eps_vector);
  }
}

TEST_CASE("composition bound formulas") {
  REQUIRE(composition_bound({75.0, 1, std::nullopt}) == 150.0);
  REQUIRE(composition_bound({75.0, 0, std::nullopt}) == 0.0);
  REQUIRE(composition_bound({3.0, 0, std::vector<double>{0.5, 1.0}}) == 4.5);
  REQUIRE_ERROR(composition_bound({3.0, 0, std::vector<double>{2.5}}), ErrorCode::BoundViolation);
  REQUIRE_ERROR(composition_bound({3.0, 0, std::vector<double>{-0.1}}), ErrorCode::BoundViolation);
  // distances above 2 are fine once the unit-norm claim is dropped
  CompositionQuery q{3.0, 0, std::vector<double>{2.5}, false};
  REQUIRE(composition_bound(q) == 7.5);
}

TEST_CASE("empirical composition check stays under the analytic bound") {
  // unit-norm slots, so actual distances are in [0, 2] and the full chain
  //   empirical <= eps * sum d_j <= 2 * eps * s
  // holds without caveats
  CounterRng rng(99, 5);
  Matrix a(4, 16), b(4, 16);
  for (std::size_t j = 0; j < 4; ++j) {
    rng.fill_sphere(a.row(j));
    rng.fill_sphere(b.row(j));
  }
  const auto u = slots_from(a);
  const auto u_prime = slots_from(b);

  std::vector<double> dists;
  for (std::size_t j = 0; j < 4; ++j) dists.push_back(l2_dist(a.row(j), b.row(j)));
  const double eps = 2.5;
  const double bound = composition_bound({eps, 0, dists, true});

  const double observed = empirical_composition_check(u, u_prime, eps, 10000, 31);
  REQUIRE(observed <= bound);
  REQUIRE(bound <= composition_bound({eps, 4, std::nullopt}) + 1e-12 * bound);

  // adversarial point y_j = u'_j attains the per-slot bound exactly
  double attained = 0.0;
  for (std::size_t j = 0; j < 4; ++j) {
    attained += std::abs(log_density_ratio(b.row(j), a.row(j), b.row(j), eps));
  }
  REQUIRE(attained >= 0.5 * bound);
  REQUIRE(attained == Catch::Approx(bound).epsilon(1e-12));
}

TEST_CASE("empirical composition check of identical sequences is zero") {
  CounterRng rng(7, 7);
  Matrix a(3, 8);
  for (double& v : a.data()) v = rng.next_normal();
  const auto u = slots_from(a);
  REQUIRE(empirical_composition_check(u, u, 5.0, 50, 17) == 0.0);
}

TEST_CASE("one differing slot obeys the per-slot bound") {
  CounterRng rng(15, 2);
  Matrix a(3, 8);
  for (double& v : a.data()) v = rng.next_normal();
  Matrix b = a;
  b.at(1, 3) += 0.75;
  const double d = l2_dist(a.row(1), b.row(1));
  const double eps = 3.0;
  const double observed =
      empirical_composition_check(slots_from(a), slots_from(b), eps, 5000, 23);
  REQUIRE(observed <= eps * d);
}

TEST_CASE("empirical composition check validates input") {
  Matrix a(2, 4), b(3, 4);
  REQUIRE_ERROR(empirical_composition_check(slots_from(a), slots_from(b), 1.0, 10, 0),
                ErrorCode::ShapeError);
  Matrix c(2, 4);
  REQUIRE_ERROR(empirical_composition_check(slots_from(a), slots_from(c), 1.0, 0, 0),
                ErrorCode::EmptyInput);
}

TEST_CASE("estimate_dmax on hand-built tables") {
  TokenVocab antipodal;
  antipodal.tokens = {"p", "q"};
  antipodal.d_e = 4;
  antipodal.table = Matrix(2, 4);
  antipodal.table.at(0, 0) = 1.0;
  antipodal.table.at(1, 0) = -1.0;
  REQUIRE(estimate_dmax(antipodal, 100, 1) == 2.0);

  TokenVocab duplicated;
  duplicated.tokens = {"p", "q"};
  duplicated.d_e = 4;
  duplicated.table = Matrix(2, 4);
  duplicated.table.at(0, 1) = 1.0;
  duplicated.table.at(1, 1) = 1.0;
  REQUIRE(estimate_dmax(duplicated, 100, 1) == 0.0);

  TokenVocab lonely;
  lonely.tokens = {"p"};
  lonely.d_e = 4;
  lonely.table = Matrix(1, 4);
  REQUIRE_ERROR(estimate_dmax(lonely, 100, 1), ErrorCode::NeedTwoTokens);
}

TEST_CASE("estimate_dmax is exhaustive for small vocabularies") {
  std::vector<std::string> tokens;
  for (int i = 0; i < 100; ++i) tokens.push_back("w" + std::to_string(i));
  const auto vocab = build_vocab(tokens, 12, 9);
  // independent exhaustive oracle
  double expected = 0.0;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    for (std::size_t j = i + 1; j < vocab.size(); ++j) {
      expected = std::max(expected, l2_dist(vocab.table.row(i), vocab.table.row(j)));
    }
  }
  REQUIRE(estimate_dmax(vocab, 1, 4) == expected);
  REQUIRE(expected <= 2.0 + 1e-9);  // unit-norm diameter
}
