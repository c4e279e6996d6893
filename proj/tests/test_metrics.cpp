#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "fairtab/metrics.hpp"
#include "helpers.hpp"

using namespace fairtab;

namespace {

// O(P*N) pairwise oracle, ties counted one half.
double auroc_pairwise(const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j]) continue;
      ++pairs;
      if (s[i] > s[j])
        wins += 1.0;
      else if (s[i] == s[j])
        wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

// Exhaustive threshold enumeration: at each distinct score, classify
// score >= threshold as positive and recount precision/recall from scratch.
double auprc_threshold_oracle(const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
  std::vector<double> thresholds = s;
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  std::size_t pos = 0;
  for (auto v : y) pos += v ? 1 : 0;
  double area = 0.0, prev_recall = 0.0;
  for (double th : thresholds) {
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] >= th) (y[i] ? tp : fp) += 1;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(pos);
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    area += precision * (recall - prev_recall);
    prev_recall = recall;
  }
  return area;
}

}  // namespace

TEST_CASE("auroc basics", "[metrics]") {
  std::vector<double> s{0.1, 0.9};
  std::vector<std::uint8_t> y{0, 1};
  CHECK(*auroc(s, y) == 1.0);

  std::vector<double> tied{0.4, 0.4, 0.4, 0.4};
  std::vector<std::uint8_t> y2{0, 1, 0, 1};
  CHECK(*auroc(tied, y2) == 0.5);

  std::vector<std::uint8_t> ones{1, 1};
  CHECK_FALSE(auroc(s, ones).has_value());
}

TEST_CASE("auroc matches pairwise oracle on random instances", "[metrics]") {
  std::mt19937_64 rng(123);
  std::uniform_int_distribution<std::size_t> nd(4, 50);
  std::bernoulli_distribution bd(0.4);
  std::uniform_int_distribution<int> sd(0, 9);  // coarse scores force ties
  int done = 0;
  while (done < 50) {
    const std::size_t n = nd(rng);
    std::vector<double> s(n);
    std::vector<std::uint8_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = sd(rng) / 10.0;
      y[i] = bd(rng) ? 1 : 0;
    }
    auto fast = auroc(s, y);
    if (!fast) continue;  // single-class draw
    ++done;
    CHECK(std::fabs(*fast - auroc_pairwise(s, y)) < 1e-12);
  }
}

TEST_CASE("auroc invariances", "[metrics]") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 30;
    std::vector<double> s = testutil::random_vector(rng, n, 0.0, 1.0);
    std::vector<std::uint8_t> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = i % 3 == 0;
    const double base = *auroc(s, y);

    // strictly monotone transform
    std::vector<double> st(n);
    for (std::size_t i = 0; i < n; ++i) st[i] = std::exp(3.0 * s[i]) + 7.0;
    CHECK(*auroc(st, y) == Catch::Approx(base).margin(1e-12));

    // score negation flips the ranking (tie-free scores w.p. 1)
    std::vector<double> sn(n);
    for (std::size_t i = 0; i < n; ++i) sn[i] = -s[i];
    CHECK(*auroc(sn, y) + base == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("auprc oracle and baselines", "[metrics]") {
  SECTION("perfect ranking") {
    std::vector<double> s{0.9, 0.8, 0.2, 0.1};
    std::vector<std::uint8_t> y{1, 1, 0, 0};
    CHECK(*auprc(s, y) == 1.0);
  }
  SECTION("no positives is undefined") {
    std::vector<double> s{0.9, 0.8};
    std::vector<std::uint8_t> y{0, 0};
    CHECK_FALSE(auprc(s, y).has_value());
  }
  SECTION("matches exhaustive threshold enumeration") {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<std::size_t> nd(2, 20);
    std::bernoulli_distribution bd(0.5);
    std::uniform_int_distribution<int> sd(0, 5);
    int done = 0;
    while (done < 50) {
      const std::size_t n = nd(rng);
      std::vector<double> s(n);
      std::vector<std::uint8_t> y(n);
      std::size_t pos = 0;
      for (std::size_t i = 0; i < n; ++i) {
        s[i] = sd(rng) / 5.0;
        y[i] = bd(rng) ? 1 : 0;
        pos += y[i];
      }
      if (pos == 0) continue;
      ++done;
      CHECK(*auprc(s, y) == Catch::Approx(auprc_threshold_oracle(s, y)).margin(1e-12));
    }
  }
  SECTION("random scores score near prevalence") {
    std::mt19937_64 rng(2024);
    const std::size_t n = 2000;
    const double prevalence = 0.3;
    std::vector<double> s(n);
    std::vector<std::uint8_t> y(n);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = ud(rng);
      y[i] = ud(rng) < prevalence ? 1 : 0;
    }
    CHECK(*auprc(s, y) == Catch::Approx(prevalence).margin(0.05));
  }
}

TEST_CASE("dpd hand cases", "[metrics]") {
  SECTION("identical rates") {
    std::vector<std::uint8_t> pred{1, 0, 1, 0};
    std::vector<int> grp{0, 0, 1, 1};
    CHECK(*dpd(pred, grp, 2) == 0.0);
  }
  SECTION("rates 0.3 vs 0.7") {
    std::vector<std::uint8_t> pred;
    std::vector<int> grp;
    for (int i = 0; i < 10; ++i) {
      pred.push_back(i < 3 ? 1 : 0);
      grp.push_back(0);
    }
    for (int i = 0; i < 10; ++i) {
      pred.push_back(i < 7 ? 1 : 0);
      grp.push_back(1);
    }
    CHECK(*dpd(pred, grp, 2) == Catch::Approx(0.4).margin(1e-15));
  }
  SECTION("three groups take max minus min") {
    std::vector<std::uint8_t> pred;
    std::vector<int> grp;
    auto emit = [&](int g, int hits, int n) {
      for (int i = 0; i < n; ++i) {
        pred.push_back(i < hits ? 1 : 0);
        grp.push_back(g);
      }
    };
    emit(0, 2, 10);  // 0.2
    emit(1, 5, 10);  // 0.5
    emit(2, 9, 10);  // 0.9
    CHECK(*dpd(pred, grp, 3) == Catch::Approx(0.7).margin(1e-15));
  }
  SECTION("single populated group is undefined") {
    std::vector<std::uint8_t> pred{1, 0};
    std::vector<int> grp{0, 0};
    CHECK_FALSE(dpd(pred, grp, 2).has_value());
  }
}

TEST_CASE("eod hand cases", "[metrics]") {
  auto build = [](const std::vector<std::pair<double, double>>& tpr_fpr, int per_class) {
    // 10 positives and 10 negatives per group by default
    std::vector<std::uint8_t> pred, lab;
    std::vector<int> grp;
    for (std::size_t g = 0; g < tpr_fpr.size(); ++g) {
      const int tp = static_cast<int>(std::round(tpr_fpr[g].first * per_class));
      const int fp = static_cast<int>(std::round(tpr_fpr[g].second * per_class));
      for (int i = 0; i < per_class; ++i) {
        pred.push_back(i < tp ? 1 : 0);
        lab.push_back(1);
        grp.push_back(static_cast<int>(g));
      }
      for (int i = 0; i < per_class; ++i) {
        pred.push_back(i < fp ? 1 : 0);
        lab.push_back(0);
        grp.push_back(static_cast<int>(g));
      }
    }
    return std::tuple{pred, lab, grp};
  };

  SECTION("identical confusion behavior gives zero") {
    auto [pred, lab, grp] = build({{0.6, 0.2}, {0.6, 0.2}}, 10);
    CHECK(*eod(pred, lab, grp, 2) == Catch::Approx(0.0).margin(1e-15));
  }
  SECTION("tpr gap only") {
    auto [pred, lab, grp] = build({{0.9, 0.1}, {0.5, 0.1}}, 10);
    CHECK(*eod(pred, lab, grp, 2) == Catch::Approx(0.4).margin(1e-15));
  }
  SECTION("both gaps add") {
    auto [pred, lab, grp] = build({{0.8, 0.3}, {0.6, 0.1}}, 10);
    CHECK(*eod(pred, lab, grp, 2) == Catch::Approx(0.4).margin(1e-15));
  }
  SECTION("group missing a label class is excluded") {
    std::vector<std::uint8_t> pred{1, 0, 1, 0, 1};
    std::vector<std::uint8_t> lab{1, 1, 0, 0, 1};  // group 1 has positives only
    std::vector<int> grp{0, 0, 0, 0, 1};
    CHECK_FALSE(eod(pred, lab, grp, 2).has_value());
  }
}

TEST_CASE("dpd/eod match naive counting oracles on random instances", "[metrics]") {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<std::size_t> nd(6, 40);
  std::uniform_int_distribution<int> gd(0, 2);
  std::bernoulli_distribution bd(0.5);
  int done = 0;
  while (done < 50) {
    const std::size_t n = nd(rng);
    std::vector<std::uint8_t> pred(n), lab(n);
    std::vector<int> grp(n);
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] = bd(rng) ? 1 : 0;
      lab[i] = bd(rng) ? 1 : 0;
      grp[i] = gd(rng);
    }
    // naive per-group recounts
    auto rate = [&](int g, auto&& want) {
      std::size_t hit = 0, tot = 0;
      for (std::size_t i = 0; i < n; ++i)
        if (grp[i] == g && want(i)) {
          ++tot;
          hit += pred[i];
        }
      return std::pair{tot, tot ? static_cast<double>(hit) / static_cast<double>(tot) : 0.0};
    };
    std::vector<double> rates, tprs, fprs;
    for (int g = 0; g < 3; ++g) {
      auto [tot, r] = rate(g, [](std::size_t) { return true; });
      if (tot) rates.push_back(r);
      auto [np, tpr] = rate(g, [&](std::size_t i) { return lab[i] == 1; });
      auto [nn, fpr] = rate(g, [&](std::size_t i) { return lab[i] == 0; });
      if (np && nn) {
        tprs.push_back(tpr);
        fprs.push_back(fpr);
      }
    }
    auto d = dpd(pred, grp, 3);
    if (rates.size() >= 2) {
      REQUIRE(d.has_value());
      const auto [lo, hi] = std::minmax_element(rates.begin(), rates.end());
      CHECK(*d == *hi - *lo);
    } else {
      CHECK_FALSE(d.has_value());
    }
    auto e = eod(pred, lab, grp, 3);
    if (tprs.size() >= 2) {
      REQUIRE(e.has_value());
      const auto [tl, th] = std::minmax_element(tprs.begin(), tprs.end());
      const auto [fl, fh] = std::minmax_element(fprs.begin(), fprs.end());
      CHECK(*e == (*th - *tl) + (*fh - *fl));
      ++done;
    } else {
      CHECK_FALSE(e.has_value());
    }
  }
}

TEST_CASE("dpd/eod invariant under subgroup relabeling", "[metrics]") {
  std::mt19937_64 rng(31);
  std::bernoulli_distribution bd(0.5);
  std::uniform_int_distribution<int> gd(0, 3);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 60;
    std::vector<std::uint8_t> pred(n), lab(n);
    std::vector<int> grp(n), re(n);
    std::vector<int> perm{2, 3, 0, 1};
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] = bd(rng) ? 1 : 0;
      lab[i] = bd(rng) ? 1 : 0;
      grp[i] = gd(rng);
      re[i] = perm[static_cast<std::size_t>(grp[i])];
    }
    CHECK(dpd(pred, grp, 4) == dpd(pred, re, 4));
    CHECK(eod(pred, lab, grp, 4) == eod(pred, lab, re, 4));
  }
}

TEST_CASE("cdf table", "[metrics]") {
  SECTION("hand count and upper endpoint") {
    std::vector<double> probs{0.2, 0.2, 0.8};
    std::vector<int> grp{0, 0, 0};
    std::vector<double> grid{0.25, 1.0};
    auto table = cdf_table(probs, grp, 1, grid);
    REQUIRE(table.curves.size() == 1);
    CHECK(table.curves[0].cdf[0] == Catch::Approx(2.0 / 3.0));
    CHECK(table.curves[0].cdf[1] == 1.0);
  }
  SECTION("monotone per subgroup and empty groups recorded") {
    std::mt19937_64 rng(404);
    std::vector<double> probs = testutil::random_vector(rng, 200, 0.0, 1.0);
    std::vector<int> grp(200);
    for (std::size_t i = 0; i < grp.size(); ++i) grp[i] = static_cast<int>(i % 2);
    std::vector<double> grid;
    for (int i = 0; i <= 100; ++i) grid.push_back(i / 100.0);
    auto table = cdf_table(probs, grp, 3, grid);
    CHECK(table.empty_subgroups == std::vector<int>{2});
    for (const auto& c : table.curves) {
      for (std::size_t x = 1; x < c.cdf.size(); ++x) CHECK(c.cdf[x] >= c.cdf[x - 1]);
      CHECK(c.cdf.back() == 1.0);
    }
  }
  SECTION("non-increasing grid rejected") {
    std::vector<double> probs{0.5};
    std::vector<int> grp{0};
    std::vector<double> grid{0.5, 0.5};
    CHECK_THROWS_AS(cdf_table(probs, grp, 1, grid), ContractError);
  }
}

TEST_CASE("reduction fraction", "[metrics]") {
  CHECK(reduction_fraction(0.1176, 0.0715) == Catch::Approx(0.392).margin(0.001));
  CHECK(reduction_fraction(0.25, 0.25) == 0.0);
  CHECK(reduction_fraction(0.25, 0.0) == 1.0);
  CHECK_THROWS_AS(reduction_fraction(0.0, 0.1), DomainError);
  CHECK_THROWS_AS(reduction_fraction(-0.5, 0.1), DomainError);
}
