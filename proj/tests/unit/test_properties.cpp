#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "gsaug/error.hpp"
#include "gsaug/properties.hpp"
#include "helpers.hpp"

namespace gsaug {
namespace {

// Linear-interpolation quantile computed from order statistics located with
// nth_element, independent of the library's sort-based version.
double oracle_quantile(std::vector<double> v, double q) {
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const auto k = static_cast<std::size_t>(h);
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  const double lo = v[k];
  if (k + 1 >= v.size()) return lo;
  const double hi = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(k) + 1, v.end());
  return lo + (h - static_cast<double>(k)) * (hi - lo);
}

TEST(Properties, Triangle) {
  const auto p = compute_properties(test::complete_graph(3));
  EXPECT_DOUBLE_EQ(p.num_nodes, 3);
  EXPECT_DOUBLE_EQ(p.density, 1.0);
  EXPECT_DOUBLE_EQ(p.avg_degree, 2.0);
  EXPECT_DOUBLE_EQ(p.degree_variance, 0.0);
  EXPECT_NEAR(p.network_entropy, std::log(3.0), 1e-12);
}

TEST(Properties, Star) {
  const auto p = compute_properties(test::star_graph(4));
  EXPECT_DOUBLE_EQ(p.density, 0.5);
  EXPECT_DOUBLE_EQ(p.avg_degree, 1.5);
  EXPECT_DOUBLE_EQ(p.degree_variance, 0.75);
  // p = [1/2, 1/6, 1/6, 1/6]
  EXPECT_NEAR(p.network_entropy, -(0.5 * std::log(0.5) + 3.0 / 6.0 * std::log(1.0 / 6.0)), 1e-12);
}

TEST(Properties, EmptyGraph) {
  const auto p = compute_properties(Graph(5, {}));
  EXPECT_EQ(p.density, 0);
  EXPECT_EQ(p.avg_degree, 0);
  EXPECT_EQ(p.network_entropy, 0);
  EXPECT_EQ(p.scale_free_exponent, kUndefinedExponent);
}

TEST(Properties, PowerLawExponent) {
  // Discrete MLE with d_min = 1: 1 + k / sum ln(d / 0.5). A cycle has all
  // degrees 2, so the sum is n ln 4.
  const auto cyc = compute_properties(test::cycle_graph(9));
  EXPECT_NEAR(cyc.scale_free_exponent, 1.0 + 1.0 / std::log(4.0), 1e-12);
  const auto star = compute_properties(test::star_graph(5));
  EXPECT_NEAR(star.scale_free_exponent, 1.0 + 5.0 / (std::log(8.0) + 4 * std::log(2.0)), 1e-12);
}

TEST(Properties, EntropyInvariantsProperty) {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = static_cast<NodeId>(rng.uniform_int(2, 25));
    const Graph g = test::random_graph(n, 0.3, rng);
    const auto p = compute_properties(g);
    const auto q = compute_properties(permute_graph(g, test::random_permutation(n, rng)));
    EXPECT_NEAR(p.network_entropy, q.network_entropy, 1e-12);
    EXPECT_LE(p.network_entropy, std::log(static_cast<double>(n)) + 1e-12);
  }
  EXPECT_NEAR(compute_properties(test::cycle_graph(11)).network_entropy, std::log(11.0), 1e-12);
}

TEST(Normalize, ConstantAndSymmetricCases) {
  const auto v = compute_properties(test::cycle_graph(6));
  const std::vector<PropertyVector> same{v, v, v};
  const auto n = normalize_properties(same);
  EXPECT_EQ(n.values.cwiseAbs().maxCoeff(), 0.0);
  for (double s : n.stats.scale) EXPECT_EQ(s, 1.0);

  PropertyVector a, b;
  a.avg_degree = 1;
  b.avg_degree = 3;
  const std::vector<PropertyVector> two{a, b};
  const auto m = normalize_properties(two);
  EXPECT_DOUBLE_EQ(m.values(0, 3), -m.values(1, 3));
  EXPECT_NE(m.values(0, 3), 0.0);
  EXPECT_THROW(normalize_properties(std::span<const PropertyVector>(same.data(), 1)), ConfigError);
}

TEST(Normalize, MatchesMedianIqrOracle) {
  Rng rng(17);
  std::vector<PropertyVector> vs;
  for (int i = 0; i < 10; ++i) vs.push_back(compute_properties(test::random_graph(static_cast<NodeId>(rng.uniform_int(3, 20)), 0.35, rng)));
  const auto n = normalize_properties(vs);
  for (std::size_t c = 0; c < kNumProperties; ++c) {
    std::vector<double> col;
    for (const auto& v : vs) {
      double x = v.as_array()[c];
      if (c < 2) x = std::log1p(x);
      col.push_back(x);
    }
    const double med = oracle_quantile(col, 0.5);
    double iqr = oracle_quantile(col, 0.75) - oracle_quantile(col, 0.25);
    if (iqr <= 1e-12) iqr = 1.0;
    for (std::size_t r = 0; r < vs.size(); ++r) {
      EXPECT_NEAR(n.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)), (col[r] - med) / iqr, 1e-12);
    }
  }
}

GraphCorpus corpus_of(std::vector<Graph> graphs) {
  GraphCorpus c;
  for (auto& g : graphs) {
    c.graphs.push_back(std::move(g));
    c.manifest.push_back({"t", "toy"});
  }
  return c;
}

TEST(Filter, DensityRuleAndIdentity) {
  std::vector<Graph> gs;
  for (int i = 0; i < 10; ++i) gs.push_back(test::cycle_graph(10 + i % 3));
  gs.push_back(test::complete_graph(10));
  const auto c = corpus_of(gs);
  const auto r = filter_outliers(c, std::numeric_limits<double>::infinity(), 0.9);
  ASSERT_EQ(r.rejected.size(), 1u);
  EXPECT_EQ(r.rejected[0].index, 10u);
  EXPECT_NE(r.rejected[0].reason.find("density"), std::string::npos);

  const auto all = filter_outliers(c, std::numeric_limits<double>::infinity(), 1.0);
  EXPECT_EQ(all.corpus.size(), c.size());
  EXPECT_TRUE(all.rejected.empty());
}

TEST(Filter, LargeGraphRejectedByRobustZ) {
  Rng rng(23);
  std::vector<Graph> gs;
  for (int i = 0; i < 12; ++i) gs.push_back(test::cycle_graph(static_cast<NodeId>(rng.uniform_int(8, 12))));
  gs.push_back(test::cycle_graph(1000));  // 100x the median size
  const auto c = corpus_of(gs);

  // Robust z of log1p(n) for the big graph, by hand.
  std::vector<double> logn;
  for (const auto& g : gs) logn.push_back(std::log1p(g.num_nodes()));
  const double med = oracle_quantile(logn, 0.5);
  const double iqr = oracle_quantile(logn, 0.75) - oracle_quantile(logn, 0.25);
  ASSERT_GT((logn.back() - med) / iqr, 3.0);

  const auto r = filter_outliers(c, 3.0, 1.0);
  ASSERT_FALSE(r.rejected.empty());
  EXPECT_EQ(r.rejected.back().index, 12u);
  EXPECT_EQ(r.kept.size() + r.rejected.size(), c.size());
}

TEST(Properties, TableHasHeader) {
  std::ostringstream os;
  const std::vector<PropertyVector> vs{compute_properties(test::path_graph(4))};
  write_property_table(os, vs);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')),
            "num_nodes\tdensity\tnetwork_entropy\tavg_degree\tdegree_variance\tscale_free_exponent");
}

}  // namespace
}  // namespace gsaug
