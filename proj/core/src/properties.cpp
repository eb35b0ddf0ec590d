#include "gsaug/properties.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "gsaug/error.hpp"

namespace gsaug {

PropertyVector compute_properties(const Graph& g) {
  PropertyVector p;
  const double n = g.num_nodes();
  const double m = static_cast<double>(g.num_edges());
  p.num_nodes = n;
  p.density = n >= 2 ? 2.0 * m / (n * (n - 1.0)) : 0.0;
  p.avg_degree = 2.0 * m / n;

  double var = 0;
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    const double d = g.degree(v) - p.avg_degree;
    var += d * d;
  }
  p.degree_variance = var / n;

  if (m == 0) return p;

  double entropy = 0;
  double log_sum = 0;
  double fitted = 0;
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    const int d = g.degree(v);
    if (d == 0) continue;
    const double pi = d / (2.0 * m);
    entropy -= pi * std::log(pi);
    log_sum += std::log(d / 0.5);  // d_min - 0.5 with d_min = 1
    fitted += 1;
  }
  p.network_entropy = entropy;
  p.scale_free_exponent = 1.0 + fitted / log_sum;
  return p;
}

double quantile(std::vector<double> data, double q) {
  if (data.empty()) throw ConfigError("quantile of empty data");
  std::sort(data.begin(), data.end());
  const double pos = q * static_cast<double>(data.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, data.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return data[lo] + frac * (data[hi] - data[lo]);
}

namespace {

std::array<double, kNumProperties> transformed(const PropertyVector& v) {
  auto a = v.as_array();
  a[0] = std::log1p(a[0]);
  a[1] = std::log1p(a[1]);
  return a;
}

}  // namespace

std::array<double, kNumProperties> NormalizationStats::apply(const PropertyVector& v) const {
  auto a = transformed(v);
  for (std::size_t c = 0; c < kNumProperties; ++c) a[c] = (a[c] - center[c]) / scale[c];
  return a;
}

NormalizedProperties normalize_properties(std::span<const PropertyVector> vs) {
  if (vs.size() < 2) throw ConfigError("normalization needs at least two property vectors");
  NormalizedProperties out;
  out.values.resize(static_cast<Eigen::Index>(vs.size()), kNumProperties);
  for (std::size_t r = 0; r < vs.size(); ++r) {
    auto a = transformed(vs[r]);
    for (std::size_t c = 0; c < kNumProperties; ++c) out.values(r, c) = a[c];
  }
  for (std::size_t c = 0; c < kNumProperties; ++c) {
    std::vector<double> col(vs.size());
    for (std::size_t r = 0; r < vs.size(); ++r) col[r] = out.values(r, c);
    const double iqr = quantile(col, 0.75) - quantile(col, 0.25);
    out.stats.center[c] = quantile(col, 0.5);
    out.stats.scale[c] = iqr > 1e-12 ? iqr : 1.0;
    out.values.col(c) = (out.values.col(c).array() - out.stats.center[c]) / out.stats.scale[c];
  }
  return out;
}

FilterResult filter_outliers(const GraphCorpus& corpus, double z_max, double density_max) {
  if (corpus.graphs.empty()) throw DataError("cannot filter an empty corpus");
  if (!(z_max > 0)) throw ConfigError("z_max must be positive");
  if (!(density_max > 0 && density_max <= 1)) throw ConfigError("density_max must be in (0, 1]");
  corpus.validate();

  std::vector<PropertyVector> props;
  props.reserve(corpus.size());
  for (const auto& g : corpus.graphs) props.push_back(compute_properties(g));

  PropertyMatrix z = PropertyMatrix::Zero(static_cast<Eigen::Index>(props.size()), kNumProperties);
  if (props.size() >= 2) z = normalize_properties(props).values;

  FilterResult out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    std::ostringstream reason;
    if (props[i].density > density_max) {
      reason << "density " << props[i].density << " > " << density_max;
    } else {
      const double zmax = z.row(static_cast<Eigen::Index>(i)).cwiseAbs().maxCoeff();
      if (zmax > z_max) reason << "max |z| " << zmax << " > " << z_max;
    }
    if (!reason.str().empty()) {
      out.rejected.push_back({i, reason.str()});
      continue;
    }
    out.kept.push_back(i);
    out.corpus.graphs.push_back(corpus.graphs[i]);
    out.corpus.manifest.push_back(corpus.manifest[i]);
  }
  if (corpus.cluster_labels) {
    std::vector<int> labels;
    for (auto i : out.kept) labels.push_back((*corpus.cluster_labels)[i]);
    out.corpus.cluster_labels = std::move(labels);
  }
  return out;
}

void write_property_table(std::ostream& out, std::span<const PropertyVector> vs) {
  const auto names = PropertyVector::names();
  for (std::size_t c = 0; c < kNumProperties; ++c) out << (c ? "\t" : "") << names[c];
  out << '\n';
  out.precision(10);
  for (const auto& v : vs) {
    const auto a = v.as_array();
    for (std::size_t c = 0; c < kNumProperties; ++c) out << (c ? "\t" : "") << a[c];
    out << '\n';
  }
}

}  // namespace gsaug
