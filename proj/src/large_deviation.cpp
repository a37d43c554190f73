#include "metaswitch/large_deviation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "metaswitch/linalg.hpp"
#include "metaswitch/parallel.hpp"

namespace metaswitch {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

struct Usable {
  std::vector<double> s, theta;
};

Usable usable_points(const SCGFCurve& c) {
  Usable u;
  for (std::size_t i = 0; i < c.s.size(); ++i) {
    if (!c.failed[i] && std::isfinite(c.theta[i])) {
      u.s.push_back(c.s[i]);
      u.theta.push_back(c.theta[i]);
    }
  }
  return u;
}

// Three-point derivative on a nonuniform grid, second order.
double centered_derivative(double hl, double hr, double fm, double f0, double fp) {
  return (hl * hl * fp - hr * hr * fm + (hr * hr - hl * hl) * f0) / (hl * hr * (hl + hr));
}

// k(s) = -theta'(s) at interior points of a usable curve.
std::vector<double> interior_rates(const Usable& u) {
  std::vector<double> k;
  for (std::size_t i = 1; i + 1 < u.s.size(); ++i) {
    const double hl = u.s[i] - u.s[i - 1];
    const double hr = u.s[i + 1] - u.s[i];
    k.push_back(-centered_derivative(hl, hr, u.theta[i - 1], u.theta[i], u.theta[i + 1]));
  }
  return k;
}

}  // namespace

double SCGFCurve::min_second_difference() const {
  const Usable u = usable_points(*this);
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i + 1 < u.s.size(); ++i) {
    const double hl = u.s[i] - u.s[i - 1];
    const double hr = u.s[i + 1] - u.s[i];
    const double d = (u.theta[i + 1] - u.theta[i]) / hr - (u.theta[i] - u.theta[i - 1]) / hl;
    worst = std::min(worst, d * 2.0 * hl * hr / (hl + hr));
  }
  return worst;
}

double scgf_at(const ModelParams& params, double s) {
  const Eigen::VectorXcd ev = eigenvalues(build_superoperator(params, s).matrix);
  return ev.real().maxCoeff();
}

SCGFCurve scgf(const ModelParams& params, const std::vector<double>& s_grid, int jobs) {
  for (std::size_t i = 1; i < s_grid.size(); ++i) {
    if (!(s_grid[i] > s_grid[i - 1])) {
      throw std::invalid_argument("scgf: s grid must be strictly increasing");
    }
  }
  for (double s : s_grid) {
    if (!std::isfinite(s)) throw std::invalid_argument("scgf: s grid must be finite");
  }
  params.validate();
  if (params.n_atoms > kMaxAtoms) {
    throw std::length_error("scgf: n_atoms exceeds superoperator cap");
  }
  SCGFCurve c;
  c.params = params;
  c.s = s_grid;
  c.theta.assign(s_grid.size(), kNaN);
  std::vector<char> failed(s_grid.size(), 0);
  parallel_for(s_grid.size(), jobs, [&](std::size_t i) {
    try {
      c.theta[i] = scgf_at(params, s_grid[i]);
    } catch (const EigensolverError&) {
      failed[i] = 1;
    }
  });
  c.failed.assign(failed.begin(), failed.end());
  return c;
}

std::vector<double> uniform_grid(double lo, double hi, int n) {
  if (n < 2 || !(hi > lo)) {
    throw std::invalid_argument("uniform_grid needs n >= 2 and hi > lo");
  }
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
  g.back() = hi;
  return g;
}

std::vector<double> default_s_grid() { return uniform_grid(-1.0, 1.0, 201); }

SCGFCurve scgf_refined(const ModelParams& params, const std::vector<double>& s_grid,
                       const RefineOptions& options, int jobs) {
  if (options.factor < 2) {
    throw std::invalid_argument("refinement factor must be at least 2");
  }
  SCGFCurve curve = scgf(params, s_grid, jobs);
  for (int round = 0; round < options.rounds; ++round) {
    const Usable u = usable_points(curve);
    if (u.s.size() < 4) break;
    const std::vector<double> k = interior_rates(u);
    // |dk/ds| between consecutive interior points i+1, i+2 of u.
    std::vector<double> slope;
    for (std::size_t j = 0; j + 1 < k.size(); ++j) {
      slope.push_back(std::abs(k[j + 1] - k[j]) / (u.s[j + 2] - u.s[j + 1]));
    }
    const double base = median(slope);
    std::vector<std::size_t> flagged;  // cell [u.s[c], u.s[c+1]]
    for (std::size_t j = 0; j < slope.size(); ++j) {
      if (slope[j] > options.prominence * base) {
        // The spike between interior points j+1 and j+2 is fed by the three cells around it.
        for (std::size_t c = j; c <= j + 2; ++c) flagged.push_back(c);
      }
    }
    std::sort(flagged.begin(), flagged.end());
    flagged.erase(std::unique(flagged.begin(), flagged.end()), flagged.end());
    std::vector<double> extra;
    for (std::size_t c : flagged) {
      if (c + 1 >= u.s.size()) continue;
      for (int f = 1; f < options.factor; ++f) {
        extra.push_back(u.s[c] + (u.s[c + 1] - u.s[c]) * f / options.factor);
      }
    }
    if (extra.empty()) break;
    const SCGFCurve more = scgf(params, extra, jobs);
    std::vector<std::size_t> order(curve.s.size() + more.s.size());
    SCGFCurve merged;
    merged.params = params;
    for (std::size_t i = 0; i < curve.s.size(); ++i) {
      merged.s.push_back(curve.s[i]);
      merged.theta.push_back(curve.theta[i]);
      merged.failed.push_back(curve.failed[i]);
    }
    for (std::size_t i = 0; i < more.s.size(); ++i) {
      merged.s.push_back(more.s[i]);
      merged.theta.push_back(more.theta[i]);
      merged.failed.push_back(more.failed[i]);
    }
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return merged.s[a] < merged.s[b]; });
    curve.s.clear();
    curve.theta.clear();
    curve.failed.clear();
    for (std::size_t i : order) {
      curve.s.push_back(merged.s[i]);
      curve.theta.push_back(merged.theta[i]);
      curve.failed.push_back(merged.failed[i]);
    }
  }
  return curve;
}

double mean_emission_rate(const ModelParams& params, double rel_tol) {
  double h = 1e-4;
  double previous = kNaN;
  double estimate = kNaN;
  while (h >= 1e-8) {
    estimate = -(scgf_at(params, h) - scgf_at(params, -h)) / (2.0 * h);
    if (std::isfinite(previous) &&
        std::abs(estimate - previous) <= rel_tol * std::max(1e-12, std::abs(estimate))) {
      break;
    }
    previous = estimate;
    h /= 10.0;
  }
  return estimate;
}

std::vector<double> RateFunction::k_per_atom() const {
  std::vector<double> out(k.size());
  for (std::size_t i = 0; i < k.size(); ++i) out[i] = k[i] / n_atoms;
  return out;
}

RateFunction legendre(const SCGFCurve& curve) {
  const Usable u = usable_points(curve);
  if (u.s.size() < 3) {
    throw LegendreError("legendre: need at least three usable SCGF points");
  }
  const double defect = curve.min_second_difference();
  if (defect < -kConvexityTol) {
    throw LegendreError("legendre: theta(s) is not convex (second difference " +
                        std::to_string(defect) + ")");
  }
  const std::vector<double> k = interior_rates(u);
  struct Point {
    double k, phi, s;
    bool repaired;
  };
  std::vector<Point> pts;
  for (std::size_t j = 0; j < k.size(); ++j) {
    const double s = u.s[j + 1];
    pts.push_back({k[j], -u.theta[j + 1] - s * k[j], s, false});
  }
  // k must decrease with s. Points that break the order (convexity noise near a kink) get
  // phi from the discrete Legendre maximum instead of the parametric formula.
  for (std::size_t j = 0; j < pts.size(); ++j) {
    const bool up = j > 0 && pts[j].k > pts[j - 1].k;
    const bool down = j + 1 < pts.size() && pts[j].k < pts[j + 1].k;
    if (up || down) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < u.s.size(); ++i) {
        best = std::max(best, -u.theta[i] - u.s[i] * pts[j].k);
      }
      pts[j].phi = best;
      pts[j].repaired = true;
    }
  }
  std::stable_sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
    return a.k < b.k;
  });
  RateFunction rf;
  rf.n_atoms = curve.params.n_atoms;
  for (const Point& p : pts) {
    rf.k.push_back(p.k);
    rf.phi.push_back(p.phi);
    rf.s.push_back(p.s);
    rf.repaired.push_back(p.repaired);
  }
  return rf;
}

double theta_from_rate(const RateFunction& rf, double s) {
  if (rf.k.empty()) throw std::invalid_argument("theta_from_rate: empty rate function");
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < rf.k.size(); ++i) best = std::min(best, rf.phi[i] + rf.k[i] * s);
  return -best;
}

BimodalityReport bimodality_report(const RateFunction& rf, double prominence, double height_tol,
                                   double flat_tol) {
  BimodalityReport rep;
  const std::size_t n = rf.k.size();
  if (n == 0) return rep;
  // Cell j joins points j and j+1 (k increasing, s decreasing).
  std::vector<double> slope;
  for (std::size_t j = 0; j + 1 < n; ++j) {
    const double ds = std::abs(rf.s[j] - rf.s[j + 1]);
    slope.push_back(ds > 0.0 ? (rf.k[j + 1] - rf.k[j]) / ds
                             : std::numeric_limits<double>::infinity());
  }
  const double base = median(slope);
  std::vector<std::pair<std::size_t, std::size_t>> kinks;  // [first point, last point]
  for (std::size_t j = 0; j < slope.size(); ++j) {
    if (!(slope[j] > prominence * base)) continue;
    if (!kinks.empty() && kinks.back().second == j) {
      kinks.back().second = j + 1;
    } else {
      kinks.emplace_back(j, j + 1);
    }
  }
  // Branches are the point ranges outside the kinks; each offers its smallest-phi point.
  const double floor = *std::min_element(rf.phi.begin(), rf.phi.end());
  const double level = floor + height_tol * rf.n_atoms;
  std::size_t start = 0;
  auto close_branch = [&](std::size_t first, std::size_t last) {
    std::size_t best = first;
    for (std::size_t i = first; i <= last; ++i) {
      if (rf.phi[i] < rf.phi[best]) best = i;
    }
    if (rf.phi[best] <= level) rep.maxima.push_back(rf.k[best]);
  };
  for (const auto& [a, b] : kinks) {
    close_branch(start, a);
    start = b;
    rep.kink_span += rf.k[b] - rf.k[a];
    rep.kink_s.push_back(0.5 * (rf.s[a] + rf.s[b]));
    for (std::size_t i = a; i < b; ++i) {
      if (std::abs(rf.phi[i]) < flat_tol && std::abs(rf.phi[i + 1]) < flat_tol) {
        rep.plateau_width += rf.k[i + 1] - rf.k[i];
      }
    }
  }
  close_branch(start, n - 1);
  rep.n_maxima = static_cast<int>(rep.maxima.size());
  return rep;
}

}  // namespace metaswitch
