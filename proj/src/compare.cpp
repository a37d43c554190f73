#include "metaswitch/compare.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace metaswitch {

namespace {

long long delta_key(double delta) { return std::llround(delta * 1e9); }

}  // namespace

SpectralExponents spectral_exponents(const SpectralSeries& series) {
  SpectralExponents out;
  std::vector<double> nr, lr, ng, g;
  for (std::size_t i = 0; i < series.sizes.size(); ++i) {
    if (i < series.r.size() && std::isfinite(series.r[i]) && series.r[i] > 0.0) {
      nr.push_back(series.sizes[i]);
      lr.push_back(std::log(series.r[i]));
    }
    if (i < series.gaps.size() && std::isfinite(series.gaps[i]) && series.gaps[i] > 0.0) {
      ng.push_back(series.sizes[i]);
      g.push_back(series.gaps[i]);
    }
  }
  if (nr.size() >= 2) {
    out.ln_r = fit_line(Eigen::Map<Eigen::VectorXd>(nr.data(), static_cast<Eigen::Index>(nr.size())),
                        Eigen::Map<Eigen::VectorXd>(lr.data(), static_cast<Eigen::Index>(lr.size())));
  }
  if (ng.size() >= 2) {
    out.gap = fit_exponential(
        Eigen::Map<Eigen::VectorXd>(ng.data(), static_cast<Eigen::Index>(ng.size())),
        Eigen::Map<Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size())));
  }
  return out;
}

ComparisonTable compare_methods(const ComparisonInputs& inputs) {
  std::map<long long, double> deltas;
  std::map<long long, const SpectralSeries*> spectral;
  std::map<long long, const QjmcSeries*> qjmc;
  std::map<long long, const Quasipotential*> instanton;
  for (const auto& s : inputs.spectral) {
    spectral[delta_key(s.delta)] = &s;
    deltas[delta_key(s.delta)] = s.delta;
  }
  for (const auto& q : inputs.qjmc) {
    qjmc[delta_key(q.delta)] = &q;
    deltas[delta_key(q.delta)] = q.delta;
  }
  for (const auto& q : inputs.instanton) {
    instanton[delta_key(q.delta)] = &q;
    deltas[delta_key(q.delta)] = q.delta;
  }

  ComparisonTable table;
  for (const auto& [key, delta] : deltas) {
    std::vector<std::string> why;
    ComparisonRow row;
    row.delta = delta;
    if (auto it = spectral.find(key); it == spectral.end()) {
      why.push_back("no spectral data");
    } else {
      const SpectralExponents ex = spectral_exponents(*it->second);
      if (!ex.ln_r) why.push_back("ln r fit needs two sizes");
      if (!ex.gap) why.push_back("gap fit needs two sizes");
      if (ex.ln_r) row.phi_db_spectral = ex.ln_r->slope;
      if (ex.gap) row.tau_exponent_spectral = -ex.gap->rate;
    }
    if (auto it = qjmc.find(key); it == qjmc.end()) {
      why.push_back("no trajectory data");
    } else {
      const SwitchStats& st = it->second->stats;
      if (!st.fit_dark || !st.fit_bright) {
        why.push_back("waiting-time fits need enough switches at four sizes");
      } else {
        row.phi_db_qjmc = st.fit_dark->rate - st.fit_bright->rate;
      }
      const RelaxationScaling rs = relaxation_times(st);
      if (!rs.fit) {
        why.push_back("relaxation-time fit needs two sizes");
      } else {
        row.tau_exponent_qjmc = rs.fit->rate;
      }
    }
    if (auto it = instanton.find(key); it == instanton.end()) {
      why.push_back("no instanton data");
    } else if (!it->second->bistable) {
      why.push_back("not bistable");
    } else if (!it->second->converged) {
      why.push_back("instanton not converged");
    } else {
      row.phi_db_instanton = it->second->phi_db;
    }
    if (why.empty()) {
      table.rows.push_back(row);
    } else {
      std::string reason;
      for (const auto& w : why) reason += (reason.empty() ? "" : "; ") + w;
      table.missing.push_back({delta, reason});
    }
  }
  return table;
}

std::optional<double> zero_crossing(const std::vector<double>& x, const std::vector<double>& values) {
  const std::size_t n = std::min(x.size(), values.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (values[i] == 0.0) return x[i];
    if (i + 1 < n && (values[i] < 0.0) != (values[i + 1] < 0.0) && values[i + 1] != 0.0) {
      return x[i] - values[i] * (x[i + 1] - x[i]) / (values[i + 1] - values[i]);
    }
  }
  return std::nullopt;
}

std::optional<double> peak_location(const std::vector<double>& x, const std::vector<double>& values) {
  const std::size_t n = std::min(x.size(), values.size());
  if (n == 0) return std::nullopt;
  const auto best = static_cast<std::size_t>(
      std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(n)) -
      values.begin());
  if (best == 0 || best + 1 == n) return x[best];
  // Vertex of the parabola through the three points around the maximum.
  const double x0 = x[best - 1], x1 = x[best], x2 = x[best + 1];
  const double y0 = values[best - 1], y1 = values[best], y2 = values[best + 1];
  const double den = (x0 - x1) * (x0 - x2) * (x1 - x2);
  const double a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / den;
  const double b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / den;
  if (!(a < 0.0)) return x1;
  return std::clamp(-b / (2.0 * a), x0, x2);
}

}  // namespace metaswitch
