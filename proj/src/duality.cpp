#include "riskctl/duality.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "riskctl/errors.hpp"
#include "riskctl/numerics.hpp"

namespace riskctl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> scaled(std::span<const double> g, double s) {
  std::vector<double> out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = s * g[i];
  return out;
}

std::vector<double> softmax(std::span<const double> a) {
  const double lse = log_sum_exp(a);
  std::vector<double> p(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) p[i] = std::exp(a[i] - lse);
  return p;
}

// log sum_{rho_i > 0} rho_i^alpha
double log_power_sum(std::span<const double> rho, double alpha) {
  LogSumExpAccumulator acc;
  for (double r : rho)
    if (r > 0.0) acc.add(alpha * std::log(r));
  return acc.value();
}

// Gradient of (1/s) log sum_i exp(s v_i) rho_i with respect to rho.
std::vector<double> grad_log_mgf(std::span<const double> v, std::span<const double> rho, double s) {
  const auto sv = scaled(v, s);
  const double log_norm = weighted_log_sum_exp(rho, sv);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::exp(sv[i] - log_norm) / s;
  return out;
}

// Gradient of H_alpha(rho) with respect to rho (alpha != 1).
std::vector<double> grad_renyi(std::span<const double> rho, double alpha) {
  const double log_ps = log_power_sum(rho, alpha);
  std::vector<double> out(rho.size());
  for (std::size_t i = 0; i < rho.size(); ++i)
    out[i] = rho[i] > 0.0 ? std::exp((alpha - 1.0) * std::log(rho[i]) - log_ps) / (1.0 - alpha) : kInf;
  return out;
}

// Largest-remainder rounding of p onto the grid {k / n}.
std::vector<double> nearest_grid_point(std::span<const double> p, long n) {
  std::vector<long> k(p.size());
  std::vector<std::pair<double, std::size_t>> rem(p.size());
  long total = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double scaled_p = p[i] * static_cast<double>(n);
    k[i] = static_cast<long>(std::floor(scaled_p));
    rem[i] = {scaled_p - static_cast<double>(k[i]), i};
    total += k[i];
  }
  std::sort(rem.begin(), rem.end(), [](auto a, auto b) { return a.first > b.first; });
  for (long j = 0; total < n; ++j, ++total) ++k[rem[static_cast<std::size_t>(j) % rem.size()].second];
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = static_cast<double>(k[i]) / static_cast<double>(n);
  return out;
}

// max_k |grad f(x_k) . (b - a)| over points x_k sampled on the segment [a, b].
template <class Grad>
double segment_lipschitz_bound(std::span<const double> a, std::span<const double> b, Grad&& grad) {
  constexpr int kSamples = 64;
  double worst = 0.0;
  std::vector<double> x(a.size());
  for (int s = 0; s <= kSamples; ++s) {
    const double lam = static_cast<double>(s) / kSamples;
    for (std::size_t i = 0; i < a.size(); ++i) x[i] = (1.0 - lam) * a[i] + lam * b[i];
    const auto gr = grad(x);
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double step = b[i] - a[i];
      if (step != 0.0) d += gr[i] * step;
    }
    worst = std::max(worst, std::abs(d));
  }
  return 2.0 * worst;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

FiniteDensity::FiniteDensity(std::vector<double> weights) : weights_(std::move(weights)) {
  if (weights_.empty()) throw InvalidModel("density over an empty ground set");
  double sum = 0.0;
  for (double w : weights_) {
    if (!std::isfinite(w) || w < 0.0) throw InvalidModel("density has a negative or non-finite weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw InvalidModel("density weights do not sum to 1");
}

bool FiniteDensity::has_full_support() const {
  return std::all_of(weights_.begin(), weights_.end(), [](double w) { return w > 0.0; });
}

double shannon_entropy(std::span<const double> rho) {
  double h = 0.0;
  for (double r : rho)
    if (r > 0.0) h -= r * std::log(r);
  return h;
}

double renyi_entropy(std::span<const double> rho, double alpha) {
  if (alpha == 0.0) throw InvalidModel("Renyi entropy order must not be 0");
  if (alpha == 1.0) return shannon_entropy(rho);
  return log_power_sum(rho, alpha) / (alpha * (1.0 - alpha));
}

double dual_lhs(std::span<const double> g, double beta) {
  if (beta == 0.0) throw InvalidRisk("dual_lhs requires beta != 0");
  return log_sum_exp(scaled(g, beta)) / beta;
}

double dual_rhs(std::span<const double> g, const FiniteDensity& rho, double beta, double gamma) {
  if (beta == 0.0 || gamma == 0.0 || !(beta < gamma)) throw InvalidRisk("dual_rhs requires beta, gamma != 0 and beta < gamma");
  const double gap = gamma - beta;
  const double alpha = 1.0 - gamma / gap;
  if (alpha < 0.0 && !rho.has_full_support()) return kInf;
  const double mgf = weighted_log_sum_exp(rho.weights(), scaled(g, gamma)) / gamma;
  return mgf - renyi_entropy(rho, alpha) / gap;
}

FiniteDensity closed_form_minimizer(std::span<const double> g, double beta, double gamma) {
  if (!(beta < gamma)) throw InvalidRisk("closed_form_minimizer requires beta < gamma");
  return FiniteDensity(softmax(scaled(g, -(gamma - beta))));
}

double dual_sup_lhs(std::span<const double> h, double gamma) {
  if (gamma == 0.0) throw InvalidRisk("dual_sup_lhs requires gamma != 0");
  return log_sum_exp(scaled(h, gamma)) / gamma;
}

double dual_sup_rhs(std::span<const double> h, const FiniteDensity& rho, double beta, double gamma) {
  if (beta == 0.0 || gamma == 0.0 || !(beta < gamma)) throw InvalidRisk("dual_sup_rhs requires beta, gamma != 0 and beta < gamma");
  const double gap = gamma - beta;
  const double alpha = gamma / gap;
  if (alpha < 0.0 && !rho.has_full_support()) return -kInf;
  const double mgf = weighted_log_sum_exp(rho.weights(), scaled(h, beta)) / beta;
  return mgf + renyi_entropy(rho, alpha) / gap;
}

FiniteDensity closed_form_maximizer(std::span<const double> h, double beta, double gamma) {
  if (!(beta < gamma)) throw InvalidRisk("closed_form_maximizer requires beta < gamma");
  return FiniteDensity(softmax(scaled(h, gamma - beta)));
}

bool DualityGridReport::passed(double tol) const {
  const double cell = resolution * (1.0 + 1e-9);
  return inf_argmin_distance <= cell && sup_argmax_distance <= cell && worst_inf_violation <= tol &&
         worst_sup_violation <= tol;
}

DualityGridReport verify_duality_grid(std::span<const double> g, double beta, double gamma, double resolution) {
  const std::size_t n = g.size();
  if (n < 1 || n > 4) throw InvalidModel("simplex grid verification supports ground sets of size 1..4");
  if (!(resolution > 0.0) || resolution > 1.0) throw InvalidModel("grid resolution must be in (0, 1]");
  const long steps = std::lround(1.0 / resolution);
  if (std::abs(static_cast<double>(steps) * resolution - 1.0) > 1e-9)
    throw InvalidModel("grid resolution must divide 1");

  DualityGridReport r;
  r.ground_set_size = n;
  r.resolution = resolution;
  r.beta = beta;
  r.gamma = gamma;
  r.lhs = dual_lhs(g, beta);
  const auto h = scaled(g, -1.0);
  r.sup_lhs = dual_sup_lhs(h, gamma);
  r.grid_min = kInf;
  r.grid_max = -kInf;
  r.worst_inf_violation = -kInf;
  r.worst_sup_violation = -kInf;

  std::vector<double> argmin, argmax;
  std::vector<long> k(n, 0);
  std::vector<double> rho(n);
  // Enumerate compositions k_0 + ... + k_{n-1} = steps.
  auto visit = [&](auto&& self, std::size_t i, long remaining) -> void {
    if (i + 1 == n) {
      k[i] = remaining;
      for (std::size_t j = 0; j < n; ++j) rho[j] = static_cast<double>(k[j]) / static_cast<double>(steps);
      ++r.grid_points;
      const FiniteDensity d(rho);
      const double inf_val = dual_rhs(g, d, beta, gamma);
      const double sup_val = dual_sup_rhs(h, d, beta, gamma);
      r.worst_inf_violation = std::max(r.worst_inf_violation, r.lhs - inf_val);
      r.worst_sup_violation = std::max(r.worst_sup_violation, sup_val - r.sup_lhs);
      if (inf_val < r.grid_min) {
        r.grid_min = inf_val;
        argmin = rho;
      }
      if (sup_val > r.grid_max) {
        r.grid_max = sup_val;
        argmax = rho;
      }
      return;
    }
    for (long v = 0; v <= remaining; ++v) {
      k[i] = v;
      self(self, i + 1, remaining - v);
    }
  };
  visit(visit, 0, steps);

  const auto rho_min = closed_form_minimizer(g, beta, gamma);
  const auto rho_max = closed_form_maximizer(h, beta, gamma);
  r.inf_gap = r.grid_min - r.lhs;
  r.sup_gap = r.sup_lhs - r.grid_max;
  r.inf_argmin_distance = max_abs_diff(argmin, rho_min.weights());
  r.sup_argmax_distance = max_abs_diff(argmax, rho_max.weights());

  const double gap = gamma - beta;
  const double alpha_inf = 1.0 - gamma / gap;
  const double alpha_sup = gamma / gap;
  const auto near_min = nearest_grid_point(rho_min.weights(), steps);
  const auto near_max = nearest_grid_point(rho_max.weights(), steps);
  r.inf_lipschitz_bound = segment_lipschitz_bound(rho_min.weights(), near_min, [&](std::span<const double> x) {
    auto a = grad_log_mgf(g, x, gamma);
    const auto b = grad_renyi(x, alpha_inf);
    for (std::size_t i = 0; i < n; ++i) a[i] -= b[i] / gap;
    return a;
  });
  r.sup_lipschitz_bound = segment_lipschitz_bound(rho_max.weights(), near_max, [&](std::span<const double> x) {
    auto a = grad_log_mgf(h, x, beta);
    const auto b = grad_renyi(x, alpha_sup);
    for (std::size_t i = 0; i < n; ++i) a[i] += b[i] / gap;
    return a;
  });
  const double slack = 1e-12 * (1.0 + std::abs(r.lhs) + std::abs(r.sup_lhs));
  if (r.inf_gap > r.inf_lipschitz_bound + slack || r.sup_gap > r.sup_lipschitz_bound + slack)
    throw GridTooCoarse("grid optimum misses the closed-form optimum by more than one cell's Lipschitz bound");
  return r;
}

nlohmann::json to_json(const DualityGridReport& r) {
  return nlohmann::json{
      {"ground_set_size", r.ground_set_size},
      {"resolution", r.resolution},
      {"grid_points", r.grid_points},
      {"beta", r.beta},
      {"gamma", r.gamma},
      {"inf", {{"lhs", r.lhs},
               {"grid_min", r.grid_min},
               {"gap", r.inf_gap},
               {"argmin_distance", r.inf_argmin_distance},
               {"lipschitz_bound", r.inf_lipschitz_bound},
               {"worst_violation", r.worst_inf_violation}}},
      {"sup", {{"lhs", r.sup_lhs},
               {"grid_max", r.grid_max},
               {"gap", r.sup_gap},
               {"argmax_distance", r.sup_argmax_distance},
               {"lipschitz_bound", r.sup_lipschitz_bound},
               {"worst_violation", r.worst_sup_violation}}},
      {"passed", r.passed()},
  };
}

}  // namespace riskctl
