#pragma once

#include <span>
#include <vector>

#include "json.hpp"

namespace riskctl {

// Probability vector over a finite ground set.
class FiniteDensity {
 public:
  explicit FiniteDensity(std::vector<double> weights);

  std::size_t size() const { return weights_.size(); }
  double operator[](std::size_t i) const { return weights_[i]; }
  std::span<const double> weights() const { return weights_; }
  bool has_full_support() const;

 private:
  std::vector<double> weights_;
};

// Renyi entropy with the 1/(alpha(1-alpha)) scaling, summed over the support of
// rho. alpha == 1 returns the Shannon entropy; alpha == 0 is rejected. Negative
// alpha is allowed (formal extension).
double renyi_entropy(std::span<const double> rho, double alpha);
inline double renyi_entropy(const FiniteDensity& rho, double alpha) { return renyi_entropy(rho.weights(), alpha); }
double shannon_entropy(std::span<const double> rho);

// (1/beta) log sum_i exp(beta g_i), max-shifted.
double dual_lhs(std::span<const double> g, double beta);

// (1/gamma) log sum_i exp(gamma g_i) rho_i - (1/(gamma-beta)) H_{1-gamma/(gamma-beta)}(rho).
// Returns +inf when the entropy order is negative and rho lacks full support.
double dual_rhs(std::span<const double> g, const FiniteDensity& rho, double beta, double gamma);

// rho ∝ exp(-(gamma - beta) g): the unique minimizer of dual_rhs.
FiniteDensity closed_form_minimizer(std::span<const double> g, double beta, double gamma);

// Supremum form with h = -g:
//   (1/gamma) log sum exp(gamma h) = sup_rho (1/beta) log sum exp(beta h) rho + (1/(gamma-beta)) H_{gamma/(gamma-beta)}(rho)
double dual_sup_lhs(std::span<const double> h, double gamma);
double dual_sup_rhs(std::span<const double> h, const FiniteDensity& rho, double beta, double gamma);
// rho ∝ exp((gamma - beta) h).
FiniteDensity closed_form_maximizer(std::span<const double> h, double beta, double gamma);

struct DualityGridReport {
  std::size_t ground_set_size = 0;
  double resolution = 0.0;
  std::size_t grid_points = 0;
  double beta = 0.0;
  double gamma = 0.0;
  // inf form
  double lhs = 0.0;
  double grid_min = 0.0;
  double inf_gap = 0.0;               // grid_min - lhs (>= 0 up to rounding)
  double inf_argmin_distance = 0.0;   // max-norm distance to the closed-form minimizer
  double inf_lipschitz_bound = 0.0;
  double worst_inf_violation = 0.0;   // max over grid of lhs - rhs (should be <= 0)
  // sup form
  double sup_lhs = 0.0;
  double grid_max = 0.0;
  double sup_gap = 0.0;               // sup_lhs - grid_max (>= 0 up to rounding)
  double sup_argmax_distance = 0.0;
  double sup_lipschitz_bound = 0.0;
  double worst_sup_violation = 0.0;   // max over grid of rhs - sup_lhs (should be <= 0)

  // Argmin/argmax within one grid cell of the closed forms and no violation above tol.
  bool passed(double tol = 1e-10) const;
};

// Exhaustive simplex grid for ground sets of size <= 4. Throws GridTooCoarse if
// the grid optimum misses the closed-form optimum by more than the Lipschitz
// bound of the objective over one grid cell.
DualityGridReport verify_duality_grid(std::span<const double> g, double beta, double gamma, double resolution);

nlohmann::json to_json(const DualityGridReport& report);

}  // namespace riskctl
