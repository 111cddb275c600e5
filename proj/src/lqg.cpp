#include "riskctl/lqg.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "riskctl/errors.hpp"
#include "riskctl/numerics.hpp"

namespace riskctl {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kMinRcond = 1e-12;
constexpr double kSymmetryTol = 1e-10;

MatrixXd symmetrize(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

bool is_spd(const MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() == 0) return false;
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol * (1.0 + m.cwiseAbs().maxCoeff())) return false;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.info() == Eigen::Success && es.eigenvalues().minCoeff() > 0.0;
}

void check_shape(const MatrixXd& m, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
  if (m.rows() != rows || m.cols() != cols)
    throw InvalidModel(what + " has shape " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                       ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
}

// Solve M X = rhs with a rank-revealing check.
MatrixXd lu_solve(const MatrixXd& M, const MatrixXd& rhs, int t, const char* what) {
  Eigen::PartialPivLU<MatrixXd> lu(M);
  if (!(lu.rcond() >= kMinRcond)) throw SingularMatrix(t, what);
  return lu.solve(rhs);
}

// Square root factor L with L L' = m for a symmetric positive semidefinite m.
MatrixXd psd_factor(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(m));
  const VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal();
}

struct PolicyStep {
  MatrixXd K;
  MatrixXd S_factor;
  Eigen::LLT<MatrixXd> S_llt;  // S = L L'
  double log_norm = 0.0;           // -(m/2) log 2pi - (1/2) log |S|
};

struct Sampler {
  const LQGModel& model;
  std::vector<PolicyStep> policy;
  std::vector<MatrixXd> noise_factor;
  MatrixXd x0_factor;
  // Scratch.
  VectorXd x, x_next, mean_u, u, z_u, z_x, diff;

  Sampler(const LQGModel& m, const RiccatiSolution& sol) : model(m) {
    const int n = m.state_dim();
    const int k = m.control_dim();
    if (static_cast<int>(sol.K.size()) != m.horizon || static_cast<int>(sol.S.size()) != m.horizon)
      throw InvalidModel("Riccati solution horizon does not match the model");
    for (int t = 0; t < m.horizon; ++t) {
      PolicyStep p;
      p.K = sol.K[t];
      p.S_factor = psd_factor(sol.S[t]);
      p.S_llt.compute(sol.S[t]);
      if (p.S_llt.info() == Eigen::Success) {
        double log_det = 0.0;
        const MatrixXd L = p.S_llt.matrixL();
        for (int i = 0; i < k; ++i) log_det += 2.0 * std::log(L(i, i));
        p.log_norm = -0.5 * k * std::log(2.0 * std::numbers::pi) - 0.5 * log_det;
      }
      policy.push_back(std::move(p));
      noise_factor.push_back(psd_factor(m.Sigma[t]));
    }
    x0_factor = psd_factor(m.x0_cov);
    x.resize(n);
    x_next.resize(n);
    z_x.resize(n);
    mean_u.resize(k);
    u.resize(k);
    z_u.resize(k);
    diff.resize(k);
  }

  void draw(VectorXd& z, Rng& rng) {
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  }

  // One rollout; returns (cost, log_prob). Records states/actions when out != nullptr.
  std::pair<double, double> run(Rng& rng, LQGTrajectory* out) {
    const int T = model.horizon;
    draw(z_x, rng);
    x.noalias() = x0_factor * z_x;
    x += model.x0_mean;
    double cost = 0.0;
    double log_prob = 0.0;
    if (out) out->states.push_back(x);
    for (int t = 0; t < T; ++t) {
      const PolicyStep& p = policy[t];
      mean_u.noalias() = -p.K * x;
      draw(z_u, rng);
      u.noalias() = p.S_factor * z_u;
      diff = u;  // u - mean
      u += mean_u;
      cost += 0.5 * (x.dot(model.Q[t] * x) + u.dot(model.R[t] * u));
      // Mahalanobis term of log N(u; mean, S) via L^{-1} diff.
      const VectorXd w = p.S_llt.matrixL().solve(diff);
      log_prob += p.log_norm - 0.5 * w.squaredNorm();
      draw(z_x, rng);
      x_next.noalias() = model.A[t] * x;
      x_next.noalias() += model.B[t] * u;
      x_next.noalias() += noise_factor[t] * z_x;
      x.swap(x_next);
      if (out) {
        out->actions.push_back(u);
        out->states.push_back(x);
      }
    }
    cost += 0.5 * x.dot(model.Q_T * x);
    return {cost, log_prob};
  }
};

}  // namespace

void LQGModel::validate() const {
  if (horizon <= 0) throw InvalidModel("LQG horizon must be positive");
  const auto n = Q_T.rows();
  if (n == 0) throw InvalidModel("LQG state dimension must be positive");
  const auto T = static_cast<std::size_t>(horizon);
  if (A.size() != T || B.size() != T || Sigma.size() != T || Q.size() != T || R.size() != T)
    throw InvalidModel("LQG matrix sequences must have one entry per time step");
  const auto m = R.front().rows();
  if (m == 0) throw InvalidModel("LQG control dimension must be positive");
  check_shape(Q_T, n, n, "Q_T");
  if (!is_spd(Q_T)) throw InvalidModel("Q_T is not symmetric positive definite");
  for (int t = 0; t < horizon; ++t) {
    const std::string at = "[" + std::to_string(t) + "]";
    check_shape(A[t], n, n, "A" + at);
    check_shape(B[t], n, m, "B" + at);
    check_shape(Sigma[t], n, n, "Sigma" + at);
    check_shape(Q[t], n, n, "Q" + at);
    check_shape(R[t], m, m, "R" + at);
    if (!is_spd(Sigma[t])) throw InvalidModel("Sigma" + at + " is not symmetric positive definite");
    if (!is_spd(Q[t])) throw InvalidModel("Q" + at + " is not symmetric positive definite");
    if (!is_spd(R[t])) throw InvalidModel("R" + at + " is not symmetric positive definite");
  }
  if (x0_mean.size() != n) throw InvalidModel("x0_mean has the wrong dimension");
  check_shape(x0_cov, n, n, "x0_cov");
  if ((x0_cov - x0_cov.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol) throw InvalidModel("x0_cov is not symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(x0_cov, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-12) throw InvalidModel("x0_cov is not positive semidefinite");
}

LQGModel LQGModel::time_invariant(int horizon, const MatrixXd& A, const MatrixXd& B, const MatrixXd& Sigma,
                                  const MatrixXd& Q, const MatrixXd& R, const MatrixXd& Q_T, const VectorXd& x0_mean,
                                  const MatrixXd& x0_cov) {
  LQGModel m;
  m.horizon = horizon;
  const auto T = static_cast<std::size_t>(std::max(horizon, 0));
  m.A.assign(T, A);
  m.B.assign(T, B);
  m.Sigma.assign(T, Sigma);
  m.Q.assign(T, Q);
  m.R.assign(T, R);
  m.Q_T = Q_T;
  m.x0_mean = x0_mean;
  m.x0_cov = x0_cov;
  return m;
}

RiccatiSolution solve_riccati(const LQGModel& model, double eta) {
  model.validate();
  if (!std::isfinite(eta)) throw InvalidRisk("eta must be finite");
  const int T = model.horizon;
  const auto n = model.state_dim();
  const MatrixXd I = MatrixXd::Identity(n, n);
  RiccatiSolution sol;
  sol.eta = eta;
  sol.Pi.resize(T + 1);
  sol.K.resize(T);
  sol.S.resize(T);
  sol.Pi[T] = model.Q_T;
  for (int t = T - 1; t >= 0; --t) {
    const MatrixXd& P = sol.Pi[t + 1];
    const MatrixXd& A = model.A[t];
    const MatrixXd& B = model.B[t];
    const MatrixXd& Sg = model.Sigma[t];

    Eigen::LLT<MatrixXd> sigma_llt(Sg);
    const MatrixXd sigma_inv = symmetrize(sigma_llt.solve(I));
    Eigen::SelfAdjointEigenSolver<MatrixXd> feas(symmetrize(sigma_inv - eta * P), Eigen::EigenvaluesOnly);
    if (feas.info() != Eigen::Success || !(feas.eigenvalues().minCoeff() > 0.0)) throw NeuroticBreakdown(t);

    const MatrixXd BRB = B * lu_solve(model.R[t], B.transpose(), t, "R");
    const MatrixXd M = I - eta * Sg * P + BRB * P;
    sol.Pi[t] = symmetrize(model.Q[t] + A.transpose() * P * lu_solve(M, A, t, "I - eta Sigma Pi + B R^-1 B' Pi"));

    // W = P (I - eta Sigma P)^{-1}, computed as the transpose of N' \ P.
    const MatrixXd N = I - eta * Sg * P;
    const MatrixXd W = symmetrize(lu_solve(N.transpose(), P, t, "I - eta Sigma Pi").transpose());
    const MatrixXd H = symmetrize(model.R[t] + B.transpose() * W * B);
    Eigen::PartialPivLU<MatrixXd> h_lu(H);
    if (!(h_lu.rcond() >= kMinRcond)) throw SingularMatrix(t, "R + B' W B");
    sol.K[t] = h_lu.solve(B.transpose() * W * A);
    sol.S[t] = symmetrize(h_lu.inverse());
  }
  return sol;
}

std::vector<LQGTrajectory> simulate(const LQGModel& model, const RiccatiSolution& sol, int num_rollouts, Rng& rng) {
  Sampler sampler(model, sol);
  std::vector<LQGTrajectory> out(std::max(num_rollouts, 0));
  for (auto& traj : out) {
    traj.states.reserve(model.horizon + 1);
    traj.actions.reserve(model.horizon);
    const auto [cost, log_prob] = sampler.run(rng, &traj);
    traj.cost = cost;
    traj.log_prob = log_prob;
  }
  return out;
}

MCEstimate mc_objective_estimate(const LQGModel& model, const RiccatiSolution& sol, double eta, int num_rollouts,
                                 Rng& rng) {
  if (num_rollouts < 1) throw InvalidModel("mc_objective needs at least one rollout");
  Sampler sampler(model, sol);
  std::vector<double> phi(num_rollouts);
  for (auto& v : phi) {
    const auto [cost, log_prob] = sampler.run(rng, nullptr);
    v = cost + log_prob;
  }
  const double N = num_rollouts;
  MCEstimate est;
  est.num_rollouts = num_rollouts;
  if (eta == 0.0) {
    double mean = 0.0;
    for (double v : phi) mean += v;
    mean /= N;
    double ss = 0.0;
    for (double v : phi) ss += (v - mean) * (v - mean);
    est.value = mean;
    est.std_error = num_rollouts > 1 ? std::sqrt(ss / (N - 1.0) / N) : 0.0;
    return est;
  }
  // Max-shifted weights w_i = exp(eta (phi_i - phi_max)) with eta phi_max the largest exponent.
  double m = -std::numeric_limits<double>::infinity();
  for (double v : phi) m = std::max(m, eta * v);
  double sum = 0.0;
  for (double v : phi) sum += std::exp(eta * v - m);
  const double wbar = sum / N;
  double ss = 0.0;
  for (double v : phi) {
    const double d = std::exp(eta * v - m) - wbar;
    ss += d * d;
  }
  est.value = (m + std::log(wbar)) / eta;
  est.std_error = num_rollouts > 1 ? std::sqrt(ss / (N - 1.0) / N) / (wbar * std::abs(eta)) : 0.0;
  return est;
}

double mc_objective(const LQGModel& model, const RiccatiSolution& sol, double eta, int num_rollouts, Rng& rng) {
  return mc_objective_estimate(model, sol, eta, num_rollouts, rng).value;
}

namespace {

nlohmann::json matrix_json(const MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> r(m.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[j] = m(i, j);
    rows.push_back(r);
  }
  return rows;
}

nlohmann::json sequence_json(const std::vector<MatrixXd>& ms) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& m : ms) out.push_back(matrix_json(m));
  return out;
}

MatrixXd matrix_from(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) throw InvalidModel(what + " must be a nested array");
  const auto rows = j.size();
  const auto cols = j[0].size();
  MatrixXd m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].size() != cols) throw InvalidModel(what + " has ragged rows");
    for (std::size_t k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

std::vector<MatrixXd> sequence_from(const nlohmann::json& j, int horizon, const std::string& what) {
  // Depth 3 -> one matrix per step; depth 2 -> time-invariant.
  if (j.is_array() && !j.empty() && j[0].is_array() && !j[0].empty() && j[0][0].is_array()) {
    if (static_cast<int>(j.size()) != horizon) throw InvalidModel(what + " must list one matrix per time step");
    std::vector<MatrixXd> out;
    for (std::size_t t = 0; t < j.size(); ++t) out.push_back(matrix_from(j[t], what));
    return out;
  }
  return std::vector<MatrixXd>(horizon, matrix_from(j, what));
}

}  // namespace

nlohmann::json to_json(const LQGModel& model) {
  return nlohmann::json{{"horizon", model.horizon},
                        {"A", sequence_json(model.A)},
                        {"B", sequence_json(model.B)},
                        {"Sigma", sequence_json(model.Sigma)},
                        {"Q", sequence_json(model.Q)},
                        {"R", sequence_json(model.R)},
                        {"Q_T", matrix_json(model.Q_T)},
                        {"x0_mean", std::vector<double>(model.x0_mean.data(), model.x0_mean.data() + model.x0_mean.size())},
                        {"x0_cov", matrix_json(model.x0_cov)}};
}

nlohmann::json to_json(const RiccatiSolution& sol) {
  return nlohmann::json{{"eta", sol.eta}, {"Pi", sequence_json(sol.Pi)}, {"K", sequence_json(sol.K)}, {"S", sequence_json(sol.S)}};
}

LQGModel lqg_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw InvalidModel("LQG document must be an object");
  for (const auto& [key, _] : doc.items()) {
    static const char* kKeys[] = {"horizon", "A", "B", "Sigma", "Q", "R", "Q_T", "x0_mean", "x0_cov"};
    bool known = false;
    for (const char* k : kKeys) known = known || key == k;
    if (!known) throw InvalidModel("unknown key '" + key + "' in LQG document");
  }
  try {
    LQGModel m;
    m.horizon = doc.at("horizon").get<int>();
    if (m.horizon <= 0) throw InvalidModel("LQG horizon must be positive");
    m.A = sequence_from(doc.at("A"), m.horizon, "A");
    m.B = sequence_from(doc.at("B"), m.horizon, "B");
    m.Sigma = sequence_from(doc.at("Sigma"), m.horizon, "Sigma");
    m.Q = sequence_from(doc.at("Q"), m.horizon, "Q");
    m.R = sequence_from(doc.at("R"), m.horizon, "R");
    m.Q_T = matrix_from(doc.at("Q_T"), "Q_T");
    const auto n = m.Q_T.rows();
    if (doc.contains("x0_mean")) {
      const auto v = doc.at("x0_mean").get<std::vector<double>>();
      m.x0_mean = Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    } else {
      m.x0_mean = VectorXd::Zero(n);
    }
    m.x0_cov = doc.contains("x0_cov") ? matrix_from(doc.at("x0_cov"), "x0_cov") : MatrixXd::Zero(n, n);
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidModel(std::string("malformed LQG document: ") + e.what());
  }
}

}  // namespace riskctl
