#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace riskctl {

// Root of every error the library raises. The CLI maps subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Risk parameters outside the admissible range for the requested problem.
class InvalidRisk : public Error {
 public:
  using Error::Error;
};

// A model (MDP, LQG, policy, density) violates one of its structural invariants.
class InvalidModel : public Error {
 public:
  using Error::Error;
};

// A log-sum-exp aggregation produced a non-finite value even after max-shifting.
class Overflow : public Error {
 public:
  Overflow(int t, int state)
      : Error("overflow in log-sum-exp at t=" + std::to_string(t) + ", state=" + std::to_string(state)),
        t_(t),
        state_(state) {}
  int t() const { return t_; }
  int state() const { return state_; }

 private:
  int t_;
  int state_;
};

// Trajectory enumeration would exceed the configured path budget.
class TooLarge : public Error {
 public:
  using Error::Error;
};

class NotDeterministic : public Error {
 public:
  using Error::Error;
};

// Sigma_t^{-1} - eta * Pi_{t+1} lost positive definiteness.
class NeuroticBreakdown : public Error {
 public:
  explicit NeuroticBreakdown(int t)
      : Error("neurotic breakdown: Sigma^-1 - eta*Pi not positive definite at t=" + std::to_string(t)), t_(t) {}
  int t() const { return t_; }

 private:
  int t_;
};

class SingularMatrix : public Error {
 public:
  SingularMatrix(int t, const std::string& what)
      : Error("numerically singular " + what + " at t=" + std::to_string(t)), t_(t) {}
  int t() const { return t_; }

 private:
  int t_;
};

// Non-finite value in an RL update (exp overflow for large |eta| * value).
class NonFinite : public Error {
 public:
  using Error::Error;
};

class GridTooCoarse : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace riskctl
