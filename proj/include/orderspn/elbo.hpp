#pragma once

#include <functional>
#include <vector>

#include "orderspn/circuit.hpp"
#include "orderspn/infer.hpp"
#include "orderspn/leaf.hpp"

namespace orderspn {

// Unconstrained parameters theta (one per product, i.e. per sum edge) with
// phi = log-softmax(theta) within each sum node, plus the per-leaf constant
// log C = log tau_i(S1 ∩ C_i).
struct ElboState {
  std::vector<double> theta;
  std::vector<double> leaf_log_c;

  // theta taken from the circuit's current log-weights.
  static ElboState init(const OrderSpn& spn, const LeafTable& leaf);
  std::vector<double> log_weights(const OrderSpn& spn) const;
  void write_weights(OrderSpn& spn) const;
};

// ELBO(T) = sum_c phi_c (ELBO(c) - log phi_c), ELBO(P) = ELBO(left) + ELBO(right),
// ELBO(leaf) = log C. The root value lower-bounds log Z of the order-modular target.
double elbo(const OrderSpn& spn, const ElboState& state, PassCounters* counters = nullptr);

struct ElboWithGradient {
  double value = 0.0;
  std::vector<double> gradient;  // d ELBO / d theta, aligned with state.theta
};

ElboWithGradient elbo_and_gradient(const OrderSpn& spn, const ElboState& state);
std::vector<double> elbo_gradients(const OrderSpn& spn, const ElboState& state);

struct FitConfig {
  double learning_rate = 0.1;
  int iterations = 700;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Optional stop once the ELBO improves by less than `tolerance` for `patience` steps.
  bool early_stopping = false;
  double tolerance = 1e-10;
  int patience = 50;
};

struct FitTrace {
  // elbo[t] is the ELBO after t Adam steps; elbo[0] is the starting value.
  std::vector<double> elbo;
  int steps = 0;
};

// Adam ascent on theta; writes the final weights back into `spn`.
// Throws NumericalError on a non-finite ELBO or gradient.
FitTrace fit(OrderSpn& spn, const LeafTable& leaf, const FitConfig& config,
             const std::function<void(int, double)>& on_step = {});

}  // namespace orderspn
