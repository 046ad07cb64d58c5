#pragma once

#include <vector>

#include <Eigen/Dense>

#include "orderspn/causal.hpp"
#include "orderspn/circuit.hpp"
#include "orderspn/elbo.hpp"
#include "orderspn/leaf.hpp"

// Serial, recursive versions of the layered passes. They share no code with the
// parallel kernels and serve as the comparison baseline in tests and benchmarks.
namespace orderspn::reference {

double marginal(const OrderSpn& spn, const LeafTable& leaf, const EdgeConjunction& c);
double log_mass(const OrderSpn& spn, const LeafTable& leaf);
ElboWithGradient elbo_and_gradient(const OrderSpn& spn, const ElboState& state);
Eigen::MatrixXd bce_matrix(const OrderSpn& spn, const LeafTable& leaf, const LeafWeightModel& model);

}  // namespace orderspn::reference
