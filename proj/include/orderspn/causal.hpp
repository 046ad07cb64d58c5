#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "orderspn/circuit.hpp"
#include "orderspn/infer.hpp"
#include "orderspn/leaf.hpp"
#include "orderspn/score.hpp"

namespace orderspn {

// Expected edge weights into variable i under the leaf (S1, i):
// entry j = E[1[j in G_i] B_{j,i}], zero for j outside S1 ∩ C_i. Implementations
// must be safe to call concurrently.
class LeafWeightModel {
 public:
  virtual ~LeafWeightModel() = default;
  virtual Eigen::VectorXd leaf_effects(const LeafTable& leaf, ParentSet s1, int i) const = 0;
};

// E[B_{j,i} | j in G_i] = weights(j, i) for every parent set.
class FixedWeightModel : public LeafWeightModel {
 public:
  explicit FixedWeightModel(Eigen::MatrixXd weights) : weights_(std::move(weights)) {}
  Eigen::VectorXd leaf_effects(const LeafTable& leaf, ParentSet s1, int i) const override;

 private:
  Eigen::MatrixXd weights_;
};

struct BgeWeightOptions {
  int sample_count = 64;
  // Enumerate the leaf distribution exactly when it has at most this many parent sets.
  int exact_limit = 256;
  std::uint64_t seed = 0;
};

// Posterior-mean regression coefficients of the BGe model, averaged over the
// leaf's parent-set distribution.
class BgePosteriorWeightModel : public LeafWeightModel {
 public:
  BgePosteriorWeightModel(const Dataset& data, const BgeParams& params, const std::vector<ParentSet>& candidates,
                          BgeWeightOptions options = {});
  Eigen::VectorXd leaf_effects(const LeafTable& leaf, ParentSet s1, int i) const override;

  // Coefficient of each parent j on child i (zero elsewhere), length d.
  Eigen::VectorXd coefficients(int i, ParentSet parents) const;

 private:
  int d_;
  BgeScorer scorer_;
  BgeWeightOptions options_;
  std::vector<ParentSet> candidates_;
  std::vector<std::vector<Eigen::VectorXd>> cache_;  // per variable, per local mask over C_i
};

std::unique_ptr<LeafWeightModel> fixed_weight_model(Eigen::MatrixXd weights);
std::unique_ptr<LeafWeightModel> bge_posterior_weight_model(const Dataset& data, const BgeParams& params,
                                                            const std::vector<ParentSet>& candidates,
                                                            BgeWeightOptions options = {});

// Expected total causal effects under q: out(i, j) = E_q[sum over directed paths
// i ~> j of the product of edge weights]. Zero diagonal.
Eigen::MatrixXd bce_matrix(const OrderSpn& spn, const LeafTable& leaf, const LeafWeightModel& model,
                           PassCounters* counters = nullptr);

}  // namespace orderspn
