#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "orderspn/model.hpp"

namespace orderspn {

// Normal-Wishart hyperparameters of the BGe score. T = t_scale * I.
struct BgeParams {
  double alpha_mu = 1.0;
  double alpha_w = 0.0;
  double t_scale = 0.5;
  Eigen::VectorXd prior_mean;

  // alpha_mu = 1, alpha_w = d + 2, T = I / 2, zero prior mean.
  static BgeParams defaults(int d);
  void validate(int d) const;
};

// Precomputes the posterior matrix R once per dataset so local scores cost one
// Cholesky factorisation of the parent block.
class BgeScorer {
 public:
  BgeScorer(const Dataset& data, BgeParams params);

  int d() const { return d_; }
  int n() const { return n_; }
  const BgeParams& params() const { return params_; }
  // R = T + S_N + (alpha_mu N / (alpha_mu + N)) (nu - mean)(nu - mean)^T
  const Eigen::MatrixXd& posterior_matrix() const { return posterior_; }

  // log p(D_child | parents).
  double local_score(int child, ParentSet parents) const;

  // Posterior-mean regression coefficients of `child` on `parents`, in parents.members() order.
  Eigen::VectorXd posterior_mean_coefficients(int child, ParentSet parents) const;

 private:
  int d_ = 0;
  int n_ = 0;
  BgeParams params_;
  Eigen::MatrixXd posterior_;
};

double bge_local_score(const Dataset& data, int child, ParentSet parents, const BgeParams& params);

enum class StructurePrior { kFair, kUniform };

// -log C(d - 1, |parents|); the per-variable normalising constant is dropped.
double fair_log_prior(int d, ParentSet parents);

inline constexpr int kDefaultCandidateCap = 16;

// log pi_i(G_i) for every G_i within the candidate set C_i. Entries are indexed by
// the local mask over C_i's members in increasing order.
class LocalScoreTable {
 public:
  LocalScoreTable() = default;
  LocalScoreTable(std::vector<ParentSet> candidates, std::vector<std::vector<double>> log_scores);

  int d() const { return static_cast<int>(candidates_.size()); }
  ParentSet candidates(int i) const { return candidates_[i]; }
  const std::vector<ParentSet>& candidate_sets() const { return candidates_; }
  const std::vector<int>& candidate_members(int i) const { return members_[i]; }
  std::span<const double> log_scores(int i) const { return log_scores_[i]; }

  // Throws ConfigError if `parents` is not inside C_i.
  double log_score(int i, ParentSet parents) const;
  // Drops members outside C_i.
  std::uint32_t local_mask(int i, ParentSet global) const;
  ParentSet global_mask(int i, std::uint32_t local) const;

  nlohmann::json to_json() const;
  static LocalScoreTable from_json(const nlohmann::json& j);

 private:
  std::vector<ParentSet> candidates_;
  std::vector<std::vector<int>> members_;
  std::vector<std::vector<double>> log_scores_;
};

LocalScoreTable build_score_table(const Dataset& data, const std::vector<ParentSet>& candidates,
                                  const BgeParams& params, StructurePrior prior = StructurePrior::kFair,
                                  int candidate_cap = kDefaultCandidateCap);

// Greedy forward selection: repeatedly add the parent that maximises the BGe local score.
std::vector<ParentSet> select_candidates(const Dataset& data, int k, const BgeParams& params);

// C_i = all other variables.
std::vector<ParentSet> full_candidates(int d);

}  // namespace orderspn
