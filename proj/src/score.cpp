#include "orderspn/score.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "orderspn/error.hpp"
#include "orderspn/math.hpp"

namespace orderspn {

BgeParams BgeParams::defaults(int d) {
  BgeParams p;
  p.alpha_mu = 1.0;
  p.alpha_w = d + 2.0;
  p.t_scale = 0.5;
  p.prior_mean = Eigen::VectorXd::Zero(d);
  return p;
}

void BgeParams::validate(int d) const {
  if (!(alpha_mu > 0)) throw ConfigError("BgeParams: alpha_mu must be positive");
  if (!(alpha_w > d - 1)) throw ConfigError("BgeParams: alpha_w must exceed d - 1");
  if (!(t_scale > 0)) throw ConfigError("BgeParams: t_scale must be positive");
  if (prior_mean.size() != d) throw ConfigError("BgeParams: prior_mean has wrong length");
}

BgeScorer::BgeScorer(const Dataset& data, BgeParams params) : d_(data.d()), n_(data.n()), params_(std::move(params)) {
  if (params_.prior_mean.size() == 0) params_.prior_mean = Eigen::VectorXd::Zero(d_);
  params_.validate(d_);
  if (n_ < 1) throw ConfigError("BgeScorer: empty dataset");
  data.validate();
  const Eigen::VectorXd mean = data.rows.colwise().mean().transpose();
  const Eigen::MatrixXd centered = data.rows.rowwise() - mean.transpose();
  const Eigen::VectorXd shift = params_.prior_mean - mean;
  const double am = params_.alpha_mu;
  posterior_ = params_.t_scale * Eigen::MatrixXd::Identity(d_, d_) + centered.transpose() * centered +
               (am * n_ / (am + n_)) * shift * shift.transpose();
}

double BgeScorer::local_score(int child, ParentSet parents) const {
  if (parents.contains(child)) throw ConfigError("bge_local_score: child among its parents");
  const int l = parents.size();
  const double big_n = n_;
  const double awp = params_.alpha_w - d_ + l + 1;
  const double constant = -0.5 * big_n * std::log(std::numbers::pi) +
                          0.5 * std::log(params_.alpha_mu / (params_.alpha_mu + big_n)) - std::lgamma(0.5 * awp) +
                          std::lgamma(0.5 * (awp + big_n)) + 0.5 * (awp + l) * std::log(params_.t_scale);
  const double r_cc = posterior_(child, child);
  if (l == 0) {
    if (!(r_cc > 0)) throw NumericalError("bge_local_score: non-positive scatter for variable " + std::to_string(child));
    return constant - 0.5 * (awp + big_n) * std::log(r_cc);
  }
  const auto idx = parents.members();
  Eigen::MatrixXd block(l, l);
  Eigen::VectorXd cross(l);
  for (int a = 0; a < l; ++a) {
    cross(a) = posterior_(idx[a], child);
    for (int b = 0; b < l; ++b) block(a, b) = posterior_(idx[a], idx[b]);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(block);
  if (llt.info() != Eigen::Success) throw NumericalError("bge_local_score: parent block not positive definite");
  const Eigen::MatrixXd& lower = llt.matrixL();
  double log_det = 0.0;
  for (int a = 0; a < l; ++a) log_det += 2.0 * std::log(lower(a, a));
  const Eigen::VectorXd solved = llt.matrixL().solve(cross);
  const double schur = r_cc - solved.squaredNorm();
  if (!(schur > 0) || !std::isfinite(log_det))
    throw NumericalError("bge_local_score: non-positive-definite scatter for variable " + std::to_string(child));
  return constant - 0.5 * (awp + big_n) * std::log(schur) - 0.5 * log_det;
}

Eigen::VectorXd BgeScorer::posterior_mean_coefficients(int child, ParentSet parents) const {
  const auto idx = parents.members();
  const int l = static_cast<int>(idx.size());
  if (l == 0) return Eigen::VectorXd();
  Eigen::MatrixXd block(l, l);
  Eigen::VectorXd cross(l);
  for (int a = 0; a < l; ++a) {
    cross(a) = posterior_(idx[a], child);
    for (int b = 0; b < l; ++b) block(a, b) = posterior_(idx[a], idx[b]);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(block);
  if (llt.info() != Eigen::Success) throw NumericalError("posterior_mean_coefficients: singular parent block");
  return llt.solve(cross);
}

double bge_local_score(const Dataset& data, int child, ParentSet parents, const BgeParams& params) {
  return BgeScorer(data, params).local_score(child, parents);
}

double fair_log_prior(int d, ParentSet parents) { return -log_binomial(d - 1, parents.size()); }

LocalScoreTable::LocalScoreTable(std::vector<ParentSet> candidates, std::vector<std::vector<double>> log_scores)
    : candidates_(std::move(candidates)), log_scores_(std::move(log_scores)) {
  if (candidates_.size() != log_scores_.size()) throw ConfigError("LocalScoreTable: size mismatch");
  members_.reserve(candidates_.size());
  for (int i = 0; i < d(); ++i) {
    if (candidates_[i].contains(i)) throw ConfigError("LocalScoreTable: variable is its own candidate");
    members_.push_back(candidates_[i].members());
    if (log_scores_[i].size() != (std::size_t{1} << members_[i].size()))
      throw ConfigError("LocalScoreTable: variable " + std::to_string(i) + " needs 2^|C_i| entries");
    for (double v : log_scores_[i])
      if (!std::isfinite(v)) throw NumericalError("LocalScoreTable: non-finite score");
  }
}

std::uint32_t LocalScoreTable::local_mask(int i, ParentSet global) const {
  std::uint32_t out = 0;
  const auto& m = members_[i];
  for (std::size_t k = 0; k < m.size(); ++k)
    if (global.contains(m[k])) out |= std::uint32_t{1} << k;
  return out;
}

ParentSet LocalScoreTable::global_mask(int i, std::uint32_t local) const {
  ParentSet out;
  const auto& m = members_[i];
  for (std::size_t k = 0; k < m.size(); ++k)
    if ((local >> k) & 1U) out = out.with(m[k]);
  return out;
}

double LocalScoreTable::log_score(int i, ParentSet parents) const {
  if (!parents.subset_of(candidates_[i])) throw ConfigError("LocalScoreTable: parent set outside candidates");
  return log_scores_[i][local_mask(i, parents)];
}

nlohmann::json LocalScoreTable::to_json() const {
  nlohmann::json entries = nlohmann::json::array();
  nlohmann::json cands = nlohmann::json::array();
  for (int i = 0; i < d(); ++i) {
    cands.push_back(members_[i]);
    for (std::uint32_t local = 0; local < log_scores_[i].size(); ++local)
      entries.push_back({{"variable", i}, {"mask", global_mask(i, local).bits()}, {"log_score", log_scores_[i][local]}});
  }
  return {{"d", d()}, {"candidates", cands}, {"entries", entries}};
}

LocalScoreTable LocalScoreTable::from_json(const nlohmann::json& j) {
  const int d = j.at("d").get<int>();
  std::vector<ParentSet> candidates(d);
  for (int i = 0; i < d; ++i)
    for (int m : j.at("candidates").at(i).get<std::vector<int>>()) candidates[i] = candidates[i].with(m);
  std::vector<std::vector<double>> scores(d);
  std::vector<std::vector<bool>> seen(d);
  for (int i = 0; i < d; ++i) {
    scores[i].assign(std::size_t{1} << candidates[i].size(), 0.0);
    seen[i].assign(scores[i].size(), false);
  }
  LocalScoreTable shape(candidates, scores);
  for (const auto& e : j.at("entries")) {
    const int i = e.at("variable").get<int>();
    if (i < 0 || i >= d) throw ConfigError("score table: variable out of range");
    const ParentSet mask(e.at("mask").get<std::uint64_t>());
    if (!mask.subset_of(candidates[i])) throw ConfigError("score table: mask outside candidates");
    const auto local = shape.local_mask(i, mask);
    scores[i][local] = e.at("log_score").get<double>();
    seen[i][local] = true;
  }
  for (int i = 0; i < d; ++i)
    for (bool s : seen[i])
      if (!s) throw ConfigError("score table: missing entry for variable " + std::to_string(i));
  return LocalScoreTable(std::move(candidates), std::move(scores));
}

LocalScoreTable build_score_table(const Dataset& data, const std::vector<ParentSet>& candidates,
                                  const BgeParams& params, StructurePrior prior, int candidate_cap) {
  const int d = data.d();
  if (static_cast<int>(candidates.size()) != d) throw ConfigError("build_score_table: one candidate set per variable");
  std::vector<std::vector<double>> scores(d);
  std::vector<std::pair<int, std::uint32_t>> jobs;
  for (int i = 0; i < d; ++i) {
    if (candidates[i].contains(i)) throw ConfigError("build_score_table: variable is its own candidate");
    if (candidates[i].size() > candidate_cap)
      throw ConfigError("build_score_table: |C_" + std::to_string(i) + "| exceeds cap " + std::to_string(candidate_cap));
    scores[i].assign(std::size_t{1} << candidates[i].size(), 0.0);
    for (std::uint32_t local = 0; local < scores[i].size(); ++local) jobs.emplace_back(i, local);
  }
  const BgeScorer scorer(data, params);
  std::vector<std::vector<int>> members(d);
  for (int i = 0; i < d; ++i) members[i] = candidates[i].members();

  const auto job_count = static_cast<std::int64_t>(jobs.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::int64_t job = 0; job < job_count; ++job) {
    const auto [i, local] = jobs[job];
    ParentSet parents;
    for (std::size_t k = 0; k < members[i].size(); ++k)
      if ((local >> k) & 1U) parents = parents.with(members[i][k]);
    const double log_prior = prior == StructurePrior::kFair ? fair_log_prior(d, parents) : 0.0;
    scores[i][local] = log_prior + scorer.local_score(i, parents);
  }
  return LocalScoreTable(candidates, std::move(scores));
}

std::vector<ParentSet> select_candidates(const Dataset& data, int k, const BgeParams& params) {
  const int d = data.d();
  if (k < 0 || k > d - 1) throw ConfigError("select_candidates: k must lie in [0, d - 1]");
  const BgeScorer scorer(data, params);
  std::vector<ParentSet> out(d);
#pragma omp parallel for schedule(dynamic, 1)
  for (int i = 0; i < d; ++i) {
    ParentSet chosen;
    while (chosen.size() < k) {
      int best = -1;
      double best_score = kNegInf;
      for (int j = 0; j < d; ++j) {
        if (j == i || chosen.contains(j)) continue;
        const double s = scorer.local_score(i, chosen.with(j));
        if (best < 0 || s > best_score) {
          best = j;
          best_score = s;
        }
      }
      chosen = chosen.with(best);
    }
    out[i] = chosen;
  }
  return out;
}

std::vector<ParentSet> full_candidates(int d) {
  std::vector<ParentSet> out(d);
  for (int i = 0; i < d; ++i) out[i] = ParentSet::all(d).without(i);
  return out;
}

}  // namespace orderspn
