#include "orderspn/circuit.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <iostream>
#include <numeric>
#include <set>

#include "orderspn/error.hpp"
#include "orderspn/math.hpp"
#include "orderspn/threads.hpp"

namespace orderspn {
namespace {

constexpr int kFormatVersion = 1;

std::string kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::kSum: return "sum";
    case NodeKind::kProduct: return "product";
    case NodeKind::kLeaf: return "leaf";
  }
  return "?";
}

NodeKind kind_from_name(const std::string& s) {
  if (s == "sum") return NodeKind::kSum;
  if (s == "leaf") return NodeKind::kLeaf;
  if (s == "product") return NodeKind::kProduct;
  throw ConfigError("circuit: unknown node kind '" + s + "'");
}

nlohmann::json ref_json(NodeRef r) { return {{"kind", kind_name(r.kind)}, {"index", r.index}}; }

NodeRef ref_from_json(const nlohmann::json& j) {
  return {kind_from_name(j.at("kind").get<std::string>()), j.at("index").get<std::uint32_t>()};
}

// (S1, S2) associated with a sum or leaf node.
std::pair<ParentSet, ParentSet> scope_of(const OrderSpn& spn, NodeRef r) {
  if (r.kind == NodeKind::kSum) return {spn.sums()[r.index].s1, spn.sums()[r.index].s2};
  const LeafNode& l = spn.leaves()[r.index];
  return {l.s1, ParentSet::single(l.var)};
}

}  // namespace

OrderSpn OrderSpn::from_parts(int d, std::vector<int> expansion_factors, std::vector<SumNode> sums,
                              std::vector<ProductNode> products, std::vector<LeafNode> leaves,
                              std::vector<double> log_weights) {
  if (d < 1 || d > kMaxVariables) throw ConfigError("OrderSpn: variable count out of range");
  OrderSpn spn;
  spn.d_ = d;
  spn.expansion_factors_ = std::move(expansion_factors);
  spn.sums_ = std::move(sums);
  spn.products_ = std::move(products);
  spn.leaves_ = std::move(leaves);
  spn.log_weights_ = std::move(log_weights);

  if (spn.sums_.empty()) {
    if (!spn.products_.empty() || spn.leaves_.size() != 1) throw ConfigError("OrderSpn: a circuit without sums is one leaf");
    return spn;
  }
  if (spn.log_weights_.size() != spn.products_.size()) throw ConfigError("OrderSpn: one weight per product");

  std::uint32_t running = 0;
  int layer = 0;
  std::uint32_t layer_begin = 0;
  for (std::uint32_t s = 0; s < spn.sums_.size(); ++s) {
    const SumNode& node = spn.sums_[s];
    if (node.first_child != running) throw ConfigError("OrderSpn: sum children must be contiguous and in sum order");
    if (node.child_count == 0) throw ConfigError("OrderSpn: sum node without children");
    running += node.child_count;
    if (s == 0 && node.layer != 0) throw ConfigError("OrderSpn: root must be in layer 0");
    if (node.layer != layer) {
      if (node.layer != layer + 1) throw ConfigError("OrderSpn: sums must be sorted by layer");
      spn.sum_layers_.push_back({layer_begin, s});
      layer_begin = s;
      layer = node.layer;
    }
  }
  spn.sum_layers_.push_back({layer_begin, static_cast<std::uint32_t>(spn.sums_.size())});
  if (running != spn.products_.size()) throw ConfigError("OrderSpn: product count does not match sum children");
  for (const IndexRange& r : spn.sum_layers_)
    spn.product_layers_.push_back({spn.sums_[r.begin].first_child,
                                   spn.sums_[r.end - 1].first_child + spn.sums_[r.end - 1].child_count});

  std::vector<int> sum_parents(spn.sums_.size(), 0);
  std::vector<int> leaf_parents(spn.leaves_.size(), 0);
  for (int j = 0; j < spn.sum_layer_count(); ++j) {
    for (std::uint32_t p = spn.product_layers_[j].begin; p < spn.product_layers_[j].end; ++p) {
      for (NodeRef child : {spn.products_[p].left, spn.products_[p].right}) {
        if (child.kind == NodeKind::kSum) {
          if (child.index >= spn.sums_.size()) throw ConfigError("OrderSpn: child sum index out of range");
          if (spn.sums_[child.index].layer <= j) throw ConfigError("OrderSpn: child sum must sit in a deeper layer");
          ++sum_parents[child.index];
        } else if (child.kind == NodeKind::kLeaf) {
          if (child.index >= spn.leaves_.size()) throw ConfigError("OrderSpn: child leaf index out of range");
          ++leaf_parents[child.index];
        } else {
          throw ConfigError("OrderSpn: product child must be a sum or a leaf");
        }
      }
    }
  }
  for (std::size_t s = 1; s < sum_parents.size(); ++s)
    if (sum_parents[s] != 1) throw ConfigError("OrderSpn: every non-root node needs exactly one parent");
  if (sum_parents[0] != 0) throw ConfigError("OrderSpn: root cannot be a child");
  for (int c : leaf_parents)
    if (c != 1) throw ConfigError("OrderSpn: every leaf needs exactly one parent");
  for (const LeafNode& l : spn.leaves_)
    if (l.var < 0 || l.var >= d) throw ConfigError("OrderSpn: leaf variable out of range");
  return spn;
}

NodeRef OrderSpn::root() const {
  if (sums_.empty()) return {NodeKind::kLeaf, 0};
  return {NodeKind::kSum, 0};
}

void OrderSpn::set_log_weights(std::vector<double> log_weights) {
  if (log_weights.size() != log_weights_.size()) throw ConfigError("OrderSpn: weight vector has wrong length");
  log_weights_ = std::move(log_weights);
}

nlohmann::json OrderSpn::to_json() const {
  nlohmann::json j;
  j["format"] = "orderspn-circuit";
  j["version"] = kFormatVersion;
  j["d"] = d_;
  j["expansion_factors"] = expansion_factors_;
  nlohmann::json sums = nlohmann::json::array();
  for (const SumNode& s : sums_)
    sums.push_back({{"s1", s.s1.bits()},
                    {"s2", s.s2.bits()},
                    {"first_child", s.first_child},
                    {"child_count", s.child_count},
                    {"layer", s.layer}});
  nlohmann::json products = nlohmann::json::array();
  for (const ProductNode& p : products_)
    products.push_back({{"s1", p.s1.bits()},
                        {"s21", p.s21.bits()},
                        {"s22", p.s22.bits()},
                        {"left", ref_json(p.left)},
                        {"right", ref_json(p.right)}});
  nlohmann::json leaves = nlohmann::json::array();
  for (const LeafNode& l : leaves_) leaves.push_back({{"s1", l.s1.bits()}, {"var", l.var}});
  nlohmann::json layers = nlohmann::json::array();
  for (int k = 0; k < sum_layer_count(); ++k)
    layers.push_back({{"sums", {sum_layers_[k].begin, sum_layers_[k].end}},
                      {"products", {product_layers_[k].begin, product_layers_[k].end}}});
  j["sums"] = std::move(sums);
  j["products"] = std::move(products);
  j["leaves"] = std::move(leaves);
  j["layers"] = std::move(layers);
  j["log_weights"] = log_weights_;
  return j;
}

OrderSpn OrderSpn::from_json(const nlohmann::json& j) {
  if (j.value("format", std::string()) != "orderspn-circuit") throw ConfigError("circuit: not an orderspn-circuit document");
  if (j.at("version").get<int>() != kFormatVersion) throw ConfigError("circuit: unsupported version");
  std::vector<SumNode> sums;
  for (const auto& s : j.at("sums"))
    sums.push_back({ParentSet(s.at("s1").get<std::uint64_t>()), ParentSet(s.at("s2").get<std::uint64_t>()),
                    s.at("first_child").get<std::uint32_t>(), s.at("child_count").get<std::uint32_t>(),
                    s.at("layer").get<int>()});
  std::vector<ProductNode> products;
  for (const auto& p : j.at("products"))
    products.push_back({ParentSet(p.at("s1").get<std::uint64_t>()), ParentSet(p.at("s21").get<std::uint64_t>()),
                        ParentSet(p.at("s22").get<std::uint64_t>()), ref_from_json(p.at("left")),
                        ref_from_json(p.at("right"))});
  std::vector<LeafNode> leaves;
  for (const auto& l : j.at("leaves")) leaves.push_back({ParentSet(l.at("s1").get<std::uint64_t>()), l.at("var").get<int>()});
  return from_parts(j.at("d").get<int>(), j.at("expansion_factors").get<std::vector<int>>(), std::move(sums),
                    std::move(products), std::move(leaves), j.at("log_weights").get<std::vector<double>>());
}

int regular_layer_count(int d) {
  int layers = 0;
  while ((1 << layers) < d) ++layers;
  return layers;
}

std::vector<Partition> balanced_partitions(ParentSet block) {
  const auto members = block.members();
  const int n = static_cast<int>(members.size());
  const int half = n / 2;
  std::vector<Partition> out;
  for (std::uint32_t local = 0; local < (std::uint32_t{1} << n); ++local) {
    if (std::popcount(local) != half) continue;
    ParentSet first;
    for (int k = 0; k < n; ++k)
      if ((local >> k) & 1U) first = first.with(members[k]);
    out.push_back({first, block - first});
  }
  std::sort(out.begin(), out.end(), [](const Partition& a, const Partition& b) { return a.first < b.first; });
  return out;
}

std::vector<Partition> random_partitions(ParentSet block, int count, Rng& rng, const std::vector<Partition>& exclude) {
  const auto members = block.members();
  const int n = static_cast<int>(members.size());
  const double available = std::exp(log_binomial(n, n / 2));
  std::vector<Partition> out;
  auto excluded = [&](const Partition& p) {
    return std::find(exclude.begin(), exclude.end(), p) != exclude.end() ||
           std::find(out.begin(), out.end(), p) != out.end();
  };
  if (available <= 4096) {
    auto all = balanced_partitions(block);
    std::shuffle(all.begin(), all.end(), rng);
    for (const Partition& p : all) {
      if (static_cast<int>(out.size()) >= count) break;
      if (!excluded(p)) out.push_back(p);
    }
    return out;
  }
  auto shuffled = members;
  while (static_cast<int>(out.size()) < count) {
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    ParentSet first;
    for (int k = 0; k < n / 2; ++k) first = first.with(shuffled[k]);
    const Partition p{first, block - first};
    if (!excluded(p)) out.push_back(p);
  }
  return out;
}

double block_log_mass(const LeafTable& leaf, ParentSet s1, ParentSet block) {
  const auto members = block.members();
  const int n = static_cast<int>(members.size());
  if (n > 20) throw ConfigError("block_log_mass: block too large");
  std::vector<double> mass(std::size_t{1} << n, kNegInf);
  mass[0] = 0.0;
  for (std::uint32_t local = 1; local < mass.size(); ++local) {
    double acc = kNegInf;
    for (int k = 0; k < n; ++k) {
      if (!((local >> k) & 1U)) continue;
      const std::uint32_t rest = local & ~(std::uint32_t{1} << k);
      ParentSet before = s1;
      for (int q = 0; q < n; ++q)
        if ((rest >> q) & 1U) before = before.with(members[q]);
      acc = log_add(acc, mass[rest] + leaf.log_normalizer(members[k], before));
    }
    mass[local] = acc;
  }
  return mass.back();
}

namespace {

std::vector<Partition> choose_partitions(const LeafTable& leaf, const PartitionOracle& oracle,
                                         const BuildOptions& options, ParentSet s1, ParentSet s2, int wanted,
                                         int layer, std::uint64_t node) {
  const int n = s2.size();
  if (n <= options.exhaustive_threshold) {
    auto all = balanced_partitions(s2);
    if (static_cast<int>(all.size()) <= wanted) return all;
    // Keep the splits carrying the most posterior mass.
    std::vector<std::pair<double, Partition>> ranked;
    for (const Partition& p : all)
      ranked.emplace_back(block_log_mass(leaf, s1, p.first) + block_log_mass(leaf, s1 | p.first, p.second), p);
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<Partition> out;
    for (int k = 0; k < wanted; ++k) out.push_back(ranked[k].second);
    return out;
  }
  std::vector<Partition> out;
  for (int attempt = 0; attempt <= options.duplicate_retries && static_cast<int>(out.size()) < wanted; ++attempt) {
    const auto proposed = oracle.propose(s1, s2, wanted, oracle_call_seed(options.seed, layer, node, attempt));
    for (const Partition& p : proposed) {
      if ((p.first | p.second) != s2 || p.first.intersects(p.second) || p.first.size() != n / 2)
        throw ConfigError("build_regular: oracle returned an invalid partition");
      if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
      if (static_cast<int>(out.size()) == wanted) break;
    }
  }
  if (static_cast<int>(out.size()) < wanted) {
    Rng rng(splitmix64(oracle_call_seed(options.seed, layer, node, 0) ^ 0xabcdefULL));
    const auto pad = random_partitions(s2, wanted - static_cast<int>(out.size()), rng, out);
    out.insert(out.end(), pad.begin(), pad.end());
  }
  return out;
}

}  // namespace

std::uint64_t oracle_call_seed(std::uint64_t build_seed, int layer, std::uint64_t node, int attempt) {
  const std::uint64_t node_seed = derive_seed(derive_seed(build_seed, static_cast<std::uint64_t>(layer)), node);
  return derive_seed(node_seed, static_cast<std::uint64_t>(attempt));
}

OrderSpn build_regular(const LeafTable& leaf, const PartitionOracle& oracle, const BuildOptions& options) {
  const int d = leaf.d();
  if (d < 1) throw ConfigError("build_regular: empty leaf table");
  const int layers = regular_layer_count(d);
  const auto& factors = options.expansion_factors;
  if (static_cast<int>(factors.size()) != layers)
    throw ConfigError("build_regular: expected " + std::to_string(layers) + " expansion factors");
  for (int k : factors)
    if (k < 1) throw ConfigError("build_regular: expansion factors must be positive");
  if (d == 1) return OrderSpn::from_parts(1, {}, {}, {}, {LeafNode{ParentSet{}, 0}}, {});

  auto warn = [&](const std::string& msg) {
    if (options.on_warning)
      options.on_warning(msg);
    else
      std::clog << "warning: " << msg << '\n';
  };

  std::vector<SumNode> sums;
  std::vector<ProductNode> products;
  std::vector<LeafNode> leaves;
  std::vector<double> log_weights;
  std::vector<std::pair<ParentSet, ParentSet>> specs{{ParentSet{}, ParentSet::all(d)}};

  for (int layer = 0; layer < layers; ++layer) {
    const auto node_count = static_cast<std::int64_t>(specs.size());
    std::vector<std::vector<Partition>> chosen(node_count);
    std::vector<int> wanted(node_count);
    bool truncated = false;
    for (std::int64_t node = 0; node < node_count; ++node) {
      const int n = specs[node].second.size();
      const double available = std::exp(log_binomial(n, n / 2));
      wanted[node] = static_cast<int>(std::min<double>(factors[layer], std::round(available)));
      truncated = truncated || wanted[node] < factors[layer];
    }
    if (truncated)
      warn("layer " + std::to_string(layer) + ": expansion factor " + std::to_string(factors[layer]) +
           " exceeds the number of distinct partitions; truncated");

    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t node = 0; node < node_count; ++node) {
      try {
        chosen[node] = choose_partitions(leaf, oracle, options, specs[node].first, specs[node].second, wanted[node],
                                         layer, static_cast<std::uint64_t>(node));
      } catch (...) {
#pragma omp critical(orderspn_build_failure)
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);

    const auto next_base = static_cast<std::uint32_t>(sums.size() + specs.size());
    std::vector<std::pair<ParentSet, ParentSet>> next;
    auto make_child = [&](ParentSet before, ParentSet block) -> NodeRef {
      if (block.size() == 1) {
        leaves.push_back({before, block.members().front()});
        return {NodeKind::kLeaf, static_cast<std::uint32_t>(leaves.size() - 1)};
      }
      next.emplace_back(before, block);
      return {NodeKind::kSum, next_base + static_cast<std::uint32_t>(next.size() - 1)};
    };
    for (std::int64_t node = 0; node < node_count; ++node) {
      const auto [s1, s2] = specs[node];
      const auto& parts = chosen[node];
      sums.push_back({s1, s2, static_cast<std::uint32_t>(products.size()), static_cast<std::uint32_t>(parts.size()), layer});
      for (const Partition& part : parts) {
        ProductNode p{s1, part.first, part.second, {}, {}};
        p.left = make_child(s1, part.first);
        p.right = make_child(s1 | part.first, part.second);
        products.push_back(p);
        log_weights.push_back(-std::log(static_cast<double>(parts.size())));
      }
    }
    specs = std::move(next);
  }
  if (!specs.empty()) throw ConfigError("build_regular: blocks left after the last layer");
  return OrderSpn::from_parts(d, factors, std::move(sums), std::move(products), std::move(leaves),
                              std::move(log_weights));
}

AuditReport audit(const OrderSpn& spn) {
  AuditReport r;
  const int d = spn.d();
  auto fail = [&](bool& flag, const std::string& what) {
    flag = false;
    if (r.violations.size() < 64) r.violations.push_back(what);
  };

  if (spn.sums().empty()) {
    const LeafNode& l = spn.leaves().front();
    if (d != 1 || !l.s1.empty() || l.var != 0) fail(r.root_scope, "single-leaf circuit must be (∅, {0}) with d = 1");
  } else {
    const SumNode& root = spn.sums().front();
    if (!root.s1.empty() || root.s2 != ParentSet::all(d)) fail(r.root_scope, "root sum is not (∅, all variables)");
  }
  if (spn.sum_layer_count() != regular_layer_count(d))
    fail(r.layer_count, "sum layer count " + std::to_string(spn.sum_layer_count()) + " != ceil(log2 d)");

  for (std::uint32_t s = 0; s < spn.sums().size(); ++s) {
    const SumNode& node = spn.sums()[s];
    const std::string where = "sum " + std::to_string(s);
    if (node.s1.intersects(node.s2)) fail(r.decomposable, where + ": S1 and S2 overlap");
    if (node.s2.size() < 2) fail(r.regular, where + ": |S2| < 2");
    std::vector<ParentSet> seen;
    for (std::uint32_t p = node.first_child; p < node.first_child + node.child_count; ++p) {
      const ProductNode& prod = spn.products()[p];
      const std::string pw = where + " / product " + std::to_string(p);
      if (prod.s1 != node.s1 || (prod.s21 | prod.s22) != node.s2) fail(r.complete, pw + ": scope differs from parent sum");
      if (prod.s21.intersects(prod.s22)) fail(r.decomposable, pw + ": S21 and S22 overlap");
      if (prod.s21.size() != node.s2.size() / 2) fail(r.regular, pw + ": unbalanced split");
      if (std::find(seen.begin(), seen.end(), prod.s21) != seen.end()) fail(r.deterministic, pw + ": repeated partition");
      seen.push_back(prod.s21);
      const auto left = scope_of(spn, prod.left);
      const auto right = scope_of(spn, prod.right);
      if (left.first != prod.s1 || left.second != prod.s21) fail(r.decomposable, pw + ": left child is not (S1, S21)");
      if (right.first != (prod.s1 | prod.s21) || right.second != prod.s22)
        fail(r.decomposable, pw + ": right child is not (S1 ∪ S21, S22)");
    }
    if (node.layer < static_cast<int>(spn.expansion_factors().size()) &&
        static_cast<int>(node.child_count) > spn.expansion_factors()[node.layer])
      fail(r.regular, where + ": more children than the layer's expansion factor");
    const auto w = spn.child_log_weights(s);
    if (std::abs(log_sum_exp(w)) > 1e-9) fail(r.normalized, where + ": weights do not sum to one");
  }
  for (std::uint32_t k = 0; k < spn.leaves().size(); ++k) {
    const LeafNode& l = spn.leaves()[k];
    if (l.s1.contains(l.var)) fail(r.leaf_support, "leaf " + std::to_string(k) + ": variable inside its own S1");
  }
  return r;
}

SizeAndSupport size_and_support(const OrderSpn& spn) {
  SizeAndSupport out;
  out.edge_count = spn.edge_count();
  if (spn.sums().empty()) return out;
  std::vector<double> sum_log(spn.sums().size(), 0.0);
  std::vector<double> product_log(spn.products().size(), 0.0);
  auto child_log = [&](NodeRef r) { return r.kind == NodeKind::kSum ? sum_log[r.index] : 0.0; };
  for (int j = spn.sum_layer_count() - 1; j >= 0; --j) {
    for (std::uint32_t p = spn.product_layer(j).begin; p < spn.product_layer(j).end; ++p)
      product_log[p] = child_log(spn.products()[p].left) + child_log(spn.products()[p].right);
    for (std::uint32_t s = spn.sum_layer(j).begin; s < spn.sum_layer(j).end; ++s) {
      const SumNode& node = spn.sums()[s];
      sum_log[s] = log_sum_exp(std::span<const double>(product_log).subspan(node.first_child, node.child_count));
    }
  }
  out.log_support_orders = sum_log[0];
  return out;
}

std::size_t closed_form_edge_count(const std::vector<int>& factors) {
  std::size_t total = 0;
  std::size_t prefix = 1;
  for (std::size_t i = 1; i <= factors.size(); ++i) {
    prefix *= static_cast<std::size_t>(factors[i - 1]);
    total += ((std::size_t{1} << i) + (std::size_t{1} << (i - 1))) * prefix;
  }
  return total;
}

double closed_form_log_support(const std::vector<int>& factors) {
  double total = 0.0;
  for (std::size_t i = 0; i < factors.size(); ++i) total += std::ldexp(1.0, static_cast<int>(i)) * std::log(factors[i]);
  return total;
}

std::vector<Order> enumerate_support_orders(const OrderSpn& spn, std::size_t limit) {
  std::function<std::vector<std::vector<int>>(NodeRef)> orders = [&](NodeRef r) -> std::vector<std::vector<int>> {
    if (r.kind == NodeKind::kLeaf) return {{spn.leaves()[r.index].var}};
    const SumNode& node = spn.sums()[r.index];
    std::vector<std::vector<int>> out;
    for (std::uint32_t p = node.first_child; p < node.first_child + node.child_count; ++p) {
      const auto left = orders(spn.products()[p].left);
      const auto right = orders(spn.products()[p].right);
      for (const auto& a : left)
        for (const auto& b : right) {
          if (out.size() >= limit) throw ConfigError("enumerate_support_orders: limit exceeded");
          auto joined = a;
          joined.insert(joined.end(), b.begin(), b.end());
          out.push_back(std::move(joined));
        }
    }
    return out;
  };
  std::vector<Order> result;
  for (auto& perm : orders(spn.root())) result.emplace_back(std::move(perm));
  return result;
}

}  // namespace orderspn
