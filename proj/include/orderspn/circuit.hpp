#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "orderspn/leaf.hpp"
#include "orderspn/model.hpp"

namespace orderspn {

enum class NodeKind : std::uint8_t { kSum, kProduct, kLeaf };

struct NodeRef {
  NodeKind kind = NodeKind::kLeaf;
  std::uint32_t index = 0;
  friend bool operator==(NodeRef, NodeRef) = default;
};

// Sum node over (S1, S2). Its children are the products
// [first_child, first_child + child_count), and the weight of the edge to product p
// is log_weights()[p].
struct SumNode {
  ParentSet s1;
  ParentSet s2;
  std::uint32_t first_child = 0;
  std::uint32_t child_count = 0;
  int layer = 0;
};

// Product over (S1, S21, S22): left child is (S1, S21), right child (S1 ∪ S21, S22).
struct ProductNode {
  ParentSet s1;
  ParentSet s21;
  ParentSet s22;
  NodeRef left;
  NodeRef right;
};

// Distribution over G_var with support G_var ⊆ S1 ∩ C_var.
struct LeafNode {
  ParentSet s1;
  int var = 0;
};

// Ordered bipartition of a block: `first` precedes `second`.
struct Partition {
  ParentSet first;
  ParentSet second;
  friend bool operator==(const Partition&, const Partition&) = default;
};

struct IndexRange {
  std::uint32_t begin = 0;
  std::uint32_t end = 0;
  std::uint32_t size() const { return end - begin; }
};

// Layered OrderSPN. Sums are stored by layer (root first) and products follow the
// order of their parent sums, so every pass is a flat sweep per layer.
class OrderSpn {
 public:
  OrderSpn() = default;

  // Checks index layout only; structural properties are the job of audit().
  static OrderSpn from_parts(int d, std::vector<int> expansion_factors, std::vector<SumNode> sums,
                             std::vector<ProductNode> products, std::vector<LeafNode> leaves,
                             std::vector<double> log_weights);

  int d() const { return d_; }
  const std::vector<int>& expansion_factors() const { return expansion_factors_; }
  const std::vector<SumNode>& sums() const { return sums_; }
  const std::vector<ProductNode>& products() const { return products_; }
  const std::vector<LeafNode>& leaves() const { return leaves_; }
  NodeRef root() const;

  int sum_layer_count() const { return static_cast<int>(sum_layers_.size()); }
  IndexRange sum_layer(int j) const { return sum_layers_[j]; }
  IndexRange product_layer(int j) const { return product_layers_[j]; }

  std::span<const double> log_weights() const { return log_weights_; }
  void set_log_weights(std::vector<double> log_weights);
  std::span<const double> child_log_weights(std::uint32_t sum) const {
    return std::span<const double>(log_weights_).subspan(sums_[sum].first_child, sums_[sum].child_count);
  }

  // Number of circuit edges: sum->product plus two per product.
  std::size_t edge_count() const { return log_weights_.size() + 2 * products_.size(); }

  nlohmann::json to_json() const;
  static OrderSpn from_json(const nlohmann::json& j);

 private:
  int d_ = 0;
  std::vector<int> expansion_factors_;
  std::vector<SumNode> sums_;
  std::vector<ProductNode> products_;
  std::vector<LeafNode> leaves_;
  std::vector<double> log_weights_;
  std::vector<IndexRange> sum_layers_;
  std::vector<IndexRange> product_layers_;
};

// ceil(log2(d)); 0 for d = 1.
int regular_layer_count(int d);

// All ordered splits of `block` with |first| = floor(|block| / 2), in increasing order of `first`.
std::vector<Partition> balanced_partitions(ParentSet block);

class PartitionOracle {
 public:
  virtual ~PartitionOracle() = default;
  // Up to `count` balanced partitions of s2 given predecessors s1. Repeated or
  // fewer partitions are allowed; the builder removes and pads them.
  virtual std::vector<Partition> propose(ParentSet s1, ParentSet s2, int count, std::uint64_t seed) const = 0;
};

// Distinct uniformly random balanced partitions of `block`, skipping those in `exclude`.
std::vector<Partition> random_partitions(ParentSet block, int count, Rng& rng,
                                         const std::vector<Partition>& exclude = {});

struct BuildOptions {
  std::vector<int> expansion_factors;
  // Blocks at most this large enumerate their partitions instead of calling the oracle.
  int exhaustive_threshold = 4;
  std::uint64_t seed = 0;
  int duplicate_retries = 16;
  std::function<void(const std::string&)> on_warning;
};

OrderSpn build_regular(const LeafTable& leaf, const PartitionOracle& oracle, const BuildOptions& options);

// Seed passed to the oracle for sum node `node` of `layer` on the given retry.
std::uint64_t oracle_call_seed(std::uint64_t build_seed, int layer, std::uint64_t node, int attempt);

// Log-mass of all orders of `block` after predecessors s1,
// log sum_sigma prod_i tau_i((s1 ∪ sigma^{<i}) ∩ C_i). Subset DP, |block| <= 20.
double block_log_mass(const LeafTable& leaf, ParentSet s1, ParentSet block);

struct AuditReport {
  bool root_scope = true;
  bool complete = true;
  bool decomposable = true;
  bool deterministic = true;
  bool regular = true;
  bool normalized = true;
  bool leaf_support = true;
  bool layer_count = true;
  std::vector<std::string> violations;

  bool passed() const {
    return root_scope && complete && decomposable && deterministic && regular && normalized && leaf_support &&
           layer_count;
  }
};

AuditReport audit(const OrderSpn& spn);

struct SizeAndSupport {
  std::size_t edge_count = 0;
  double log_support_orders = 0.0;
};

// Edge count and log number of orders in the support (recursive count; exact for
// any d, deterministic circuits only).
SizeAndSupport size_and_support(const OrderSpn& spn);

// Closed forms for d = 2^l with K = (K_0, ..., K_{l-1}).
std::size_t closed_form_edge_count(const std::vector<int>& expansion_factors);
double closed_form_log_support(const std::vector<int>& expansion_factors);

// Every order reachable by choosing one child per sum node. Small circuits only.
std::vector<Order> enumerate_support_orders(const OrderSpn& spn, std::size_t limit = 1'000'000);

}  // namespace orderspn
