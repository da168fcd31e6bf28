#pragma once

// Cosine-similarity post-processing that recursively bipartitions clients
// whose updates point in incompatible directions.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cflsim {

class UndefinedSimilarity : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// <a, b> / (|a| |b|), clamped to [-1, 1]. Throws UndefinedSimilarity if either
// vector is zero.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct ClientUpdateView {
  int client_id = 0;
  std::span<const double> delta;
  double weight = 1.0;  // sample count D_k
};

class SimilarityMatrix {
 public:
  SimilarityMatrix() = default;
  SimilarityMatrix(std::vector<int> ids, std::vector<double> values);

  // Pairwise cosine similarities; ids follow the order of `updates`.
  static SimilarityMatrix from_updates(std::span<const ClientUpdateView> updates);

  std::size_t size() const { return ids_.size(); }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * ids_.size() + j]; }
  const std::vector<int>& ids() const { return ids_; }

 private:
  std::vector<int> ids_;
  std::vector<double> values_;
};

struct GateResult {
  double mean_norm = 0.0;  // |sum_k (D_k / D_c) dw_k|
  double max_norm = 0.0;   // max_k |dw_k|
  bool near_stationary = false;  // mean_norm < eps1
  bool clients_diverge = false;  // max_norm > eps2
  bool candidate = false;        // both, and at least two clients
};

GateResult split_gate(std::span<const ClientUpdateView> updates, double eps1, double eps2);

// Indices into a SimilarityMatrix. `first` always holds index 0.
struct Bipartition {
  std::vector<std::size_t> first;
  std::vector<std::size_t> second;
  double cross_max = 0.0;
};

double cross_max_similarity(const SimilarityMatrix& s, std::span<const std::size_t> first,
                            std::span<const std::size_t> second);

// Minimises the largest cross similarity over all 2^(n-1) - 1 bipartitions.
// Ties go to the lexicographically smallest `first`.
Bipartition exhaustive_bipartition(const SimilarityMatrix& s);
// Repeatedly merges the two groups with the highest max-linkage similarity
// until two remain.
Bipartition agglomerative_bipartition(const SimilarityMatrix& s);
// Exhaustive up to `exhaustive_limit` clients, agglomerative above.
Bipartition optimal_bipartition(const SimilarityMatrix& s, std::size_t exhaustive_limit = 16);

// What each client's update is compared against in the gamma check.
//   child_mean: the weighted mean update of the client's candidate child.
//   similar_neighbours: the weighted mean over members of the same child
//     whose similarity to the client is above (1 + cross_max) / 2, the client
//     included (falls back to child_mean when the client has no such neighbour).
enum class GammaReference { child_mean, similar_neighbours };

GammaReference parse_gamma_reference(std::string_view name);
std::string_view gamma_reference_name(GammaReference r);

struct GammaResult {
  double max_gamma = 0.0;
  double threshold = 0.0;  // sqrt((1 - cross_max) / 2)
  bool passes = false;
};

// `updates` must be aligned with the matrix indices.
GammaResult gamma_check(const Bipartition& split, std::span<const ClientUpdateView> updates,
                        const SimilarityMatrix& s, GammaReference reference);

struct SeparationGap {
  double within_min = 1.0;
  double cross_max = 0.0;
  double gap = 0.0;
  bool degenerate_side = false;  // a side with fewer than two members
};

SeparationGap separation_gap(const SimilarityMatrix& s, const Bipartition& split);

struct ClusterNode {
  int id = 0;
  std::vector<int> members;  // ascending client ids
  bool converged = false;
  int created_round = 0;     // first round whose updates count as evidence
  int parent = -1;
};

struct SplitEvent {
  int round = 0;
  int parent = 0;
  int first_child = 0;
  int second_child = 0;
  std::vector<int> first_members;
  std::vector<int> second_members;
};

class ClusterTree {
 public:
  ClusterTree() = default;
  explicit ClusterTree(std::vector<int> clients);

  // Leaf clusters in ascending id order.
  const std::vector<ClusterNode>& clusters() const { return clusters_; }
  const ClusterNode& cluster(int id) const;
  ClusterNode& cluster(int id);
  bool contains(int id) const;
  int cluster_of(int client) const;
  std::size_t size() const { return clusters_.size(); }
  const std::vector<SplitEvent>& log() const { return log_; }
  const std::vector<int>& clients() const { return clients_; }

  // Replaces `id` with two children; returns their ids.
  std::pair<int, int> split(int id, std::vector<int> first, std::vector<int> second, int round);

  // Leaf clusters are disjoint, non-empty and cover clients(). Throws otherwise.
  void check_invariants() const;

  static ClusterTree replay(std::vector<int> clients, std::span<const SplitEvent> log);

  // cluster id of every client, indexed by position in clients().
  std::vector<int> labels() const;

 private:
  std::vector<int> clients_;
  std::vector<ClusterNode> clusters_;
  std::vector<SplitEvent> log_;
  int next_id_ = 1;
};

struct SplitParams {
  double eps1 = 1.0;
  double eps2 = 1.5;
  std::size_t exhaustive_limit = 16;
  GammaReference gamma_reference = GammaReference::similar_neighbours;

  bool operator==(const SplitParams&) const = default;
};

struct SplitDecision {
  int round = 0;
  int cluster_id = 0;
  bool did_split = false;
  bool gate_passed = false;
  std::string skipped;  // non-empty when the cluster could not be evaluated
  GateResult gate;
  std::vector<int> first_members;
  std::vector<int> second_members;
  int first_child = -1;
  int second_child = -1;
  double cross_max = 0.0;
  double within_min = 0.0;
  double gap = 0.0;
  bool degenerate_side = false;
  double max_gamma = 0.0;
  double gamma_threshold = 0.0;
};

struct SplitResult {
  ClusterTree tree;
  SplitDecision decision;
};

// Gate, then bipartition, then gamma check; the returned tree differs from the
// input only when all three pass. `updates` must cover every member of the
// cluster (extra entries are ignored).
SplitResult maybe_split(const ClusterTree& tree, int cluster_id,
                        std::span<const ClientUpdateView> updates, const SplitParams& params,
                        int round);

// Fraction of client pairs on which two labelings agree about being together.
double rand_index(std::span<const int> a, std::span<const int> b);

}  // namespace cflsim
