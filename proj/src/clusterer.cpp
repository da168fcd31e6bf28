#include "cflsim/clusterer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "cflsim/kernels.hpp"

namespace cflsim {

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine_similarity: length mismatch");
  const double na = kernels::norm(a);
  const double nb = kernels::norm(b);
  if (na == 0.0 || nb == 0.0) {
    throw UndefinedSimilarity("cosine_similarity: zero vector");
  }
  return std::clamp(kernels::dot(a, b) / (na * nb), -1.0, 1.0);
}

SimilarityMatrix::SimilarityMatrix(std::vector<int> ids, std::vector<double> values)
    : ids_(std::move(ids)), values_(std::move(values)) {
  if (values_.size() != ids_.size() * ids_.size()) {
    throw std::invalid_argument("SimilarityMatrix: values must be n x n");
  }
}

SimilarityMatrix SimilarityMatrix::from_updates(std::span<const ClientUpdateView> updates) {
  const std::size_t n = updates.size();
  std::vector<int> ids(n);
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    ids[i] = updates[i].client_id;
    norms[i] = kernels::norm(updates[i].delta);
    if (norms[i] == 0.0) {
      throw UndefinedSimilarity(fmt::format("client {} sent a zero update", ids[i]));
    }
  }
  std::vector<double> v(n * n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s = std::clamp(
          kernels::dot(updates[i].delta, updates[j].delta) / (norms[i] * norms[j]), -1.0, 1.0);
      v[i * n + j] = s;
      v[j * n + i] = s;
    }
  }
  return SimilarityMatrix(std::move(ids), std::move(v));
}

namespace {

std::vector<double> weighted_mean(std::span<const ClientUpdateView> updates,
                                  std::span<const std::size_t> pick) {
  double total = 0.0;
  for (std::size_t i : pick) total += updates[i].weight;
  std::vector<double> mean(updates[pick.front()].delta.size(), 0.0);
  for (std::size_t i : pick) kernels::axpy(updates[i].weight / total, updates[i].delta, mean);
  return mean;
}

std::vector<std::size_t> iota_n(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

}  // namespace

GateResult split_gate(std::span<const ClientUpdateView> updates, double eps1, double eps2) {
  if (!(eps1 > 0.0) || !(eps2 > 0.0)) throw std::invalid_argument("split_gate: eps must be > 0");
  GateResult g;
  if (updates.empty()) return g;
  const auto all = iota_n(updates.size());
  g.mean_norm = kernels::norm(weighted_mean(updates, all));
  for (const auto& u : updates) g.max_norm = std::max(g.max_norm, kernels::norm(u.delta));
  g.near_stationary = g.mean_norm < eps1;
  g.clients_diverge = g.max_norm > eps2;
  g.candidate = updates.size() >= 2 && g.near_stationary && g.clients_diverge;
  return g;
}

double cross_max_similarity(const SimilarityMatrix& s, std::span<const std::size_t> first,
                            std::span<const std::size_t> second) {
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i : first) {
    for (std::size_t j : second) worst = std::max(worst, s(i, j));
  }
  return worst;
}

Bipartition exhaustive_bipartition(const SimilarityMatrix& s) {
  const std::size_t n = s.size();
  if (n < 2) throw std::invalid_argument("bipartition: need at least two clients");
  if (n > 30) throw std::invalid_argument("exhaustive_bipartition: too many clients");
  Bipartition best;
  best.cross_max = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> first, second;
  const std::uint64_t masks = std::uint64_t{1} << (n - 1);
  for (std::uint64_t mask = 1; mask < masks; ++mask) {
    first.assign(1, 0);
    second.clear();
    for (std::size_t i = 1; i < n; ++i) {
      if ((mask >> (i - 1)) & 1U) {
        second.push_back(i);
      } else {
        first.push_back(i);
      }
    }
    const double cm = cross_max_similarity(s, first, second);
    const bool better =
        cm < best.cross_max ||
        (cm == best.cross_max && std::lexicographical_compare(first.begin(), first.end(),
                                                              best.first.begin(), best.first.end()));
    if (better) {
      best.first = first;
      best.second = second;
      best.cross_max = cm;
    }
  }
  return best;
}

Bipartition agglomerative_bipartition(const SimilarityMatrix& s) {
  const std::size_t n = s.size();
  if (n < 2) throw std::invalid_argument("bipartition: need at least two clients");
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) groups.push_back({i});
  while (groups.size() > 2) {
    std::size_t best_a = 0, best_b = 1;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < groups.size(); ++a) {
      for (std::size_t b = a + 1; b < groups.size(); ++b) {
        const double link = cross_max_similarity(s, groups[a], groups[b]);
        if (link > best) {
          best = link;
          best_a = a;
          best_b = b;
        }
      }
    }
    auto& into = groups[best_a];
    into.insert(into.end(), groups[best_b].begin(), groups[best_b].end());
    std::sort(into.begin(), into.end());
    groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(best_b));
  }
  // groups stay ordered by smallest member, so groups[0] holds index 0.
  Bipartition out{groups[0], groups[1], 0.0};
  out.cross_max = cross_max_similarity(s, out.first, out.second);
  return out;
}

Bipartition optimal_bipartition(const SimilarityMatrix& s, std::size_t exhaustive_limit) {
  if (s.size() <= exhaustive_limit) return exhaustive_bipartition(s);
  return agglomerative_bipartition(s);
}

GammaReference parse_gamma_reference(std::string_view name) {
  if (name == "child_mean") return GammaReference::child_mean;
  if (name == "similar_neighbours") return GammaReference::similar_neighbours;
  throw std::invalid_argument("unknown gamma reference: " + std::string(name));
}

std::string_view gamma_reference_name(GammaReference r) {
  return r == GammaReference::child_mean ? "child_mean" : "similar_neighbours";
}

GammaResult gamma_check(const Bipartition& split, std::span<const ClientUpdateView> updates,
                        const SimilarityMatrix& s, GammaReference reference) {
  if (split.first.empty() || split.second.empty()) {
    throw std::invalid_argument("gamma_check: empty child");
  }
  if (updates.size() != s.size()) throw std::invalid_argument("gamma_check: size mismatch");
  GammaResult out;
  out.threshold = std::sqrt(std::max(0.0, (1.0 - split.cross_max) / 2.0));
  std::vector<double> diff;
  for (const auto* child : {&split.first, &split.second}) {
    const auto child_mean = weighted_mean(updates, *child);
    for (std::size_t k : *child) {
      std::vector<double> ref;
      if (reference == GammaReference::similar_neighbours) {
        const double cut = (1.0 + split.cross_max) / 2.0;
        std::vector<std::size_t> near;
        for (std::size_t j : *child) {
          if (s(k, j) > cut) near.push_back(j);
        }
        if (near.size() >= 2) ref = weighted_mean(updates, near);
      }
      const auto& target = ref.empty() ? child_mean : ref;
      const double denom = kernels::norm(target);
      if (denom == 0.0) {
        out.max_gamma = std::numeric_limits<double>::infinity();
        out.passes = false;
        return out;
      }
      diff.resize(target.size());
      kernels::sub(target, updates[k].delta, diff);
      out.max_gamma = std::max(out.max_gamma, kernels::norm(diff) / denom);
    }
  }
  out.passes = out.max_gamma < out.threshold;
  return out;
}

SeparationGap separation_gap(const SimilarityMatrix& s, const Bipartition& split) {
  SeparationGap g;
  g.cross_max = cross_max_similarity(s, split.first, split.second);
  for (const auto* side : {&split.first, &split.second}) {
    if (side->size() < 2) {
      g.degenerate_side = true;
      continue;
    }
    for (std::size_t a = 0; a < side->size(); ++a) {
      for (std::size_t b = a + 1; b < side->size(); ++b) {
        g.within_min = std::min(g.within_min, s((*side)[a], (*side)[b]));
      }
    }
  }
  g.gap = g.within_min - g.cross_max;
  return g;
}

ClusterTree::ClusterTree(std::vector<int> clients) : clients_(std::move(clients)) {
  std::sort(clients_.begin(), clients_.end());
  if (clients_.empty()) throw std::invalid_argument("ClusterTree: no clients");
  if (std::adjacent_find(clients_.begin(), clients_.end()) != clients_.end()) {
    throw std::invalid_argument("ClusterTree: duplicate client id");
  }
  clusters_.push_back(ClusterNode{0, clients_, false, 0, -1});
}

const ClusterNode& ClusterTree::cluster(int id) const {
  for (const auto& c : clusters_) {
    if (c.id == id) return c;
  }
  throw std::out_of_range(fmt::format("no cluster {}", id));
}

ClusterNode& ClusterTree::cluster(int id) {
  return const_cast<ClusterNode&>(std::as_const(*this).cluster(id));
}

bool ClusterTree::contains(int id) const {
  return std::any_of(clusters_.begin(), clusters_.end(), [&](const auto& c) { return c.id == id; });
}

int ClusterTree::cluster_of(int client) const {
  for (const auto& c : clusters_) {
    if (std::binary_search(c.members.begin(), c.members.end(), client)) return c.id;
  }
  throw std::out_of_range(fmt::format("client {} is in no cluster", client));
}

std::pair<int, int> ClusterTree::split(int id, std::vector<int> first, std::vector<int> second,
                                       int round) {
  auto it = std::find_if(clusters_.begin(), clusters_.end(), [&](const auto& c) { return c.id == id; });
  if (it == clusters_.end()) throw std::out_of_range(fmt::format("no cluster {}", id));
  std::sort(first.begin(), first.end());
  std::sort(second.begin(), second.end());
  std::vector<int> joined;
  std::merge(first.begin(), first.end(), second.begin(), second.end(), std::back_inserter(joined));
  if (first.empty() || second.empty() || joined != it->members) {
    throw std::invalid_argument("ClusterTree::split: children must partition the parent");
  }
  const int a = next_id_++;
  const int b = next_id_++;
  clusters_.erase(it);
  clusters_.push_back(ClusterNode{a, first, false, round + 1, id});
  clusters_.push_back(ClusterNode{b, second, false, round + 1, id});
  log_.push_back(SplitEvent{round, id, a, b, std::move(first), std::move(second)});
  return {a, b};
}

void ClusterTree::check_invariants() const {
  std::vector<int> seen;
  for (const auto& c : clusters_) {
    if (c.members.empty()) throw std::logic_error(fmt::format("cluster {} is empty", c.id));
    seen.insert(seen.end(), c.members.begin(), c.members.end());
  }
  std::sort(seen.begin(), seen.end());
  if (seen != clients_) throw std::logic_error("clusters do not partition the clients");
  if (!std::is_sorted(clusters_.begin(), clusters_.end(),
                      [](const auto& x, const auto& y) { return x.id < y.id; })) {
    throw std::logic_error("clusters out of id order");
  }
}

ClusterTree ClusterTree::replay(std::vector<int> clients, std::span<const SplitEvent> log) {
  ClusterTree t(std::move(clients));
  for (const auto& e : log) {
    const auto [a, b] = t.split(e.parent, e.first_members, e.second_members, e.round);
    if (a != e.first_child || b != e.second_child) {
      throw std::logic_error("ClusterTree::replay: child ids diverged");
    }
  }
  return t;
}

std::vector<int> ClusterTree::labels() const {
  std::vector<int> out;
  out.reserve(clients_.size());
  for (int k : clients_) out.push_back(cluster_of(k));
  return out;
}

SplitResult maybe_split(const ClusterTree& tree, int cluster_id,
                        std::span<const ClientUpdateView> updates, const SplitParams& params,
                        int round) {
  SplitResult result{tree, {}};
  auto& d = result.decision;
  d.round = round;
  d.cluster_id = cluster_id;
  const auto& node = tree.cluster(cluster_id);

  std::map<int, ClientUpdateView> by_id;
  for (const auto& u : updates) by_id[u.client_id] = u;
  std::vector<ClientUpdateView> members;
  for (int k : node.members) {
    auto it = by_id.find(k);
    if (it == by_id.end()) {
      d.skipped = "missing_updates";
      return result;
    }
    members.push_back(it->second);
  }

  d.gate = split_gate(members, params.eps1, params.eps2);
  d.gate_passed = d.gate.candidate;
  if (!d.gate_passed) return result;

  SimilarityMatrix s;
  try {
    s = SimilarityMatrix::from_updates(members);
  } catch (const UndefinedSimilarity&) {
    d.skipped = "zero_update";
    return result;
  }
  const auto split = optimal_bipartition(s, params.exhaustive_limit);
  const auto gap = separation_gap(s, split);
  const auto gamma = gamma_check(split, members, s, params.gamma_reference);
  for (std::size_t i : split.first) d.first_members.push_back(s.ids()[i]);
  for (std::size_t i : split.second) d.second_members.push_back(s.ids()[i]);
  d.cross_max = split.cross_max;
  d.within_min = gap.within_min;
  d.gap = gap.gap;
  d.degenerate_side = gap.degenerate_side;
  d.max_gamma = gamma.max_gamma;
  d.gamma_threshold = gamma.threshold;
  if (!gamma.passes) return result;

  const auto [a, b] = result.tree.split(cluster_id, d.first_members, d.second_members, round);
  d.did_split = true;
  d.first_child = a;
  d.second_child = b;
  return result;
}

double rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw std::invalid_argument("rand_index: size mismatch");
  const std::size_t n = a.size();
  if (n < 2) return 1.0;
  std::size_t agree = 0, pairs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      ++pairs;
      if ((a[i] == a[j]) == (b[i] == b[j])) ++agree;
    }
  }
  return static_cast<double>(agree) / static_cast<double>(pairs);
}

}  // namespace cflsim
