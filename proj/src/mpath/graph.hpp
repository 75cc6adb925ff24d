#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mpath/dataset.hpp"

namespace mpath {

// Directed follower graph: an edge u -> v means u follows v. Followers of u
// are its in-neighbours, friends its out-neighbours.
class SocialGraph {
 public:
  std::size_t add_node(std::string_view id);
  // Returns false (and leaves the graph unchanged) for self-loops and
  // duplicate edges.
  bool add_edge(std::string_view from, std::string_view to);
  // Overrides the degree-derived popularity counts of a node.
  void set_counts(std::string_view id, double followers, double friends);

  // "src dst" per line; blank lines and '#' comments are skipped.
  static SocialGraph load(const std::filesystem::path& edges,
                          const std::filesystem::path& nodes = {});
  // "node followers friends" per line.
  void load_counts(const std::filesystem::path& nodes);

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t edge_count() const noexcept { return edges_; }
  const std::string& id(std::size_t node) const { return ids_.at(node); }
  std::optional<std::size_t> find(std::string_view id) const;
  std::size_t index(std::string_view id) const;  // lookup error when absent

  const std::vector<std::size_t>& out(std::size_t node) const { return out_.at(node); }
  const std::vector<std::size_t>& in(std::size_t node) const { return in_.at(node); }
  bool has_edge(std::size_t from, std::size_t to) const;

  double followers(std::size_t node) const;
  double friends(std::size_t node) const;

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> lookup_;
  std::vector<std::vector<std::size_t>> out_, in_;  // kept sorted
  std::vector<std::optional<double>> followers_, friends_;
  std::size_t edges_ = 0;
};

struct PowerIterationOptions {
  std::size_t max_iters = 100;
  double tol = 1e-8;
};

struct HitsScores {
  std::vector<double> hub;
  std::vector<double> authority;
  std::size_t iterations = 0;
};

// Fraction of the node's followers it follows back; 0 without followers.
double reciprocity(const SocialGraph& g, std::string_view node);
double reciprocity(const SocialGraph& g, std::size_t node);

// Alternating authority = A^T hub, hub = A authority with L2 normalization,
// until the largest coordinate change falls below tol.
HitsScores hits(const SocialGraph& g, PowerIterationOptions opt = {});

// Incoming-edge eigenvector centrality, L2-normalized. Iterates x <- (I + A^T)x
// (same eigenvectors, no oscillation on periodic graphs). Throws a degenerate
// error when the graph has no directed cycle, since A is then nilpotent and no
// positive dominant eigenvalue exists.
std::vector<double> eigenvector_centrality(const SocialGraph& g,
                                           PowerIterationOptions opt = {});

// (r / sum of BFS distances) * (r / (n - 1)) over the r nodes reachable from
// the node along out-edges; 0 when nothing is reachable.
double closeness(const SocialGraph& g, std::size_t node);

// Local clustering coefficient on the undirected projection.
double clustering_coefficient(const SocialGraph& g, std::size_t node);

// log10(1 + followers(u)) - mean over mentions of log10(1 + followers(m)).
double power_difference(double user_followers,
                        std::span<const double> mention_followers);
double power_difference(const SocialGraph& g, std::size_t node,
                        std::span<const std::size_t> mentioned);

FeatureSchema network_feature_schema();

// Graph-wide metrics cached once, then read per post author.
class NetworkFeatureTable {
 public:
  explicit NetworkFeatureTable(const SocialGraph& g);

  // Row of network_feature_schema() values; NaN for an unknown user.
  std::vector<double> row(std::string_view user,
                          std::span<const std::string> mentions) const;
  bool eigenvector_available() const noexcept { return !eigen_.empty(); }

 private:
  const SocialGraph& g_;
  HitsScores hits_;
  std::vector<double> eigen_;
  std::vector<double> closeness_;
  std::vector<double> clustering_;
};

// "@name" handles in a post, in order of appearance.
std::vector<std::string> extract_mentions(std::string_view text);

}  // namespace mpath
