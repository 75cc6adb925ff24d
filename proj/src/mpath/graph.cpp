#include "mpath/graph.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <deque>
#include <fstream>
#include <iterator>
#include <limits>

#include "mpath/error.hpp"

namespace mpath {
namespace {

std::vector<std::string_view> fields_of(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == ','))
      ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != ',')
      ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

bool skip_line(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto p = line.find_first_not_of(" \t");
  return p == std::string::npos || line[p] == '#';
}

double parse_count(std::string_view f, std::size_t lineno) {
  double v = 0;
  auto r = std::from_chars(f.data(), f.data() + f.size(), v);
  if (r.ec != std::errc() || r.ptr != f.data() + f.size() || v < 0)
    throw ParseError(lineno, "invalid count '" + std::string(f) + "'");
  return v;
}

void normalize(std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  if (s == 0) return;
  const double n = std::sqrt(s);
  for (double& x : v) x /= n;
}

double max_change(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

bool has_cycle(const SocialGraph& g) {
  // Kahn's algorithm: a cycle exists iff not every node can be removed.
  std::vector<std::size_t> indeg(g.size());
  for (std::size_t v = 0; v < g.size(); ++v) indeg[v] = g.in(v).size();
  std::vector<std::size_t> ready;
  for (std::size_t v = 0; v < g.size(); ++v)
    if (indeg[v] == 0) ready.push_back(v);
  std::size_t removed = 0;
  while (!ready.empty()) {
    const auto v = ready.back();
    ready.pop_back();
    ++removed;
    for (auto w : g.out(v))
      if (--indeg[w] == 0) ready.push_back(w);
  }
  return removed < g.size();
}

}  // namespace

std::size_t SocialGraph::add_node(std::string_view id) {
  auto it = lookup_.find(std::string(id));
  if (it != lookup_.end()) return it->second;
  const std::size_t n = ids_.size();
  ids_.emplace_back(id);
  lookup_.emplace(ids_.back(), n);
  out_.emplace_back();
  in_.emplace_back();
  followers_.emplace_back();
  friends_.emplace_back();
  return n;
}

bool SocialGraph::add_edge(std::string_view from, std::string_view to) {
  if (from == to) {
    add_node(from);
    return false;
  }
  const auto a = add_node(from);
  const auto b = add_node(to);
  auto& o = out_[a];
  auto pos = std::lower_bound(o.begin(), o.end(), b);
  if (pos != o.end() && *pos == b) return false;
  o.insert(pos, b);
  auto& i = in_[b];
  i.insert(std::lower_bound(i.begin(), i.end(), a), a);
  ++edges_;
  return true;
}

void SocialGraph::set_counts(std::string_view id, double followers,
                             double friends) {
  const auto n = add_node(id);
  followers_[n] = followers;
  friends_[n] = friends;
}

SocialGraph SocialGraph::load(const std::filesystem::path& edges,
                              const std::filesystem::path& nodes) {
  std::ifstream in(edges);
  if (!in) fail(ErrorKind::io, "cannot open edge list " + edges.string());
  SocialGraph g;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (skip_line(line)) continue;
    const auto f = fields_of(line);
    if (f.size() != 2)
      throw ParseError(lineno, "expected 'src dst', found " +
                                   std::to_string(f.size()) + " fields");
    g.add_edge(f[0], f[1]);
  }
  if (!nodes.empty()) g.load_counts(nodes);
  return g;
}

void SocialGraph::load_counts(const std::filesystem::path& nodes) {
  std::ifstream in(nodes);
  if (!in) fail(ErrorKind::io, "cannot open node attribute file " + nodes.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (skip_line(line)) continue;
    const auto f = fields_of(line);
    if (f.size() != 3)
      throw ParseError(lineno, "expected 'node followers friends', found " +
                                   std::to_string(f.size()) + " fields");
    set_counts(f[0], parse_count(f[1], lineno), parse_count(f[2], lineno));
  }
}

std::optional<std::size_t> SocialGraph::find(std::string_view id) const {
  auto it = lookup_.find(std::string(id));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::size_t SocialGraph::index(std::string_view id) const {
  auto n = find(id);
  if (!n) fail(ErrorKind::lookup, "unknown node '" + std::string(id) + "'");
  return *n;
}

bool SocialGraph::has_edge(std::size_t from, std::size_t to) const {
  const auto& o = out_.at(from);
  return std::binary_search(o.begin(), o.end(), to);
}

double SocialGraph::followers(std::size_t node) const {
  const auto& f = followers_.at(node);
  return f ? *f : static_cast<double>(in_[node].size());
}

double SocialGraph::friends(std::size_t node) const {
  const auto& f = friends_.at(node);
  return f ? *f : static_cast<double>(out_[node].size());
}

double reciprocity(const SocialGraph& g, std::string_view node) {
  return reciprocity(g, g.index(node));
}

double reciprocity(const SocialGraph& g, std::size_t node) {
  const auto& followers = g.in(node);
  if (followers.empty()) return 0.0;
  const auto& friends = g.out(node);
  std::size_t back = 0;
  for (auto f : followers)
    if (std::binary_search(friends.begin(), friends.end(), f)) ++back;
  return static_cast<double>(back) / static_cast<double>(followers.size());
}

HitsScores hits(const SocialGraph& g, PowerIterationOptions opt) {
  const std::size_t n = g.size();
  HitsScores s;
  s.hub.assign(n, n ? 1.0 / std::sqrt(static_cast<double>(n)) : 0.0);
  s.authority = s.hub;
  std::vector<double> a(n), h(n);
  for (std::size_t it = 0; it < opt.max_iters; ++it) {
    for (std::size_t v = 0; v < n; ++v) {
      double sum = 0;
      for (auto u : g.in(v)) sum += s.hub[u];
      a[v] = sum;
    }
    normalize(a);
    for (std::size_t u = 0; u < n; ++u) {
      double sum = 0;
      for (auto v : g.out(u)) sum += a[v];
      h[u] = sum;
    }
    normalize(h);
    const double delta = std::max(max_change(a, s.authority), max_change(h, s.hub));
    s.authority.swap(a);
    s.hub.swap(h);
    s.iterations = it + 1;
    if (delta < opt.tol) break;
  }
  return s;
}

std::vector<double> eigenvector_centrality(const SocialGraph& g,
                                           PowerIterationOptions opt) {
  const std::size_t n = g.size();
  require(g.edge_count() > 0, ErrorKind::degenerate,
          "eigenvector centrality: graph has no edges");
  require(has_cycle(g), ErrorKind::degenerate,
          "eigenvector centrality: graph is acyclic, adjacency is nilpotent");
  std::vector<double> x(n, 1.0 / std::sqrt(static_cast<double>(n))), y(n);
  for (std::size_t it = 0; it < opt.max_iters; ++it) {
    for (std::size_t v = 0; v < n; ++v) {
      double sum = x[v];
      for (auto u : g.in(v)) sum += x[u];
      y[v] = sum;
    }
    normalize(y);
    const double delta = max_change(x, y);
    x.swap(y);
    if (delta < opt.tol) break;
  }
  return x;
}

double closeness(const SocialGraph& g, std::size_t node) {
  const std::size_t n = g.size();
  if (n < 2) return 0.0;
  std::vector<std::size_t> dist(n, std::numeric_limits<std::size_t>::max());
  std::deque<std::size_t> queue{node};
  dist.at(node) = 0;
  std::size_t reached = 0, total = 0;
  while (!queue.empty()) {
    const auto u = queue.front();
    queue.pop_front();
    for (auto v : g.out(u)) {
      if (dist[v] != std::numeric_limits<std::size_t>::max()) continue;
      dist[v] = dist[u] + 1;
      ++reached;
      total += dist[v];
      queue.push_back(v);
    }
  }
  if (reached == 0) return 0.0;
  const double r = static_cast<double>(reached);
  return (r / static_cast<double>(total)) * (r / static_cast<double>(n - 1));
}

double clustering_coefficient(const SocialGraph& g, std::size_t node) {
  std::vector<std::size_t> nb;
  std::set_union(g.out(node).begin(), g.out(node).end(), g.in(node).begin(),
                 g.in(node).end(), std::back_inserter(nb));
  const std::size_t k = nb.size();
  if (k < 2) return 0.0;
  std::size_t links = 0;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j)
      if (g.has_edge(nb[i], nb[j]) || g.has_edge(nb[j], nb[i])) ++links;
  return static_cast<double>(links) / (static_cast<double>(k * (k - 1)) / 2.0);
}

double power_difference(double user_followers,
                        std::span<const double> mention_followers) {
  if (mention_followers.empty()) return 0.0;
  double mean = 0;
  for (double f : mention_followers) mean += std::log10(1.0 + f);
  mean /= static_cast<double>(mention_followers.size());
  return std::log10(1.0 + user_followers) - mean;
}

double power_difference(const SocialGraph& g, std::size_t node,
                        std::span<const std::size_t> mentioned) {
  std::vector<double> f;
  f.reserve(mentioned.size());
  for (auto m : mentioned) f.push_back(g.followers(m));
  return power_difference(g.followers(node), f);
}

FeatureSchema network_feature_schema() {
  FeatureSchema s;
  for (const char* n :
       {"nf.followers", "nf.friends", "nf.follower_friend_ratio",
        "nf.reciprocity", "nf.power_difference", "nf.hub", "nf.authority",
        "nf.eigenvector", "nf.closeness", "nf.clustering"})
    s.push_back({n, FeatureGroup::NF});
  return s;
}

NetworkFeatureTable::NetworkFeatureTable(const SocialGraph& g)
    : g_(g), hits_(hits(g)) {
  try {
    eigen_ = eigenvector_centrality(g);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::degenerate) throw;
    eigen_.clear();  // column left missing and imputed downstream
  }
  closeness_.resize(g.size());
  clustering_.resize(g.size());
  for (std::size_t v = 0; v < g.size(); ++v) {
    closeness_[v] = closeness(g, v);
    clustering_[v] = clustering_coefficient(g, v);
  }
}

std::vector<double> NetworkFeatureTable::row(
    std::string_view user, std::span<const std::string> mentions) const {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> out(network_feature_schema().size(), nan);
  const auto u = g_.find(user);
  if (!u) return out;
  const std::size_t v = *u;
  std::vector<std::size_t> mentioned;
  for (const auto& m : mentions)
    if (auto idx = g_.find(m)) mentioned.push_back(*idx);
  out[0] = g_.followers(v);
  out[1] = g_.friends(v);
  out[2] = g_.followers(v) / std::max(1.0, g_.friends(v));
  out[3] = reciprocity(g_, v);
  out[4] = power_difference(g_, v, mentioned);
  out[5] = hits_.hub[v];
  out[6] = hits_.authority[v];
  out[7] = eigen_.empty() ? nan : eigen_[v];
  out[8] = closeness_[v];
  out[9] = clustering_[v];
  return out;
}

std::vector<std::string> extract_mentions(std::string_view text) {
  std::vector<std::string> out;
  auto handle = [](unsigned char c) {
    return std::isalnum(c) || c == '_';
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '@') continue;
    if (i > 0 && handle(static_cast<unsigned char>(text[i - 1]))) continue;
    std::size_t j = i + 1;
    while (j < text.size() && handle(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i + 1) out.emplace_back(text.substr(i + 1, j - i - 1));
    i = j - 1;
  }
  return out;
}

}  // namespace mpath
