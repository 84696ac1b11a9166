#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace openrates {

using Word = std::vector<int>;

inline Word word_from_string(const std::string& s) {
  Word w;
  for (char c : s) {
    if (c < '0' || c > '9') throw std::invalid_argument("word_from_string: digits only");
    w.push_back(c - '0');
  }
  if (w.empty()) throw std::invalid_argument("word_from_string: empty word");
  return w;
}

inline std::string word_to_string(const Word& w) {
  std::string s;
  for (int c : w) s += static_cast<char>('0' + c);
  return s;
}

/// Subshift of finite type in a higher-block presentation: states are
/// allowed words of length `order` over the base alphabet, transitions
/// shift by one symbol.
struct SFTSpec {
  int alphabet = 0;
  int order = 1;
  std::vector<Word> states;             // each of length `order`
  std::vector<std::vector<int>> adj;    // successor state indices

  static SFTSpec full_shift(int A) {
    if (A < 1) throw std::invalid_argument("SFTSpec: alphabet size must be >= 1");
    SFTSpec s;
    s.alphabet = A;
    s.order = 1;
    for (int a = 0; a < A; ++a) s.states.push_back({a});
    s.adj.assign(A, {});
    for (int a = 0; a < A; ++a)
      for (int b = 0; b < A; ++b) s.adj[a].push_back(b);
    return s;
  }

  static SFTSpec from_matrix(const std::vector<std::vector<int>>& m) {
    int A = static_cast<int>(m.size());
    SFTSpec s = full_shift(A);
    s.adj.assign(A, {});
    for (int a = 0; a < A; ++a) {
      if (static_cast<int>(m[a].size()) != A)
        throw std::invalid_argument("SFTSpec::from_matrix: matrix not square");
      for (int b = 0; b < A; ++b)
        if (m[a][b] != 0) s.adj[a].push_back(b);
    }
    return s;
  }

  /// {"alphabet":A, "forbidden_blocks":["11",...]} or {"matrix":[[...],...]}
  static SFTSpec from_json(const nlohmann::json& j);

  int dim() const { return static_cast<int>(states.size()); }

  int state_index(const Word& w) const {
    for (int i = 0; i < dim(); ++i)
      if (states[i] == w) return i;
    return -1;
  }

  bool has_transition(int u, int v) const {
    return std::find(adj[u].begin(), adj[u].end(), v) != adj[u].end();
  }

  /// Whether the base word occurs in the subshift's language.
  bool allows(const Word& w) const {
    if (static_cast<int>(w.size()) <= order) {
      for (auto& st : states)
        if (std::search(st.begin(), st.end(), w.begin(), w.end()) != st.end()) return true;
      // may also straddle a transition
      if (static_cast<int>(w.size()) < order + 1) {
        for (int u = 0; u < dim(); ++u)
          for (int v : adj[u]) {
            Word joined = states[u];
            joined.push_back(states[v].back());
            if (std::search(joined.begin(), joined.end(), w.begin(), w.end()) != joined.end())
              return true;
          }
      }
      if (static_cast<int>(w.size()) <= order) return false;
    }
    // walk the state graph spelling w
    Word head(w.begin(), w.begin() + order);
    int u = state_index(head);
    if (u < 0) return false;
    for (size_t i = order; i < w.size(); ++i) {
      Word next(w.begin() + (i - order + 1), w.begin() + (i + 1));
      int v = state_index(next);
      if (v < 0 || !has_transition(u, v)) return false;
      u = v;
    }
    return true;
  }
};

namespace sft_detail {

struct Graph {
  std::vector<std::vector<int>> adj;
};

inline std::vector<int> strongly_connected_component_of_all(const std::vector<std::vector<int>>& adj) {
  // returns component ids via Kosaraju; -1 never assigned
  int n = static_cast<int>(adj.size());
  std::vector<std::vector<int>> radj(n);
  for (int u = 0; u < n; ++u)
    for (int v : adj[u]) radj[v].push_back(u);
  std::vector<int> order;
  std::vector<char> seen(n, 0);
  for (int s = 0; s < n; ++s) {
    if (seen[s]) continue;
    std::vector<std::pair<int, size_t>> st{{s, 0}};
    seen[s] = 1;
    while (!st.empty()) {
      auto [u, k] = st.back();
      if (k < adj[u].size()) {
        ++st.back().second;
        int v = adj[u][k];
        if (!seen[v]) {
          seen[v] = 1;
          st.emplace_back(v, 0);
        }
      } else {
        order.push_back(u);
        st.pop_back();
      }
    }
  }
  std::vector<int> comp(n, -1);
  int nc = 0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (comp[*it] != -1) continue;
    std::vector<int> stack{*it};
    comp[*it] = nc;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int v : radj[u])
        if (comp[v] == -1) {
          comp[v] = nc;
          stack.push_back(v);
        }
    }
    ++nc;
  }
  return comp;
}

/// Period of a strongly connected graph: gcd over edges of
/// level(u) + 1 - level(v) from a BFS level assignment.
inline int graph_period(const std::vector<std::vector<int>>& adj) {
  int n = static_cast<int>(adj.size());
  std::vector<long> level(n, -1);
  std::vector<int> queue{0};
  level[0] = 0;
  for (size_t h = 0; h < queue.size(); ++h) {
    int u = queue[h];
    for (int v : adj[u])
      if (level[v] < 0) {
        level[v] = level[u] + 1;
        queue.push_back(v);
      }
  }
  long g = 0;
  for (int u = 0; u < n; ++u)
    for (int v : adj[u]) g = std::gcd(g, std::abs(level[u] + 1 - level[v]));
  return static_cast<int>(g);
}

}  // namespace sft_detail

/// Primitivity = strong connectivity + aperiodicity; `period` reports
/// the cyclic period when the check fails on a connected graph.
struct PrimitivityReport {
  bool strongly_connected = false;
  int period = 0;
  bool primitive() const { return strongly_connected && period == 1; }
};

inline PrimitivityReport check_primitivity(const SFTSpec& sft) {
  PrimitivityReport rep;
  if (sft.dim() == 0) return rep;
  auto comp = sft_detail::strongly_connected_component_of_all(sft.adj);
  rep.strongly_connected = *std::max_element(comp.begin(), comp.end()) == 0;
  bool any_edge = false;
  for (auto& a : sft.adj) any_edge |= !a.empty();
  if (!any_edge) {
    rep.strongly_connected = false;
    return rep;
  }
  if (rep.strongly_connected) rep.period = sft_detail::graph_period(sft.adj);
  return rep;
}

struct PerronData {
  double lambda = 0.0;
  std::vector<double> right;  // A r = lambda r
  std::vector<double> left;   // l^T A = lambda l^T
};

inline PerronData perron_eigendata(const SFTSpec& sft, double tol = 1e-14, long max_iter = 200000) {
  int n = sft.dim();
  PerronData p;
  p.right.assign(n, 1.0);
  p.left.assign(n, 1.0);
  auto iterate = [&](std::vector<double>& v, bool transpose) {
    double lambda = 0.0, prev = -1.0;
    for (long it = 0; it < max_iter; ++it) {
      std::vector<double> w(n, 0.0);
      for (int u = 0; u < n; ++u)
        for (int vtx : sft.adj[u]) {
          if (transpose)
            w[vtx] += v[u];
          else
            w[u] += v[vtx];
        }
      double s = 0.0;
      for (double x : w) s += x;
      if (s <= 0.0) return 0.0;
      lambda = 0.0;
      double norm = 0.0;
      for (double x : v) norm += x;
      lambda = s / norm;
      for (auto& x : w) x *= norm / s;
      v = std::move(w);
      if (std::abs(lambda - prev) < tol * std::max(lambda, 1e-30)) break;
      prev = lambda;
    }
    return lambda;
  };
  double lr = iterate(p.right, false);
  double ll = iterate(p.left, true);
  p.lambda = 0.5 * (lr + ll);
  return p;
}

/// log of the leading eigenvalue of the 0/1 transfer matrix.
inline double topological_entropy(const SFTSpec& sft) {
  auto prim = check_primitivity(sft);
  if (!prim.primitive()) {
    if (!prim.strongly_connected)
      throw std::invalid_argument("topological_entropy: presentation not strongly connected");
    throw std::invalid_argument("topological_entropy: presentation not primitive (period " +
                                std::to_string(prim.period) + ")");
  }
  double lambda = perron_eigendata(sft).lambda;
  return std::log(lambda);
}

/// Recode to states = allowed words of length p >= current order.
inline SFTSpec recode_to_order(const SFTSpec& sft, int p) {
  if (p < sft.order) throw std::invalid_argument("recode_to_order: cannot lower the order");
  if (p == sft.order) return sft;
  SFTSpec out;
  out.alphabet = sft.alphabet;
  out.order = p;
  std::map<Word, int> index;
  // enumerate allowed p-words by extending state words along transitions
  std::vector<std::pair<Word, int>> frontier;  // (word, last state index)
  for (int u = 0; u < sft.dim(); ++u) frontier.emplace_back(sft.states[u], u);
  for (int len = sft.order; len < p; ++len) {
    std::vector<std::pair<Word, int>> next;
    for (auto& [w, u] : frontier)
      for (int v : sft.adj[u]) {
        Word w2 = w;
        w2.push_back(sft.states[v].back());
        next.emplace_back(std::move(w2), v);
      }
    frontier = std::move(next);
    if (frontier.size() > (1u << 22))
      throw std::runtime_error("recode_to_order: state explosion");
  }
  for (auto& [w, u] : frontier)
    if (!index.count(w)) {
      index[w] = static_cast<int>(out.states.size());
      out.states.push_back(w);
    }
  out.adj.assign(out.states.size(), {});
  for (int i = 0; i < out.dim(); ++i) {
    Word suffix(out.states[i].begin() + 1, out.states[i].end());
    for (int c = 0; c < sft.alphabet; ++c) {
      Word w2 = suffix;
      w2.push_back(c);
      auto it = index.find(w2);
      if (it != index.end()) out.adj[i].push_back(it->second);
    }
  }
  return out;
}

/// Deletes one allowed block: higher-block recoding to order L-1 (when
/// needed) and removal of the transition realizing the block.
inline SFTSpec delete_block(const SFTSpec& sft, const Word& block) {
  if (!sft.allows(block))
    throw std::invalid_argument("delete_block: block '" + word_to_string(block) +
                                "' already forbidden");
  int L = static_cast<int>(block.size());
  if (L <= sft.order) {
    // forbidding a short word: drop every state containing it
    SFTSpec out;
    out.alphabet = sft.alphabet;
    out.order = sft.order;
    std::vector<int> remap(sft.dim(), -1);
    for (int i = 0; i < sft.dim(); ++i) {
      if (std::search(sft.states[i].begin(), sft.states[i].end(), block.begin(), block.end()) !=
          sft.states[i].end())
        continue;
      remap[i] = out.dim();
      out.states.push_back(sft.states[i]);
    }
    out.adj.assign(out.dim(), {});
    for (int u = 0; u < sft.dim(); ++u) {
      if (remap[u] < 0) continue;
      for (int v : sft.adj[u])
        if (remap[v] >= 0) out.adj[remap[u]].push_back(remap[v]);
    }
    return out;
  }
  SFTSpec out = recode_to_order(sft, L - 1);
  Word head(block.begin(), block.end() - 1);
  Word tail(block.begin() + 1, block.end());
  int u = out.state_index(head);
  int v = out.state_index(tail);
  if (u < 0 || v < 0) throw std::invalid_argument("delete_block: block not realizable");
  auto& lst = out.adj[u];
  lst.erase(std::remove(lst.begin(), lst.end(), v), lst.end());
  return out;
}

/// Simultaneous deletion; only pairwise non-overlapping, non-nested
/// block sets are accepted.
inline SFTSpec delete_blocks(const SFTSpec& sft, const std::vector<Word>& blocks) {
  auto overlaps = [](const Word& a, const Word& b) {
    // b occurs in a, or a proper suffix of a equals a prefix of b
    if (std::search(a.begin(), a.end(), b.begin(), b.end()) != a.end()) return true;
    size_t kmax = std::min(a.size(), b.size()) - 1;
    for (size_t k = 1; k <= kmax; ++k)
      if (std::equal(a.end() - k, a.end(), b.begin())) return true;
    return false;
  };
  for (size_t i = 0; i < blocks.size(); ++i)
    for (size_t j = 0; j < blocks.size(); ++j)
      if (i != j && overlaps(blocks[i], blocks[j]))
        throw std::invalid_argument("delete_blocks: overlapping block pair '" +
                                    word_to_string(blocks[i]) + "', '" +
                                    word_to_string(blocks[j]) + "' not supported");
  SFTSpec out = sft;
  for (auto& b : blocks) out = delete_block(out, b);
  return out;
}

/// mu0(cylinder) under the Parry (maximal-entropy) measure:
/// l_{w0} r_{wL-1} / (lambda^{L-1} <l,r>) when the word is allowed.
inline double block_measure_maxentropy(const SFTSpec& sft, const Word& block) {
  if (sft.order != 1)
    throw std::invalid_argument("block_measure_maxentropy: order-1 presentation required");
  auto prim = check_primitivity(sft);
  if (!prim.primitive()) throw std::invalid_argument("block_measure_maxentropy: not primitive");
  for (int c : block)
    if (c < 0 || c >= sft.alphabet) throw std::invalid_argument("block_measure_maxentropy: symbol out of range");
  for (size_t i = 0; i + 1 < block.size(); ++i)
    if (!sft.has_transition(block[i], block[i + 1])) return 0.0;
  PerronData p = perron_eigendata(sft);
  double lr = 0.0;
  for (int a = 0; a < sft.dim(); ++a) lr += p.left[a] * p.right[a];
  double mass = p.left[block.front()] * p.right[block.back()] / lr;
  for (size_t i = 0; i + 1 < block.size(); ++i) mass /= p.lambda;
  return mass;
}

/// q_k of the cylinder hole in the shrinking-block regime, computed
/// from the block's self-overlap structure: a suffix-state automaton
/// driven by the Parry chain counts first re-occurrences at shift k+1
/// while forbidding occurrences at shifts 1..k. Contributions beyond
/// shift L vanish with the cylinder, so theta sums shifts <= min(N, L).
inline double theta_block(const SFTSpec& sft, const Word& block, long N = -1) {
  if (sft.order != 1) throw std::invalid_argument("theta_block: order-1 presentation required");
  int L = static_cast<int>(block.size());
  if (N < 0) N = 4L * L;
  if (block_measure_maxentropy(sft, block) <= 0.0)
    throw std::invalid_argument("theta_block: block has zero Parry mass");
  PerronData p = perron_eigendata(sft);
  auto step_prob = [&](int a, int b) {
    if (!sft.has_transition(a, b)) return 0.0;
    return p.right[b] / (p.lambda * p.right[a]);
  };
  int state_len = std::max(L - 1, 1);
  std::map<Word, double> dist;
  Word start(block.end() - state_len, block.end());
  dist[start] = 1.0;
  auto is_hit = [&](const Word& state, int sym) {
    if (L == 1) return sym == block[0];
    return std::equal(block.begin(), block.end() - 1, state.begin()) && sym == block[L - 1];
  };
  double qsum = 0.0;
  long K = std::min<long>(N, L);  // shifts k+1 <= L survive the shrinking limit
  for (long k = 0; k < K; ++k) {
    // probability of hitting exactly now
    double hit = 0.0;
    for (auto& [state, mass] : dist) hit += mass * step_prob(state.back(), block[L - 1]) *
                                            (is_hit(state, block[L - 1]) ? 1.0 : 0.0);
    qsum += hit;
    // advance one step avoiding hits
    std::map<Word, double> next;
    for (auto& [state, mass] : dist)
      for (int c = 0; c < sft.alphabet; ++c) {
        if (is_hit(state, c)) continue;
        double pr = step_prob(state.back(), c);
        if (pr <= 0.0) continue;
        Word ns(state.begin() + 1, state.end());
        ns.push_back(c);
        next[ns] += mass * pr;
      }
    dist = std::move(next);
  }
  return 1.0 - qsum;
}

/// Exact entropy drop vs. the first-order prediction theta * mu0(block).
struct EntropyReport {
  Word block;
  double h_closed = 0.0;
  double h_open = 0.0;
  double drop = 0.0;
  double block_mass = 0.0;
  double theta_block_value = 0.0;
  double predicted_drop = 0.0;
  double ratio = 0.0;  // drop / predicted_drop
};

inline std::vector<EntropyReport> entropy_drop_study(const SFTSpec& base,
                                                     const std::vector<Word>& block_family,
                                                     long N = -1) {
  double h_closed = topological_entropy(base);
  std::vector<EntropyReport> out;
  for (auto& block : block_family) {
    EntropyReport rep;
    rep.block = block;
    rep.h_closed = h_closed;
    SFTSpec open = delete_block(base, block);
    rep.h_open = topological_entropy(open);
    rep.drop = rep.h_closed - rep.h_open;
    rep.block_mass = block_measure_maxentropy(base, block);
    rep.theta_block_value = theta_block(base, block, N);
    rep.predicted_drop = rep.theta_block_value * rep.block_mass;
    rep.ratio = rep.predicted_drop > 0.0 ? rep.drop / rep.predicted_drop : 0.0;
    out.push_back(rep);
  }
  return out;
}

inline SFTSpec SFTSpec::from_json(const nlohmann::json& j) {
  if (j.contains("matrix")) return from_matrix(j.at("matrix").get<std::vector<std::vector<int>>>());
  SFTSpec s = full_shift(j.at("alphabet").get<int>());
  if (j.contains("forbidden_blocks")) {
    std::vector<Word> blocks;
    for (auto& b : j.at("forbidden_blocks")) blocks.push_back(word_from_string(b.get<std::string>()));
    s = delete_blocks(s, blocks);
  }
  return s;
}

}  // namespace openrates
