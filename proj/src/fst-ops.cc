// seqfb/fst-ops.cc

// Copyright 2026  The seqfb Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "seqfb/fst-ops.h"

#include <algorithm>
#include <deque>
#include <map>
#include <set>
#include <tuple>
#include <unordered_map>

namespace seqfb {

std::vector<bool> Accessible(const Automaton &a) {
  const StateId n = a.NumStates();
  std::vector<bool> seen(n, false);
  if (n == 0 || a.Start() < 0 || a.Start() >= n) return seen;
  std::vector<StateId> stack = {a.Start()};
  seen[a.Start()] = true;
  while (!stack.empty()) {
    StateId s = stack.back();
    stack.pop_back();
    for (const Arc &arc : a.ArcsFrom(s)) {
      if (arc.dst < 0 || arc.dst >= n || seen[arc.dst]) continue;
      seen[arc.dst] = true;
      stack.push_back(arc.dst);
    }
  }
  return seen;
}

std::vector<bool> Coaccessible(const Automaton &a) {
  const StateId n = a.NumStates();
  std::vector<std::vector<StateId>> preds(n);
  for (const Arc &arc : a.Arcs())
    if (arc.dst >= 0 && arc.dst < n) preds[arc.dst].push_back(arc.src);
  std::vector<bool> seen(n, false);
  std::vector<StateId> stack;
  for (StateId s = 0; s < n; s++) {
    if (a.IsFinal(s) && !std::isnan(a.Final(s))) {
      seen[s] = true;
      stack.push_back(s);
    }
  }
  while (!stack.empty()) {
    StateId s = stack.back();
    stack.pop_back();
    for (StateId p : preds[s]) {
      if (!seen[p]) {
        seen[p] = true;
        stack.push_back(p);
      }
    }
  }
  return seen;
}

Automaton Trim(const Automaton &a) {
  if (a.Empty()) return a;
  std::vector<bool> acc = Accessible(a), coacc = Coaccessible(a);
  const StateId n = a.NumStates();
  if (!acc[a.Start()] || !coacc[a.Start()]) {
    return Automaton().WithAlphabets(a.InputAlphabetSize(), a.OutputAlphabetSize());
  }
  std::vector<StateId> remap(n, kNoState);
  StateId kept = 0;
  for (StateId s = 0; s < n; s++)
    if (acc[s] && coacc[s]) remap[s] = kept++;
  std::vector<Arc> arcs;
  arcs.reserve(a.NumArcs());
  for (const Arc &arc : a.Arcs()) {
    if (remap[arc.src] == kNoState || arc.dst < 0 || arc.dst >= n ||
        remap[arc.dst] == kNoState)
      continue;
    Arc copy = arc;
    copy.src = remap[arc.src];
    copy.dst = remap[arc.dst];
    arcs.push_back(copy);
  }
  std::vector<double> finals(kept, kLogZero);
  for (StateId s = 0; s < n; s++)
    if (remap[s] != kNoState) finals[remap[s]] = a.Final(s);
  return Automaton(kept, remap[a.Start()], std::move(arcs), std::move(finals),
                   a.InputAlphabetSize(), a.OutputAlphabetSize());
}

namespace {

struct TripleHash {
  size_t operator()(const std::tuple<StateId, StateId, int> &t) const {
    auto [x, y, f] = t;
    uint64_t h = static_cast<uint32_t>(x);
    h = h * 0x9E3779B97F4A7C15ULL ^ static_cast<uint32_t>(y);
    h = h * 0x9E3779B97F4A7C15ULL ^ static_cast<uint32_t>(f);
    return static_cast<size_t>(h ^ (h >> 29));
  }
};

}  // namespace

Automaton Compose(const Automaton &a, const Automaton &b) {
  if (a.OutputAlphabetSize() > 0 && b.InputAlphabetSize() > 0 &&
      a.OutputAlphabetSize() != b.InputAlphabetSize()) {
    throw ConfigError("compose: output alphabet size " +
                      std::to_string(a.OutputAlphabetSize()) +
                      " does not match input alphabet size " +
                      std::to_string(b.InputAlphabetSize()));
  }
  const Label in_size = a.InputAlphabetSize(), out_size = b.OutputAlphabetSize();
  if (a.Empty() || b.Empty()) return Automaton().WithAlphabets(in_size, out_size);

  // b's arcs indexed by (state, emit label) for matching.
  std::vector<std::unordered_multimap<Label, const Arc *>> b_index(b.NumStates());
  for (const Arc &arc : b.Arcs()) b_index[arc.src].emplace(arc.emit, &arc);

  using Tuple = std::tuple<StateId, StateId, int>;
  std::unordered_map<Tuple, StateId, TripleHash> ids;
  std::deque<Tuple> queue;
  AutomatonBuilder out;
  auto get_id = [&](StateId sa, StateId sb, int filter) {
    Tuple t{sa, sb, filter};
    auto it = ids.find(t);
    if (it != ids.end()) return it->second;
    StateId id = out.AddState();
    ids.emplace(t, id);
    queue.push_back(t);
    return id;
  };
  out.SetStart(get_id(a.Start(), b.Start(), 0));

  while (!queue.empty()) {
    auto [sa, sb, filter] = queue.front();
    queue.pop_front();
    const StateId cur = ids.at(Tuple{sa, sb, filter});
    if (a.IsFinal(sa) && b.IsFinal(sb)) out.SetFinal(cur, a.Final(sa) + b.Final(sb));

    for (const Arc &ea : a.ArcsFrom(sa)) {
      if (ea.word == kEpsilon) {
        // a moves alone.
        if (filter != 1) {
          StateId dst = get_id(ea.dst, sb, 2);
          out.AddArc(cur, dst, ea.emit, kEpsilon, ea.weight);
        }
        // Both sides take an epsilon move together.
        if (filter == 0) {
          auto [lo, hi] = b_index[sb].equal_range(kEpsilon);
          for (auto it = lo; it != hi; ++it) {
            const Arc &eb = *it->second;
            StateId dst = get_id(ea.dst, eb.dst, 0);
            out.AddArc(cur, dst, ea.emit, eb.word, ea.weight + eb.weight);
          }
        }
        continue;
      }
      auto [lo, hi] = b_index[sb].equal_range(ea.word);
      for (auto it = lo; it != hi; ++it) {
        const Arc &eb = *it->second;
        StateId dst = get_id(ea.dst, eb.dst, 0);
        out.AddArc(cur, dst, ea.emit, eb.word, ea.weight + eb.weight);
      }
    }
    // b moves alone.
    if (filter != 2) {
      auto [lo, hi] = b_index[sb].equal_range(kEpsilon);
      for (auto it = lo; it != hi; ++it) {
        const Arc &eb = *it->second;
        StateId dst = get_id(sa, eb.dst, 1);
        out.AddArc(cur, dst, kEpsilon, eb.word, eb.weight);
      }
    }
  }
  return Trim(std::move(out).Build(in_size, out_size));
}

namespace {

// Strongly connected components of the emission-epsilon subgraph (Tarjan,
// iterative).  Components come out in reverse topological order.
struct EpsilonComponents {
  std::vector<int> comp_of;                 // state -> component
  std::vector<std::vector<StateId>> members;
  std::vector<int> index_in_comp;           // state -> position in members
};

EpsilonComponents FindEpsilonComponents(const Automaton &a) {
  const StateId n = a.NumStates();
  EpsilonComponents ec;
  ec.comp_of.assign(n, -1);
  ec.index_in_comp.assign(n, -1);
  std::vector<int> index(n, -1), low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<StateId> stack;
  int counter = 0;
  struct Frame {
    StateId s;
    size_t next;
  };
  for (StateId root = 0; root < n; root++) {
    if (index[root] != -1) continue;
    std::vector<Frame> call = {{root, 0}};
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!call.empty()) {
      Frame &f = call.back();
      auto arcs = a.ArcsFrom(f.s);
      bool pushed = false;
      while (f.next < arcs.size()) {
        const Arc &arc = arcs[f.next++];
        if (arc.emit != kEpsilon) continue;
        StateId t = arc.dst;
        if (index[t] == -1) {
          index[t] = low[t] = counter++;
          stack.push_back(t);
          on_stack[t] = true;
          call.push_back({t, 0});
          pushed = true;
          break;
        } else if (on_stack[t]) {
          low[f.s] = std::min(low[f.s], index[t]);
        }
      }
      if (pushed) continue;
      StateId s = f.s;
      call.pop_back();
      if (!call.empty()) low[call.back().s] = std::min(low[call.back().s], low[s]);
      if (low[s] == index[s]) {
        int c = static_cast<int>(ec.members.size());
        ec.members.emplace_back();
        StateId t;
        do {
          t = stack.back();
          stack.pop_back();
          on_stack[t] = false;
          ec.comp_of[t] = c;
          ec.index_in_comp[t] = static_cast<int>(ec.members[c].size());
          ec.members[c].push_back(t);
        } while (t != s);
      }
    }
  }
  return ec;
}

// log of (I - A)^-1 for one component, A being the summed linear weights of
// its internal epsilon arcs.
std::vector<double> ComponentStar(const Automaton &a, const EpsilonComponents &ec,
                                  int c) {
  const auto &mem = ec.members[c];
  const size_t m = mem.size();
  std::vector<double> mat(m * m, 0.0), inv(m * m, 0.0);
  bool has_internal = false;
  for (StateId s : mem) {
    for (const Arc &arc : a.ArcsFrom(s)) {
      if (arc.emit != kEpsilon || ec.comp_of[arc.dst] != c) continue;
      if (arc.word != kEpsilon)
        throw DivergenceError("word-labelled emission-epsilon cycle through state " +
                              std::to_string(arc.src));
      mat[ec.index_in_comp[s] * m + ec.index_in_comp[arc.dst]] += std::exp(arc.weight);
      has_internal = true;
    }
  }
  std::vector<double> out(m * m, kLogZero);
  if (!has_internal) {
    out[0] = kLogOne;
    return out;
  }
  // Gauss-Jordan on (I - A).
  for (size_t i = 0; i < m; i++) {
    for (size_t j = 0; j < m; j++) mat[i * m + j] = (i == j ? 1.0 : 0.0) - mat[i * m + j];
    inv[i * m + i] = 1.0;
  }
  for (size_t col = 0; col < m; col++) {
    size_t piv = col;
    for (size_t r = col + 1; r < m; r++)
      if (std::fabs(mat[r * m + col]) > std::fabs(mat[piv * m + col])) piv = r;
    if (!(std::fabs(mat[piv * m + col]) > 1e-14))
      throw DivergenceError("emission-epsilon closure diverges (singular I - A)");
    if (piv != col) {
      for (size_t j = 0; j < m; j++) {
        std::swap(mat[piv * m + j], mat[col * m + j]);
        std::swap(inv[piv * m + j], inv[col * m + j]);
      }
    }
    double d = mat[col * m + col];
    for (size_t j = 0; j < m; j++) {
      mat[col * m + j] /= d;
      inv[col * m + j] /= d;
    }
    for (size_t r = 0; r < m; r++) {
      if (r == col) continue;
      double f = mat[r * m + col];
      if (f == 0.0) continue;
      for (size_t j = 0; j < m; j++) {
        mat[r * m + j] -= f * mat[col * m + j];
        inv[r * m + j] -= f * inv[col * m + j];
      }
    }
  }
  for (size_t k = 0; k < m * m; k++) {
    // For nonnegative A the series converges iff (I - A)^-1 is nonnegative.
    if (!std::isfinite(inv[k]) || inv[k] < -1e-12)
      throw DivergenceError("emission-epsilon closure diverges (cycle weight >= 1)");
    out[k] = inv[k] > 0.0 ? std::log(inv[k]) : kLogZero;
  }
  return out;
}

class EpsilonClosure {
 public:
  explicit EpsilonClosure(const Automaton &a) : a_(a), ec_(FindEpsilonComponents(a)) {
    const int nc = static_cast<int>(ec_.members.size());
    star_.resize(nc);
    for (int c = 0; c < nc; c++) star_[c] = ComponentStar(a, ec_, c);
    // Tarjan emits sinks first, so component c is reached only from
    // components with a larger index.
  }

  // All (state, weight) pairs reachable from p over epsilon:epsilon arcs.
  std::vector<std::pair<StateId, double>> Pure(StateId p) const {
    std::map<int, std::map<int, double>, std::greater<int>> pending;  // comp -> entries
    pending[ec_.comp_of[p]][ec_.index_in_comp[p]] = kLogOne;
    std::vector<std::pair<StateId, double>> result;
    while (!pending.empty()) {
      auto node = pending.extract(pending.begin());
      const int c = node.key();
      const auto &entry = node.mapped();
      const auto &mem = ec_.members[c];
      const size_t m = mem.size();
      const auto &star = star_[c];
      for (size_t j = 0; j < m; j++) {
        double d = kLogZero;
        for (auto [i, w] : entry) d = LogAdd(d, w + star[i * m + j]);
        if (d == kLogZero) continue;
        result.emplace_back(mem[j], d);
        for (const Arc &arc : a_.ArcsFrom(mem[j])) {
          if (arc.emit != kEpsilon || arc.word != kEpsilon) continue;
          int c2 = ec_.comp_of[arc.dst];
          if (c2 == c) continue;
          double &slot = pending[c2].try_emplace(ec_.index_in_comp[arc.dst], kLogZero)
                             .first->second;
          slot = LogAdd(slot, d + arc.weight);
        }
      }
    }
    return result;
  }

  struct Item {
    StateId state;
    std::vector<Label> words;
    double weight;
  };

  // Like Pure(), but also follows word-labelled epsilon arcs, keeping the
  // word sequence of each path.
  std::vector<Item> WithWords(StateId p) const {
    std::map<std::pair<StateId, std::vector<Label>>, double> acc;
    std::vector<Item> stack = {{p, {}, kLogOne}};
    while (!stack.empty()) {
      Item it = std::move(stack.back());
      stack.pop_back();
      for (auto [q, d] : Pure(it.state)) {
        double w = it.weight + d;
        auto key = std::make_pair(q, it.words);
        auto found = acc.find(key);
        if (found == acc.end()) acc.emplace(key, w);
        else found->second = LogAdd(found->second, w);
        for (const Arc &arc : a_.ArcsFrom(q)) {
          if (arc.emit != kEpsilon || arc.word == kEpsilon) continue;
          if (ec_.comp_of[arc.dst] == ec_.comp_of[q])
            throw DivergenceError("word-labelled emission-epsilon cycle through state " +
                                  std::to_string(q));
          Item next{arc.dst, it.words, w + arc.weight};
          next.words.push_back(arc.word);
          stack.push_back(std::move(next));
        }
      }
    }
    std::vector<Item> out;
    out.reserve(acc.size());
    for (auto &[key, w] : acc) out.push_back({key.first, key.second, w});
    return out;
  }

 private:
  const Automaton &a_;
  EpsilonComponents ec_;
  std::vector<std::vector<double>> star_;
};

}  // namespace

Automaton RemoveEmissionEpsilons(const Automaton &a) {
  if (a.Empty() || a.IsEmissionReady()) return a;
  EpsilonClosure closure(a);

  using Key = std::pair<StateId, std::vector<Label>>;
  std::map<Key, StateId> ids;
  std::deque<Key> queue;
  AutomatonBuilder out;
  auto get_id = [&](StateId s, std::vector<Label> pending) {
    Key key{s, std::move(pending)};
    auto it = ids.find(key);
    if (it != ids.end()) return it->second;
    StateId id = out.AddState();
    ids.emplace(key, id);
    queue.push_back(key);
    return id;
  };
  out.SetStart(get_id(a.Start(), {}));

  std::unordered_map<StateId, std::vector<EpsilonClosure::Item>> cache;
  while (!queue.empty()) {
    Key key = queue.front();
    queue.pop_front();
    const StateId cur = ids.at(key);
    const auto &pending = key.second;
    auto cit = cache.find(key.first);
    if (cit == cache.end()) cit = cache.emplace(key.first, closure.WithWords(key.first)).first;

    // Parallel arcs with identical labels and destination are merged.
    std::map<std::tuple<StateId, Label, Label>, double> merged;
    double final_weight = kLogZero;
    for (const auto &item : cit->second) {
      std::vector<Label> words = pending;
      words.insert(words.end(), item.words.begin(), item.words.end());
      if (a.IsFinal(item.state)) {
        if (!words.empty())
          throw ConfigError("word label on an emission-epsilon path into final state " +
                            std::to_string(item.state) + " has no emitting arc to attach to");
        final_weight = LogAdd(final_weight, item.weight + a.Final(item.state));
      }
      for (const Arc &arc : a.ArcsFrom(item.state)) {
        if (arc.emit == kEpsilon) continue;
        std::vector<Label> all = words;
        if (arc.word != kEpsilon) all.push_back(arc.word);
        Label label = all.empty() ? kEpsilon : all.front();
        std::vector<Label> rest(all.empty() ? all.end() : all.begin() + 1, all.end());
        // A backlog longer than the state count can only come from a cycle
        // that adds more words than emissions; splitting would never end.
        if (rest.size() > static_cast<size_t>(a.NumStates()))
          throw ConfigError("word labels outnumber emitting arcs on a cycle through state " +
                            std::to_string(arc.dst));
        StateId dst = get_id(arc.dst, std::move(rest));
        auto [it, inserted] = merged.try_emplace({dst, arc.emit, label}, item.weight + arc.weight);
        if (!inserted) it->second = LogAdd(it->second, item.weight + arc.weight);
      }
    }
    if (final_weight != kLogZero) out.SetFinal(cur, final_weight);
    for (const auto &[k, w] : merged) {
      auto [dst, emit, word] = k;
      out.AddArc(cur, dst, emit, word, w);
    }
  }
  return Trim(std::move(out).Build(a.InputAlphabetSize(), a.OutputAlphabetSize()));
}

int64_t ShortestAcceptedLength(const Automaton &a) {
  if (a.Empty()) return -1;
  const StateId n = a.NumStates();
  std::vector<int64_t> dist(n, -1);
  std::deque<StateId> dq = {a.Start()};
  dist[a.Start()] = 0;
  std::vector<bool> done(n, false);
  while (!dq.empty()) {
    StateId s = dq.front();
    dq.pop_front();
    if (done[s]) continue;
    done[s] = true;
    if (a.IsFinal(s)) return dist[s];
    for (const Arc &arc : a.ArcsFrom(s)) {
      if (arc.dst < 0 || arc.dst >= n) continue;
      int64_t cost = arc.emit == kEpsilon ? 0 : 1;
      int64_t nd = dist[s] + cost;
      if (dist[arc.dst] == -1 || nd < dist[arc.dst]) {
        dist[arc.dst] = nd;
        if (cost == 0) dq.push_front(arc.dst);
        else dq.push_back(arc.dst);
      }
    }
  }
  return -1;
}

}  // namespace seqfb
