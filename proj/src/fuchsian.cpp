#include <functional>
#include <limits>
// geoflow - Bolza group implementation
#include "geoflow/fuchsian.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace geoflow {

const std::array<Mobius, 8>& bolza_generators_mobius() {
  static const std::array<Mobius, 8> gens = [] {
    std::array<Mobius, 8> g;
    const double a = 1.0 + std::sqrt(2.0);
    const double bm = std::sqrt(2.0 + 2.0 * std::sqrt(2.0));
    for (int k = 0; k < 8; ++k)
      g[k] = Mobius{cplx(a, 0.0), std::polar(bm, k * kPi / 4.0)};
    return g;
  }();
  return gens;
}

std::vector<IsometryElement> bolza_generators() {
  std::vector<IsometryElement> out;
  const auto& gens = bolza_generators_mobius();
  for (int k = 0; k < 8; ++k) out.push_back({gens[k], Word{}.append(k)});
  return out;
}

Word bolza_relator() {
  // a b^-1 c d^-1 a^-1 b c^-1 d  =  letters 0 5 2 7 4 1 6 3
  return Word::from_letters({0, 5, 2, 7, 4, 1, 6, 3});
}

DiskPoint apply(const Mobius& m, DiskPoint z) {
  return disk_point(m.apply(z.z));
}

//--------------------------------------------------------------------------------------
// Ball enumeration.  Dedup hash: bucket on quantized (Re a, Im a) at a coarse cell,
// probing the 3x3 neighborhood; matrices within dedup_tol are identified.  Distinct
// elements at the word lengths used are separated by >> 1e-3, so the coarse cell
// cannot merge distinct elements.

namespace {

struct PairHash {
  size_t operator()(const std::pair<int64_t, int64_t>& p) const {
    return std::hash<int64_t>()(p.first) ^ (std::hash<int64_t>()(p.second) * 0x9e3779b97f4a7c15ull);
  }
};

class MobiusIndex {
 public:
  explicit MobiusIndex(double tol) : tol_(tol), cell_(1e-6) {}

  // Returns index of a stored matrix within tol, or -1.
  int find(const Mobius& m_in) const {
    Mobius m = m_in.canonical_sign();
    int64_t ca = llround(m.a.real() / cell_);
    int64_t cb = llround(m.a.imag() / cell_);
    for (int64_t da = -1; da <= 1; ++da)
      for (int64_t db = -1; db <= 1; ++db) {
        auto it = map_.find({ca + da, cb + db});
        if (it == map_.end()) continue;
        for (int idx : it->second) {
          const Mobius& s = store_[idx];
          if (std::abs(s.a - m.a) + std::abs(s.b - m.b) < tol_) return idx;
        }
      }
    return -1;
  }

  int insert(const Mobius& m_in) {
    Mobius m = m_in.canonical_sign();
    int idx = int(store_.size());
    store_.push_back(m);
    map_[{llround(m.a.real() / cell_), llround(m.a.imag() / cell_)}].push_back(idx);
    return idx;
  }

  size_t size() const { return store_.size(); }

 private:
  double tol_, cell_;
  std::vector<Mobius> store_;
  std::unordered_map<std::pair<int64_t, int64_t>, std::vector<int>, PairHash> map_;
};

}  // namespace

const IsometryElement* GroupBall::find(const Mobius& m_in) const {
  Mobius m = m_in.canonical_sign();
  for (const auto& e : elements)
    if (std::abs(e.m.a - m.a) + std::abs(e.m.b - m.b) < dedup_tol) return &e;
  return nullptr;
}

GroupBall enumerate_ball(int L, int max_radius, double dedup_tol) {
  if (L < 0) throw config_error("ball radius must be >= 0");
  if (L > max_radius)
    throw resource_error("ball radius " + std::to_string(L) + " exceeds cap " +
                         std::to_string(max_radius));
  const auto& gens = bolza_generators_mobius();

  GroupBall ball;
  ball.radius = L;
  ball.dedup_tol = dedup_tol;

  MobiusIndex index(dedup_tol);
  index.insert(Mobius{});
  ball.elements.push_back({Mobius{}, Word{}});

  std::vector<IsometryElement> frontier = {{Mobius{}, Word{}}};
  for (int len = 1; len <= L; ++len) {
    std::vector<IsometryElement> next;
    for (const auto& e : frontier) {
      for (int k = 0; k < 8; ++k) {
        if (!e.word.can_append_reduced(k)) continue;
        Mobius m = e.m * gens[k];
        if (index.find(m) >= 0) continue;
        index.insert(m);
        IsometryElement el{m.canonical_sign(), e.word.append(k)};
        next.push_back(el);
        ball.elements.push_back(el);
      }
    }
    frontier = std::move(next);
  }
  std::sort(ball.elements.begin(), ball.elements.end(),
            [](const IsometryElement& x, const IsometryElement& y) { return x.word < y.word; });
  return ball;
}

//--------------------------------------------------------------------------------------
// Ball cache: fixed-layout little-endian binary.

namespace {
constexpr uint32_t kBallMagic = 0x47464231;  // "GFB1"
}

void save_ball(const GroupBall& ball, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw config_error("cannot write ball cache: " + path);
  uint32_t magic = kBallMagic, version = 1;
  uint64_t n = ball.elements.size();
  int32_t radius = ball.radius;
  f.write(reinterpret_cast<const char*>(&magic), 4);
  f.write(reinterpret_cast<const char*>(&version), 4);
  f.write(reinterpret_cast<const char*>(&radius), 4);
  f.write(reinterpret_cast<const char*>(&ball.dedup_tol), 8);
  f.write(reinterpret_cast<const char*>(&n), 8);
  for (const auto& e : ball.elements) {
    double buf[4] = {e.m.a.real(), e.m.a.imag(), e.m.b.real(), e.m.b.imag()};
    f.write(reinterpret_cast<const char*>(buf), 32);
    uint64_t bits = e.word.bits;
    uint8_t len = e.word.len;
    f.write(reinterpret_cast<const char*>(&bits), 8);
    f.write(reinterpret_cast<const char*>(&len), 1);
  }
}

std::optional<GroupBall> load_ball(const std::string& path, int L, double dedup_tol) {
  std::ifstream f(path, std::ios::binary);
  if (!f) return std::nullopt;
  uint32_t magic = 0, version = 0;
  int32_t radius = 0;
  double tol = 0;
  uint64_t n = 0;
  f.read(reinterpret_cast<char*>(&magic), 4);
  f.read(reinterpret_cast<char*>(&version), 4);
  f.read(reinterpret_cast<char*>(&radius), 4);
  f.read(reinterpret_cast<char*>(&tol), 8);
  f.read(reinterpret_cast<char*>(&n), 8);
  if (!f || magic != kBallMagic || version != 1) return std::nullopt;
  if (radius != L || tol != dedup_tol) return std::nullopt;
  GroupBall ball;
  ball.radius = radius;
  ball.dedup_tol = tol;
  ball.elements.resize(n);
  for (auto& e : ball.elements) {
    double buf[4];
    uint64_t bits;
    uint8_t len;
    f.read(reinterpret_cast<char*>(buf), 32);
    f.read(reinterpret_cast<char*>(&bits), 8);
    f.read(reinterpret_cast<char*>(&len), 1);
    e.m = Mobius{cplx(buf[0], buf[1]), cplx(buf[2], buf[3])};
    e.word.bits = bits;
    e.word.len = len;
  }
  if (!f) return std::nullopt;
  return ball;
}

//--------------------------------------------------------------------------------------
// Dirichlet reduction: greedily apply the generator that most decreases the
// displacement from the origin.  Inside the domain no generator improves, because the
// octagon is the Dirichlet domain of these side pairings.

bool in_domain(cplx z, double tol) {
  const auto& gens = bolza_generators_mobius();
  double d = dist0(cplx(0, 0), z);
  for (const auto& g : gens) {
    // d0(z, g 0) < d0(z, 0) - tol means z is on the far side of a bisector
    if (dist0(z, g.apply(cplx(0, 0))) < d - tol) return false;
  }
  return true;
}

std::pair<cplx, Deck> reduce_local(cplx z, int iteration_cap) {
  const auto& gens = bolza_generators_mobius();
  std::vector<int> applied;  // in application order; deck letters are the reverse
  double cur = dist0(cplx(0, 0), z);
  for (int it = 0; it < iteration_cap; ++it) {
    int best = -1;
    cplx best_z;
    double best_d = cur - 1e-13;
    for (int k = 0; k < 8; ++k) {
      cplx cand = gens[k].apply(z);
      double d = dist0(cplx(0, 0), cand);
      if (d < best_d) {
        best_d = d;
        best = k;
        best_z = cand;
      }
    }
    if (best < 0) {
      Deck deck;
      for (auto it2 = applied.rbegin(); it2 != applied.rend(); ++it2) deck.push(*it2);
      return {z, deck};
    }
    z = best_z;
    cur = best_d;
    applied.push_back(best);
  }
  throw solver_error("reduce_to_domain: iteration cap hit (boundary pathology?)");
}

Mobius deck_matrix(const Deck& d) {
  const auto& gens = bolza_generators_mobius();
  Mobius m{};
  for (uint8_t k : d.ls) m = m * gens[k];
  return m;
}

std::pair<DiskPoint, Mobius> reduce_to_domain(DiskPoint z) {
  auto [zr, deck] = reduce_local(z.z);
  return {disk_point(zr), deck_matrix(deck)};
}

//--------------------------------------------------------------------------------------
// Conjugacy classes.
//
// Candidates: cyclically reduced words up to rotation (lexicographically minimal
// rotation).  Words that are conjugate only through relator moves give distinct
// candidates; these are merged by matrix conjugation with conjugators from a small
// ball, bucketed by translation length.

namespace {

// Lexicographically minimal rotation of w (letters compared as integers).
Word min_rotation(const Word& w) {
  int n = w.len;
  Word best = w;
  std::vector<int> ls = w.letters();
  for (int r = 1; r < n; ++r) {
    std::rotate(ls.begin(), ls.begin() + 1, ls.end());
    Word cand = Word::from_letters(ls);
    if (cand.bits < best.bits) best = cand;
  }
  return best;
}

bool cyclically_reduced(const Word& w) {
  return w.len == 0 || w.letter(0) != Word::inverse_letter(w.last());
}

bool is_proper_power(const Word& w) {
  int n = w.len;
  for (int p = 1; p <= n / 2; ++p) {
    if (n % p) continue;
    bool ok = true;
    for (int i = p; i < n && ok; ++i) ok = w.letter(i) == w.letter(i - p);
    if (ok) return true;
  }
  return false;
}

struct Candidate {
  Word word;
  Mobius m;
  double ell0;
};

// DFS over cyclically reduced words of length <= L; calls sink on each
// rotation-canonical survivor of the ell0 filter.  prune_radius > 0 additionally
// prunes prefixes whose orbit point leaves the displacement ball (valid for
// enumerating every class whose axis meets the Dirichlet domain, since prefix orbit
// points stay within ell + 2 * circumradius of the origin).
template <typename Sink>
void dfs_cyclic_words(int L, double ell0_max, double prune_radius, Sink&& sink) {
  const auto& gens = bolza_generators_mobius();
  std::vector<int> letters;
  letters.reserve(L);
  std::vector<Mobius> stack;
  stack.reserve(L + 1);
  stack.push_back(Mobius{});

  // Iterative DFS with explicit letter counters.
  std::vector<int> next_letter(L + 1, 0);
  int depth = 0;
  while (true) {
    if (next_letter[depth] >= 8) {
      if (depth == 0) break;
      --depth;
      letters.pop_back();
      stack.pop_back();
      ++next_letter[depth];
      continue;
    }
    int k = next_letter[depth];
    if (depth > 0 && Word::inverse_letter(letters.back()) == k) {
      ++next_letter[depth];
      continue;
    }
    // canonical-rotation cheap prune: first letter must be minimal in the word
    if (depth > 0 && k < letters[0]) {
      ++next_letter[depth];
      continue;
    }
    Mobius m = stack.back() * gens[k];
    if (prune_radius > 0 && m.displacement() > prune_radius) {
      ++next_letter[depth];
      continue;
    }
    letters.push_back(k);
    stack.push_back(m);
    ++depth;
    next_letter[depth] = 0;

    // visit current word
    int n = depth;
    if (n >= 1 && letters[0] != Word::inverse_letter(letters.back())) {
      double ell = stack.back().translation_length();
      if (ell > 1e-9 && (ell0_max <= 0 || ell <= ell0_max)) {
        Word w = Word::from_letters(letters);
        sink(w, stack.back(), ell);
      }
    }
    if (depth == L) {
      // force backtrack
      next_letter[depth] = 8;
    }
  }
}

}  // namespace

std::vector<double> min_length_per_word_length(int L_tail, double prune_radius) {
  std::vector<double> lambda(L_tail + 1, std::numeric_limits<double>::infinity());
  dfs_cyclic_words(L_tail, /*ell0_max=*/0.0, prune_radius,
                   [&](const Word& w, const Mobius&, double ell) {
                     if (ell < lambda[w.len]) lambda[w.len] = ell;
                   });
  return lambda;
}

std::vector<ConjClassRep> conjugacy_classes(int L, const ConjClassOptions& opts) {
  if (L < 1) throw config_error("conjugacy_classes: L must be >= 1");
  const auto& gens = bolza_generators_mobius();

  // 1. rotation-canonical candidates
  std::unordered_map<uint64_t, Candidate> cands;  // key: packed canonical word
  dfs_cyclic_words(L, opts.ell0_max, /*prune_radius=*/0.0,
                   [&](const Word& w, const Mobius& m, double ell) {
                     Word c = min_rotation(w);
                     uint64_t key = (uint64_t(c.len) << 58) | c.bits;
                     auto it = cands.find(key);
                     if (it == cands.end()) {
                       // recompute matrix of the canonical rotation for deterministic reps
                       Mobius cm{};
                       for (int l : c.letters()) cm = cm * gens[l];
                       cands.emplace(key, Candidate{c, cm.canonical_sign(), ell});
                     }
                   });

  std::vector<Candidate> list;
  list.reserve(cands.size());
  for (auto& [k, c] : cands) list.push_back(c);
  std::sort(list.begin(), list.end(),
            [](const Candidate& x, const Candidate& y) { return x.word < y.word; });

  // unoriented mode: identify w with the canonical rotation of w^{-1}
  if (!opts.oriented) {
    std::unordered_map<uint64_t, int> keep;
    std::vector<Candidate> merged;
    for (auto& c : list) {
      Word wi = min_rotation(c.word.inverse());
      uint64_t k1 = (uint64_t(c.word.len) << 58) | c.word.bits;
      uint64_t k2 = (uint64_t(wi.len) << 58) | wi.bits;
      uint64_t k = std::min(k1, k2);
      if (!keep.count(k)) {
        keep[k] = 1;
        merged.push_back(c);
      }
    }
    list = std::move(merged);
  }

  // 2. matrix-conjugacy merge within translation-length buckets
  auto run_merge = [&](int conj_radius, const std::vector<Candidate>& in,
                       std::vector<int>& parent) {
    GroupBall cball = enumerate_ball(conj_radius);
    // map every rotation (and, unoriented, every rotation of the inverse) to its index
    MobiusIndex index(1e-7);
    std::vector<int> owner;
    auto add_rots = [&](const Word& w, int id) {
      std::vector<int> ls = w.letters();
      for (int r = 0; r < w.len; ++r) {
        Mobius m{};
        for (int l : ls) m = m * gens[l];
        int slot = index.find(m);
        if (slot < 0) {
          index.insert(m);
          owner.push_back(id);
        }
        std::rotate(ls.begin(), ls.begin() + 1, ls.end());
      }
    };
    for (size_t i = 0; i < in.size(); ++i) {
      add_rots(in[i].word, int(i));
      if (!opts.oriented) add_rots(in[i].word.inverse(), int(i));
    }
    std::function<int(int)> find = [&](int i) {
      while (parent[i] != i) {
        parent[i] = parent[parent[i]];
        i = parent[i];
      }
      return i;
    };
    for (size_t i = 0; i < in.size(); ++i) {
      for (const auto& u : cball.elements) {
        Mobius c = u.m * in[i].m * u.m.inverse();
        int slot = index.find(c);
        if (slot < 0) continue;
        int j = owner[slot];
        int ri = find(int(i)), rj = find(j);
        if (ri != rj) parent[std::max(ri, rj)] = std::min(ri, rj);
      }
    }
  };

  std::vector<int> parent(list.size());
  for (size_t i = 0; i < parent.size(); ++i) parent[i] = int(i);
  run_merge(opts.conjugator_radius, list, parent);

  auto find_root = [&](int i) {
    while (parent[i] != i) {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  };

  if (opts.merge_stability_check) {
    std::vector<int> parent2(list.size());
    for (size_t i = 0; i < parent2.size(); ++i) parent2[i] = int(i);
    run_merge(opts.conjugator_radius + 1, list, parent2);
    auto count_roots = [](std::vector<int>& p) {
      int n = 0;
      for (size_t i = 0; i < p.size(); ++i) {
        int r = int(i);
        while (p[r] != r) r = p[r];
        if (r == int(i)) ++n;
      }
      return n;
    };
    if (count_roots(parent) != count_roots(parent2))
      throw solver_error("conjugacy merge unstable: enlarge conjugator_radius");
    parent = std::move(parent2);
  }

  std::vector<ConjClassRep> out;
  for (size_t i = 0; i < list.size(); ++i) {
    if (find_root(int(i)) != int(i)) continue;
    // representative: lexicographically least word in the merged group
    Word best = list[i].word;
    Mobius bm = list[i].m;
    for (size_t j = i + 1; j < list.size(); ++j)
      if (size_t(find_root(int(j))) == i && list[j].word < best) {
        best = list[j].word;
        bm = list[j].m;
      }
    out.push_back({best, bm, list[i].ell0, !is_proper_power(best)});
  }
  std::sort(out.begin(), out.end(),
            [](const ConjClassRep& x, const ConjClassRep& y) { return x.word < y.word; });
  return out;
}

}  // namespace geoflow
