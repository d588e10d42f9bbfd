// geoflow - Bolza surface group: generators, ball enumeration, Dirichlet domain,
// conjugacy classes
#pragma once

#include <array>
#include <optional>
#include <unordered_map>

#include "geoflow/common.hpp"

namespace geoflow {

// Octagon constants for the Bolza surface (regular octagon, vertex angle pi/4).
namespace bolza {
inline const double kCoshHalfSys = 1.0 + std::sqrt(2.0);              // cosh(l_sys/2)
inline const double kSystole = 2.0 * std::acosh(kCoshHalfSys);        // 2 arccosh(1+sqrt 2)
inline const double kInRadius = std::acosh(1.0 + std::sqrt(2.0));     // cosh r = cot(pi/8)
inline const double kCircumRadius = std::acosh(3.0 + 2.0 * std::sqrt(2.0));
}  // namespace bolza

struct IsometryElement {
  Mobius m;
  Word word;
};

// The 8 side-pairing translations of the regular octagon; letter k translates along
// direction k*pi/4 with cosh(l/2) = 1 + sqrt(2), and letter k+4 is its inverse.
const std::array<Mobius, 8>& bolza_generators_mobius();
std::vector<IsometryElement> bolza_generators();

// Relator letters: a b^-1 c d^-1 a^-1 b c^-1 d evaluates to +-identity.
Word bolza_relator();

DiskPoint apply(const Mobius& m, DiskPoint z);

//--------------------------------------------------------------------------------------

struct GroupBall {
  int radius = 0;
  double dedup_tol = 1e-8;
  std::vector<IsometryElement> elements;  // canonical order: (word length, packed bits)

  const IsometryElement* find(const Mobius& m) const;  // nullptr if absent
};

// All distinct group elements with reduced word length <= L (matrix dedup at tol).
// Throws resource_error when L exceeds max_radius.
GroupBall enumerate_ball(int L, int max_radius = 12, double dedup_tol = 1e-8);

// Binary cache (versioned, keyed by radius and tolerance inside the file).
void save_ball(const GroupBall& ball, const std::string& path);
std::optional<GroupBall> load_ball(const std::string& path, int L, double dedup_tol);

//--------------------------------------------------------------------------------------

// Dirichlet-domain reduction about the origin.  Returns (z', gamma) with z' = gamma z
// and d0(z', 0) <= d0(z', g 0) + 1e-9 for every generator g.
std::pair<DiskPoint, Mobius> reduce_to_domain(DiskPoint z);

// Same computation at the letter level: the returned deck d satisfies
// matrix(d) z = z' with z' in the domain.  Generators are applied to the point one
// letter at a time, so no large matrix magnitudes ever arise.
std::pair<cplx, Deck> reduce_local(cplx z, int iteration_cap = 4096);

// Matrix of a deck word (product of generator matrices, left to right).
Mobius deck_matrix(const Deck& d);

// True if z satisfies the Dirichlet inequalities at slack `tol`.
bool in_domain(cplx z, double tol = 1e-9);

//--------------------------------------------------------------------------------------

struct ConjClassRep {
  Word word;        // lexicographically minimal cyclic representative
  Mobius m;         // matrix of that representative
  double ell0;      // background translation length 2 arccosh(|tr|/2)
  bool primitive;   // word is not a proper power of a shorter cyclic word
};

struct ConjClassOptions {
  bool oriented = true;        // if false, a class and its inverse are identified
  double ell0_max = 0.0;       // keep only classes with ell0 <= ell0_max (0 = keep all)
  int conjugator_radius = 3;   // ball used for matrix conjugacy merging
  bool merge_stability_check = true;  // verify radius+1 produces no further merges
};

// One representative per free-homotopy class with a cyclically reduced word of
// length <= L.  Candidates come from cyclic words up to rotation; distinct cyclic
// words conjugate through relator moves are merged by matrix conjugation.
std::vector<ConjClassRep> conjugacy_classes(int L, const ConjClassOptions& opts = {});

// Minimum background translation length among classes of cyclic word length exactly n,
// for n in [1, L_tail], using a displacement-pruned word search. Used by the counting
// exhaustiveness certificate.  Entries are +inf when no class of that length exists
// below the prune radius.
std::vector<double> min_length_per_word_length(int L_tail, double prune_radius);

}  // namespace geoflow
