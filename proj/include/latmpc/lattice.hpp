#pragma once

#include <string>
#include <vector>

#include "latmpc/common.hpp"
#include "latmpc/sampler.hpp"

namespace latmpc {

enum class LatticeKind { disjunctive, conjunctive };

const char* to_string(LatticeKind kind);
LatticeKind lattice_kind_from_string(const std::string& s);

/// Disjunctive: max_i min_{j in term_i} u_j(x).  Conjunctive: min_i max_{j in term_i} u_j(x).
class LatticeForm {
 public:
  LatticeForm() = default;
  LatticeForm(LatticeKind kind, std::vector<AffineLaw> literals, std::vector<IndexList> terms,
              std::vector<int> anchors = {});

  LatticeKind kind() const { return kind_; }
  const std::vector<AffineLaw>& literals() const { return literals_; }
  const std::vector<IndexList>& terms() const { return terms_; }
  /// Sample index each term was built from, or -1.
  const std::vector<int>& anchors() const { return anchors_; }
  int n_x() const { return static_cast<int>(coeffs_.cols()); }
  int num_literals() const { return static_cast<int>(literals_.size()); }
  int num_terms() const { return static_cast<int>(terms_.size()); }

  /// Inner loops stop once a term can no longer change the outer extremum.
  double evaluate(const Vector& x) const;
  /// Same, with literal values already computed.
  double evaluate_values(const Vector& literal_values) const;
  Vector literal_values(const Vector& x) const { return coeffs_ * x + offsets_; }

 private:
  LatticeKind kind_ = LatticeKind::disjunctive;
  std::vector<AffineLaw> literals_;
  std::vector<IndexList> terms_;
  std::vector<int> anchors_;
  Matrix coeffs_;
  Vector offsets_;
};

struct StorageStats {
  int M = 0;
  int N_terms = 0;
  int reals = 0;
  int integers = 0;
  int total_params = 0;
};

/// Term of sample point `own_law` with literal values `values` at that point:
/// the own literal plus those strictly above (disjunctive) or below
/// (conjunctive) by more than the tie tolerance.
IndexList lattice_term(const Eigen::Ref<const Vector>& values, int own_law, LatticeKind kind);

/// One term per sample point, duplicates collapsed. The point's own literal is
/// always in its term; another literal enters when it is strictly above
/// (disjunctive) or below (conjunctive) by more than the tie tolerance.
LatticeForm build_lattice(const SampleDataset& ds, LatticeKind kind);

/// Absorption: drops duplicate terms and terms whose set contains another
/// term's set. Output terms sorted by size, then lexicographically.
LatticeForm simplify(const LatticeForm& form);

/// Drops from each term the literals that can never attain the term's extremum
/// on the box (another literal of the term lies below, for min terms, or above,
/// for max terms, everywhere on it), then re-applies simplify. Equivalent to
/// the input on the box only.
LatticeForm prune_dominated(const LatticeForm& form, const Box& domain);

double evaluate(const LatticeForm& form, const Vector& x);

StorageStats storage_stats(const LatticeForm& form);

}  // namespace latmpc
