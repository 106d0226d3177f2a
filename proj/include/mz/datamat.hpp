#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mz/config.hpp"
#include "mz/types.hpp"

namespace mz {

// Maps a full state to the resolved observation vector.
struct ObservableDict {
  enum class Kind { Monomials, RawComponents, CoarseGrid } kind = Kind::RawComponents;
  int max_degree = 1;            // Monomials: powers of component 0
  bool include_constant = true;  // Monomials: prepend the constant 1
  std::vector<Index> indices;    // RawComponents
  Index factor = 1;              // CoarseGrid subsampling stride
  Index offset = 0;              // CoarseGrid sub-grid offset

  static ObservableDict monomials(int max_degree, bool include_constant = true);
  static ObservableDict raw_components(std::vector<Index> indices);
  static ObservableDict coarse_grid(Index factor, Index offset = 0);

  Index out_dim(Index state_dim) const;
  std::vector<std::string> names(Index state_dim) const;
  Vec apply(const Vec& state) const;
};

// Subsample one snapshot at every `factor`-th grid point starting at `offset`.
Vec coarse_grain(const Vec& snapshot, Index factor, Index offset);

struct AugmentationSpec {
  bool shift = false;    // all sub-grid offsets, multiplies N by factor
  bool reorder = false;  // all cyclic channel rotations, multiplies N by M
};

// Snapshot tensor, logically N samples x M observables x K times.
// Ensemble data stores K time slices of shape N x M. Ergodic data stores the
// base series (equal length S, M columns each); sample i is the stride-1
// window of length K starting at row i, so N = n_series * (S - K + 1) without
// materializing the windows.
class DataMatrix {
 public:
  enum class Provenance { Ensemble, Ergodic };

  static DataMatrix ensemble(std::vector<Mat> slices, double delta,
                             std::vector<std::string> names);
  static DataMatrix ergodic(std::vector<Mat> series, Index window_len,
                            double delta, std::vector<std::string> names);

  Provenance provenance() const { return provenance_; }
  bool is_ergodic() const { return provenance_ == Provenance::Ergodic; }
  Index n() const;
  Index m() const;
  Index k() const;
  double delta() const { return delta_; }
  const std::vector<std::string>& observable_names() const { return names_; }

  double value(Index i, Index j, Index k) const;
  Mat slice(Index k) const;  // N x M snapshot matrix at time index k

  const std::vector<Mat>& series() const;  // ergodic base series
  Index n_series() const;
  Index series_len() const;
  Index windows_per_series() const;

  // Full-resolution backing for coarse-grid data; required by augment().
  void attach_full_grid(std::shared_ptr<const Mat> full_series, Index factor,
                        Index offset);
  bool has_full_grid() const { return full_series_ != nullptr; }
  const std::shared_ptr<const Mat>& full_grid() const { return full_series_; }
  Index full_factor() const { return full_factor_; }
  Index full_offset() const { return full_offset_; }

  // Binary tensor file plus a structured-text sidecar at path + ".meta".
  // Ergodic matrices store the compact base series tensor; the windowed view
  // is reconstructed from window_len in the sidecar on load.
  void save(const std::string& path, const Config& extra_meta = Config()) const;
  static DataMatrix load(const std::string& path, Config* meta_out = nullptr);

 private:
  Provenance provenance_ = Provenance::Ensemble;
  double delta_ = 1.0;
  std::vector<std::string> names_;
  std::vector<Mat> slices_;   // ensemble: K of N x M
  std::vector<Mat> series_;   // ergodic: each S x M
  Index window_len_ = 0;      // ergodic K
  std::shared_ptr<const Mat> full_series_;
  Index full_factor_ = 1;
  Index full_offset_ = 0;
};

// Ensemble matrix from N trajectories of equal length.
DataMatrix build_data_matrix(const std::vector<std::vector<Vec>>& trajectories,
                             const ObservableDict& dict, double delta);

// Ergodic matrix from one long snapshot series with stride-1 windows.
DataMatrix build_data_matrix_ergodic(const std::vector<Vec>& series,
                                     const ObservableDict& dict, double delta,
                                     Index window_len);

// Coarse ergodic matrix derived from a single-series full-grid ergodic
// matrix, with the full-resolution series attached for augment().
DataMatrix coarsen_ks(const DataMatrix& full, Index factor, Index offset = 0);

// Sub-grid shifting and cyclic channel reordering for coarse-grid data.
DataMatrix augment(const DataMatrix& d, const AugmentationSpec& spec);

// Stack the E most recent snapshots into the observable axis, newest block
// first: M' = M*E, K' = K - E + 1.
DataMatrix delay_embed(const DataMatrix& d, Index E);

}  // namespace mz
