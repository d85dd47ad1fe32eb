#pragma once

#include <string>
#include <vector>

#include "foresttrav/eval.hpp"

namespace foresttrav {

// CSV: t,mcc,f1,coverage — metric fields empty for snapshots without them.
void write_temporal_csv(const std::vector<TemporalPoint>& points,
                        const std::string& path);
std::vector<TemporalPoint> load_temporal_csv(const std::string& path);

// CSV: fold,mcc,f1
struct FoldMetrics {
  int fold = 0;
  double mcc = 0.0;
  double f1 = 0.0;
};
void write_kfold_csv(const std::vector<FoldMetrics>& folds,
                     const std::string& path);

// CSV: bin_lo,bin_hi,mcc,count
void write_density_csv(const std::vector<DensityBin>& bins,
                       const std::string& path);

// Per-voxel traversability estimates. CSV with a leading "resolution,<r>"
// line, an "x,y,z,probability" header, and rows in sorted key order so equal
// maps serialize identically.
struct TeMap {
  double resolution = 0.1;
  ProbabilityMap probabilities;
};
void save_te_map(const TeMap& te, const std::string& path);
TeMap load_te_map(const std::string& path);

// ASCII PLY point cloud of voxel centers, colored green for traversable and
// red for not, blended by the probability.
void write_te_ply(const TeMap& te, const std::string& path);

// ASCII PGM (P2): traversable 255, non-traversable 0, unindexed 128.
// Rows run from max y down to min y so the image keeps map orientation.
void write_grid_pgm(const std::map<ColumnKey, TravLabel>& grid,
                    const std::string& path);

// CSV: x,y,state with state in {TR, NT}.
void write_grid_csv(const std::map<ColumnKey, TravLabel>& grid,
                    const std::string& path);

}  // namespace foresttrav
