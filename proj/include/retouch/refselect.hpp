#pragma once

#include <vector>

#include "retouch/colorlab.hpp"
#include "retouch/parallel.hpp"

namespace retouch {

/// Symmetric chi-square distance matrix; M[i][i] = 0.
std::vector<std::vector<double>> pairwise_distances(const std::vector<ColorToneFeature>& feats,
                                                    Exec exec = Exec::Serial);

/// Greedy diverse-and-representative subset selection over a distance matrix.
/// The first pick is the medoid (smallest mean distance to all others). Each
/// later step scores every remaining candidate c by
///   D_ref(c)   = mean distance to the already selected set,
///   D_query(c) = mean distance to the other remaining candidates
///                (0 when c is the only one left),
/// ranks D_ref descending and D_query ascending with 1-based competition
/// ranking (ties share the best rank of the group), and picks the candidate
/// minimizing the mean of the two ranks; ties go to the lowest index.
/// Returns k 0-based indices in selection order, so any prefix is itself a
/// valid smaller selection.
std::vector<int> select_references(const std::vector<std::vector<double>>& dist, int k);

std::vector<int> select_references(const std::vector<ColorToneFeature>& feats, int k,
                                   Exec exec = Exec::Serial);

}  // namespace retouch
