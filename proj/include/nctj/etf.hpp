#pragma once

#include <cstdint>

#include "nctj/linalg.hpp"
#include "nctj/model.hpp"
#include "nctj/rng.hpp"

namespace nctj::etf {

// Random simplex equiangular tight frame head:
//   W = ( sqrt(K/(K-1)) * P * (I - (1/K) 11^T) )^T, stored K x m.
// Rows are unit norm with pairwise cosine -1/(K-1), and
// W W^T = (K/(K-1)) (I - 11^T/K).
struct EtfHead {
  int num_classes = 0;   // K
  int feature_dim = 0;   // m, must be >= K
  la::MatD p;            // m x K, orthonormal columns
  la::MatD w;            // K x m classifier rows
  uint64_t seed = 0;     // master seed of the stream that generated P
};

// QR of an m x K standard-Gaussian matrix with the R-diagonal sign fixed
// positive, so (m, K, stream) determines P exactly.
la::MatD random_partial_orthogonal(int feature_dim, int num_classes, RngStream& rng);

// Deterministic part of the construction, usable with any orthonormal P.
EtfHead etf_from_partial_orthogonal(la::MatD p, int num_classes);

EtfHead construct_etf(int num_classes, int feature_dim, RngStream& rng);

// Largest deviation from the three defining properties (row norm, pairwise
// cosine, gram matrix); used by invariant checks and the `etf` subcommand.
double max_etf_deviation(const EtfHead& head);

// Returns a copy of the model with head weights overwritten by W (frozen)
// and head bias zeroed (frozen). Feature parameters are untouched.
train::Model install_and_freeze(train::Model model, const EtfHead& head);

}  // namespace nctj::etf
