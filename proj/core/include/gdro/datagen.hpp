#pragma once

#include <cstdint>
#include <vector>

#include "gdro/dataset.hpp"

namespace gdro {

// Synthetic binary-classification generators. Per group i: a planted
// direction w_i* drawn uniformly from the unit sphere, features x ~ N(0, I),
// and y = sign(x . w_i*) kept with some probability and flipped otherwise.
//
// Streams are derived per (seed, group, purpose) so changing one group's
// size, or asking for a held-out set, never reshuffles anything else. Draw
// order inside a group: dim gaussians for w_i* on its own stream; then per
// sample dim gaussians for x followed by one uniform for the flip.
struct SynthSpec {
  enum class Kind { gdro, mero };
  Kind kind = Kind::gdro;
  int m = 1;
  int dim = 1;
  std::vector<std::int64_t> n_per_group;  // single entry broadcasts to all
  std::uint64_t seed = 0;
  double flip_prob = 0.1;  // gdro only; mero derives per-group noise
};

// Homogeneous label noise: flip with spec.flip_prob.
GroupedDataset gen_gdro(const SynthSpec& spec,
                        GroupedDataset* heldout = nullptr);

// Heterogeneous label noise: group i keeps the clean label with probability
// 0.95 - i/160 (0-indexed), which stays above 1/2 only for m <= 72; larger m
// throws.
GroupedDataset gen_mero(const SynthSpec& spec,
                        GroupedDataset* heldout = nullptr);

double mero_keep_probability(int group);

// The planted unit direction of one group, as drawn by the generators.
Eigen::VectorXd planted_direction(const SynthSpec& spec, int group);

}  // namespace gdro
