#include "gdro/datagen.hpp"

#include <cmath>
#include <stdexcept>

#include "gdro/rng.hpp"

namespace gdro {

double mero_keep_probability(int group) {
  return 0.95 - static_cast<double>(group) / 160.0;
}

namespace {

enum Purpose : std::uint64_t { kDirection = 0, kTrain = 1, kTest = 2 };

std::uint64_t stream_seed(std::uint64_t seed, int group, Purpose purpose) {
  return SplitMix64::mix(SplitMix64::mix(seed, purpose), group);
}

std::vector<std::int64_t> resolve_sizes(const SynthSpec& spec) {
  if (spec.m < 1 || spec.dim < 1)
    throw std::invalid_argument("datagen: m and dim must be >= 1");
  if (spec.n_per_group.empty())
    throw std::invalid_argument("datagen: n_per_group must be set");
  std::vector<std::int64_t> n = spec.n_per_group;
  if (static_cast<int>(n.size()) == 1) n.assign(spec.m, n[0]);
  if (static_cast<int>(n.size()) != spec.m)
    throw std::invalid_argument("datagen: n_per_group length must be 1 or m");
  for (auto v : n)
    if (v < 1) throw std::invalid_argument("datagen: group sizes must be >= 1");
  return n;
}

Eigen::VectorXd draw_unit_sphere(SplitMix64& rng, int dim) {
  Eigen::VectorXd v(dim);
  for (int d = 0; d < dim; ++d) v[d] = rng.next_gaussian();
  double n = v.norm();
  if (n == 0.0) {
    v.setZero();
    v[0] = 1.0;
    return v;
  }
  return v / n;
}

void fill_group(const SynthSpec& spec, const Eigen::VectorXd& wstar,
                double flip_prob, std::uint64_t group_seed, std::int64_t n,
                FeatureMatrix& x, Eigen::VectorXi& y) {
  SplitMix64 rng(group_seed);
  x.resize(n, spec.dim);
  y.resize(n);
  for (std::int64_t j = 0; j < n; ++j) {
    for (int d = 0; d < spec.dim; ++d) x(j, d) = rng.next_gaussian();
    double u = rng.next_unit();
    int clean = x.row(j).dot(wstar) >= 0.0 ? 1 : -1;
    y[j] = u < flip_prob ? -clean : clean;
  }
}

GroupedDataset generate(const SynthSpec& spec, GroupedDataset* heldout) {
  auto sizes = resolve_sizes(spec);
  std::vector<double> flip(spec.m, spec.flip_prob);
  if (spec.kind == SynthSpec::Kind::mero) {
    for (int i = 0; i < spec.m; ++i) {
      double keep = mero_keep_probability(i);
      if (!(keep > 0.5))
        throw std::invalid_argument(
            "gen_mero: keep probability 0.95 - i/160 must stay above 1/2; "
            "m must be <= 72");
      flip[i] = 1.0 - keep;
    }
  } else {
    if (spec.flip_prob < 0.0 || spec.flip_prob > 1.0)
      throw std::invalid_argument("gen_gdro: flip_prob must lie in [0, 1]");
  }

  GroupedDataset ds;
  ds.dim = spec.dim;
  ds.label_kind = LabelKind::binary;
  ds.classes = 2;
  ds.features.resize(spec.m);
  ds.labels.resize(spec.m);
  if (heldout) {
    heldout->dim = spec.dim;
    heldout->label_kind = LabelKind::binary;
    heldout->classes = 2;
    heldout->features.resize(spec.m);
    heldout->labels.resize(spec.m);
  }

  for (int i = 0; i < spec.m; ++i) {
    SplitMix64 wrng(stream_seed(spec.seed, i, kDirection));
    Eigen::VectorXd wstar = draw_unit_sphere(wrng, spec.dim);
    fill_group(spec, wstar, flip[i], stream_seed(spec.seed, i, kTrain),
               sizes[i], ds.features[i], ds.labels[i]);
    if (heldout)
      fill_group(spec, wstar, flip[i], stream_seed(spec.seed, i, kTest),
                 sizes[i], heldout->features[i], heldout->labels[i]);
  }
  ds.validate();
  if (heldout) heldout->validate();
  return ds;
}

}  // namespace

Eigen::VectorXd planted_direction(const SynthSpec& spec, int group) {
  if (group < 0 || group >= spec.m)
    throw std::out_of_range("planted_direction: group out of range");
  SplitMix64 rng(stream_seed(spec.seed, group, kDirection));
  return draw_unit_sphere(rng, spec.dim);
}

GroupedDataset gen_gdro(const SynthSpec& spec, GroupedDataset* heldout) {
  if (spec.kind != SynthSpec::Kind::gdro)
    throw std::invalid_argument("gen_gdro: spec.kind must be gdro");
  return generate(spec, heldout);
}

GroupedDataset gen_mero(const SynthSpec& spec, GroupedDataset* heldout) {
  if (spec.kind != SynthSpec::Kind::mero)
    throw std::invalid_argument("gen_mero: spec.kind must be mero");
  return generate(spec, heldout);
}

}  // namespace gdro
