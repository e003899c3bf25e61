#pragma once

#include <cstdint>
#include <string>

#include "hpr/image.hpp"
#include "hpr/priors.hpp"

namespace hpr {

enum class SyntheticKind { gmm_texture, blobs, checker };

SyntheticKind parse_synthetic_kind(const std::string& name);
std::string to_string(SyntheticKind kind);

/// Ground-truth generators on [0, 1]. gmm-texture draws pixels i.i.d. from
/// `prior` so score-prior runs see a matched prior.
ImageGrid make_synthetic(SyntheticKind kind, std::size_t n, std::uint64_t seed,
                         const GmmPrior& prior = GmmPrior::default_test_prior());

}  // namespace hpr
