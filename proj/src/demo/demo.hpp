#pragma once

#include <cstdint>

#include "model/catalog.hpp"
#include "storage/store.hpp"

namespace modeladapt::demo {

/// The sequencing-study catalog used by `modeladapt demo` and the test suites.
const char* catalog_text() noexcept;
Catalog catalog();

/// Loads a deterministic data set of a few hundred rows into an empty store.
/// Rows carry explicit creation times so RCT and RMT are reproducible.
void populate(Store& store, std::uint32_t seed = 1);

}  // namespace modeladapt::demo
