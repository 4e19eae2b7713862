#pragma once

#include "apollo/depth_maps.hpp"
#include "apollo/model.hpp"

namespace apollo {

// Grows the bank to `new_slots` slots; slot n becomes a deep copy (weights and
// AdamW moments) of old slot g(n), g = make_map(kind, old N, new_slots).
// Embeddings and the final norm carry over unchanged. Shrinking is rejected.
WeightBank expand_bank(WeightBank bank, int new_slots, MapKind kind = MapKind::interpolation);

} // namespace apollo
