#pragma once

#include <string>
#include <vector>

namespace apollo {

enum class MapKind { identity, stack, interpolation };

std::string to_string(MapKind kind);
MapKind parse_map_kind(const std::string& text);

// Assignment of a bank slot to every virtual layer. Entries are 1-based slot
// indices in [1, source_depth]; entries.size() is the virtual depth.
struct LayerMap {
    std::vector<int> entries;
    int source_depth = 0;
    MapKind kind = MapKind::identity;

    std::size_t depth() const { return entries.size(); }
    // 0-based slot used by 0-based virtual layer `layer`.
    std::size_t slot(std::size_t layer) const { return static_cast<std::size_t>(entries[layer] - 1); }

    bool operator==(const LayerMap&) const = default;
};

LayerMap map_identity(int depth);

// Periodic tiling: entry l2 = ((l2 - 1) mod L1) + 1.
LayerMap map_stack(int from_depth, int to_depth);

// Neighbour duplication: entry l2 = max(1, round_half_up(l2 * L1 / L2)).
LayerMap map_interpolation(int from_depth, int to_depth);

LayerMap make_map(MapKind kind, int from_depth, int to_depth);

} // namespace apollo
