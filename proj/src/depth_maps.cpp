#include "apollo/depth_maps.hpp"

#include "apollo/error.hpp"

#include <algorithm>

namespace apollo {

namespace {

void check_depths(int from_depth, int to_depth) {
    if (from_depth < 1 || from_depth > to_depth)
        throw InvalidArgument("layer map needs 1 <= L1 <= L2, got L1=" + std::to_string(from_depth) +
                              " L2=" + std::to_string(to_depth));
}

} // namespace

std::string to_string(MapKind kind) {
    switch (kind) {
    case MapKind::identity: return "identity";
    case MapKind::stack: return "stack";
    case MapKind::interpolation: return "interpolation";
    }
    return "?";
}

MapKind parse_map_kind(const std::string& text) {
    if (text == "identity") return MapKind::identity;
    if (text == "stack") return MapKind::stack;
    if (text == "interpolation" || text == "interp") return MapKind::interpolation;
    throw InvalidArgument("unknown map kind '" + text + "'");
}

LayerMap map_identity(int depth) {
    check_depths(depth, depth);
    LayerMap map{{}, depth, MapKind::identity};
    for (int l = 1; l <= depth; ++l) map.entries.push_back(l);
    return map;
}

LayerMap map_stack(int from_depth, int to_depth) {
    check_depths(from_depth, to_depth);
    LayerMap map{{}, from_depth, MapKind::stack};
    map.entries.reserve(static_cast<std::size_t>(to_depth));
    for (int l = 1; l <= to_depth; ++l) map.entries.push_back((l - 1) % from_depth + 1);
    return map;
}

LayerMap map_interpolation(int from_depth, int to_depth) {
    check_depths(from_depth, to_depth);
    LayerMap map{{}, from_depth, MapKind::interpolation};
    map.entries.reserve(static_cast<std::size_t>(to_depth));
    const long long l1 = from_depth, l2 = to_depth;
    for (long long l = 1; l <= l2; ++l) {
        // floor(l*L1/L2 + 1/2) in exact integer arithmetic
        const long long rounded = (2 * l * l1 + l2) / (2 * l2);
        map.entries.push_back(static_cast<int>(std::max(1LL, rounded)));
    }
    return map;
}

LayerMap make_map(MapKind kind, int from_depth, int to_depth) {
    switch (kind) {
    case MapKind::identity:
        if (from_depth != to_depth) throw InvalidArgument("identity map needs equal depths");
        return map_identity(from_depth);
    case MapKind::stack: return map_stack(from_depth, to_depth);
    case MapKind::interpolation: return map_interpolation(from_depth, to_depth);
    }
    throw InvalidArgument("unknown map kind");
}

} // namespace apollo
