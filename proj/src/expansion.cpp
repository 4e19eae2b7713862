#include "apollo/expansion.hpp"

#include "apollo/error.hpp"

namespace apollo {

namespace {

void rename_slot(LayerWeights& w, int index) {
    const std::string prefix = "slot" + std::to_string(index) + ".";
    for (Parameter* p : w.parameters()) {
        const auto dot = p->name.find('.');
        p->name = prefix + (dot == std::string::npos ? p->name : p->name.substr(dot + 1));
    }
}

} // namespace

WeightBank expand_bank(WeightBank bank, int new_slots, MapKind kind) {
    const int old_slots = bank.n_slots();
    if (new_slots < old_slots)
        throw InvalidArgument("cannot shrink bank from " + std::to_string(old_slots) + " to " + std::to_string(new_slots) +
                              " slots");
    if (new_slots > bank.config.depth)
        throw InvalidArgument("bank of " + std::to_string(new_slots) + " slots exceeds model depth " +
                              std::to_string(bank.config.depth));
    if (new_slots == old_slots) return bank;
    const LayerMap map = make_map(kind, old_slots, new_slots);
    std::vector<LayerWeights> grown;
    grown.reserve(static_cast<std::size_t>(new_slots));
    for (std::size_t n = 0; n < map.depth(); ++n) {
        grown.push_back(bank.slots[map.slot(n)]);
        rename_slot(grown.back(), static_cast<int>(n));
    }
    bank.slots = std::move(grown);
    bank.grads_ready = false;
    return bank;
}

} // namespace apollo
