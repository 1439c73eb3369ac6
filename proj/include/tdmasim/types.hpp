#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace tdmasim {

using NodeId = int;          // dense 0..n-1
using SlotId = int;          // 1..S; 0 means "none"/"unknown"
using Tick = std::int64_t;   // virtual time in slot units

inline constexpr NodeId kNoNode = -1;
inline constexpr SlotId kNoSlot = 0;

enum class TxMode { Broadcast, Unicast };

inline std::string to_string(TxMode m) {
    return m == TxMode::Broadcast ? "broadcast" : "unicast";
}

inline TxMode tx_mode_from_string(const std::string& s) {
    if (s == "broadcast") return TxMode::Broadcast;
    if (s == "unicast") return TxMode::Unicast;
    throw std::invalid_argument("unknown transmission mode: " + s);
}

// Node -> slot assignment. Slots are 1-based; length (SL) is the largest assigned slot.
struct Schedule {
    std::vector<SlotId> slot;  // indexed by NodeId

    Schedule() = default;
    explicit Schedule(std::size_t n) : slot(n, kNoSlot) {}

    int n() const { return static_cast<int>(slot.size()); }

    bool complete() const {
        for (SlotId s : slot)
            if (s <= 0) return false;
        return true;
    }

    SlotId length() const {
        SlotId sl = 0;
        for (SlotId s : slot)
            if (s > sl) sl = s;
        return sl;
    }
};

// Fatal simulation/protocol error (event in the past, broken invariant, bad input).
class SimError : public std::runtime_error {
public:
    explicit SimError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace tdmasim
