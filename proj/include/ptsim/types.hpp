#pragma once

#include <cstdint>

namespace ptsim {

using Cost = std::uint64_t;     // abstract simulated cost units
using Vaddr = std::uint64_t;    // virtual byte address
using Vpn = std::uint64_t;      // virtual page number (vaddr >> offset_bits)
using FrameId = std::uint64_t;  // physical frame handle
using NodeId = std::int32_t;    // NUMA socket
using CoreId = std::int32_t;    // hardware thread, dense across sockets
using ThreadId = std::int32_t;  // simulated software thread
using ProcId = std::int32_t;

inline constexpr NodeId kNoNode = -1;
inline constexpr CoreId kNoCore = -1;

}  // namespace ptsim
