#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "migsim/mig_core.hpp"

namespace migsim {

using VmId = std::uint64_t;

struct VmRequest {
  VmId id = 0;
  ProfileId profile = ProfileId::k1g5gb;
  double arrival = 0.0;   // seconds
  double duration = 0.0;  // seconds
  double weight = 1.0;            // a_i
  double migration_weight = 0.0;  // delta_i, 0 at arrival
  std::optional<double> cpu;
  std::optional<double> ram;
  std::string source;  // originating pod id, if any
};

}  // namespace migsim
