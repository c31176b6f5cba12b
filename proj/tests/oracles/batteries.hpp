#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace topoterm::oracle {

struct BatteryResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

BatteryResult persistence_battery(std::uint64_t seed, std::size_t cases = 1000);
BatteryResult square_triangle_battery();
BatteryResult mst_battery(std::uint64_t seed, std::size_t cases = 500);
BatteryResult wasserstein_battery(std::uint64_t seed, std::size_t cases = 500);
BatteryResult image_battery(std::uint64_t seed, std::size_t single = 100, std::size_t multi = 50);
BatteryResult codensity_battery(std::uint64_t seed, std::size_t cases = 100);
BatteryResult matcher_battery(std::uint64_t seed, std::size_t layouts = 1000);

// Every battery above with default sizes.
std::vector<BatteryResult> run_all_batteries(std::uint64_t seed);

}  // namespace topoterm::oracle
