#pragma once

#include <cstdint>
#include <vector>

#include "tgs/event.hpp"

namespace tgs {

struct RandomLogOptions {
  std::size_t events = 1000;
  // Ids ever created; ids are never reused after deletion.
  std::size_t max_nodes = 100;
  std::uint64_t seed = 1;
  Time start = 1;
  // Chance that an event shares the previous event's time.
  double same_time = 0.2;
  std::size_t attr_keys = 3;
  std::size_t attr_values = 4;
};

// Valid log using all eight event kinds.
std::vector<Event> random_log(const RandomLogOptions& opts);

struct PlantedPartitionOptions {
  std::size_t communities = 8;
  std::size_t community_size = 100;
  double p_in = 0.1;
  double p_out = 0.002;
  std::uint64_t seed = 1;
  Time start = 1;
};

// Nodes 0..n-1, community of node i is i / community_size. All nodes are
// added at `start`, then each edge at its own time step.
std::vector<Event> planted_partition_log(const PlantedPartitionOptions& opts);

}  // namespace tgs
