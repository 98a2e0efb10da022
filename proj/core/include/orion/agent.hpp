#pragma once

#include <optional>
#include <set>

namespace orion {

enum class Stage { PreArrival = 0, PostArrival = 1 };
enum class Option : int { Navigate = 0, Cooperate = 1 };

constexpr int kOptionCount = 2;

inline Option other_option(Option z) {
  return z == Option::Navigate ? Option::Cooperate : Option::Navigate;
}

struct AgentState {
  int id = 0;
  int node = -1;    // current node id
  int target = -1;  // target node id
  Stage stage = Stage::PreArrival;
  Option option = Option::Navigate;
  double distance_traveled = 0.0;
  std::optional<int> arrived_step;
  std::set<int> visit_history;  // node ids this agent has occupied
};

}  // namespace orion
