#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace lm::train {

// Per-environment terrain difficulty plus the shared tolerance-schedule
// position. Levels only advance on a successful traversal and never leave
// [1, 64].
struct CurriculumState {
  std::vector<int> levels;          // per environment
  std::vector<int> traversals;      // successful traversal count per env
  int tolerance_iteration = 0;

  explicit CurriculumState(int num_envs = 0, int start_level = 1)
      : levels(num_envs, start_level), traversals(num_envs, 0) {}
};

struct EpisodeResult {
  int env_index = 0;
  int level = 1;
  bool traversed = false;
};

inline void curriculum_update(CurriculumState& state,
                              const std::vector<EpisodeResult>& results) {
  for (const auto& r : results) {
    if (r.env_index < 0 ||
        r.env_index >= static_cast<int>(state.levels.size())) {
      throw std::invalid_argument("curriculum_update: bad env index");
    }
    if (r.traversed) {
      state.levels[r.env_index] =
          std::min(64, std::max(1, state.levels[r.env_index]) + 1);
      ++state.traversals[r.env_index];
    }
  }
}

inline void curriculum_advance_iteration(CurriculumState& state) {
  ++state.tolerance_iteration;
}

}  // namespace lm::train
