#pragma once

#include <string>
#include <vector>

namespace dynamoe {

enum class ScheduleKind {
  Uniform,
  Descending,
  Ascending,
  PyramidUp,
  PyramidDown,
  WaveDown,
  WaveUp,
};

std::string to_string(ScheduleKind kind);
ScheduleKind schedule_kind_from_string(const std::string& name);
const std::vector<ScheduleKind>& all_schedule_kinds();

/// Closed-form schedule parameters: kind plus expert-count range and depth.
struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::Uniform;
  int n_max = 8;
  int n_min = 1;
  int layers = 4;

  void validate() const;
};

/// Raw (unrounded) schedule value at depth position t in [0, 1].
/// Uniform returns n_max everywhere; wave_up(t) = wave_down(1 - t).
double schedule_value(ScheduleKind kind, double t, int n_max, int n_min);

/// Per-layer expert counts: t = (l-1)/(L-1) for layer l in {1..L}
/// (t = 0 when L = 1), rounded half-up and clamped to [n_min, n_max].
std::vector<int> layer_expert_counts(const ScheduleSpec& spec);

}  // namespace dynamoe
