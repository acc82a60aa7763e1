#include "dynamoe/schedules.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dynamoe {

std::string to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::Uniform: return "uniform";
    case ScheduleKind::Descending: return "descending";
    case ScheduleKind::Ascending: return "ascending";
    case ScheduleKind::PyramidUp: return "pyramid_up";
    case ScheduleKind::PyramidDown: return "pyramid_down";
    case ScheduleKind::WaveDown: return "wave_down";
    case ScheduleKind::WaveUp: return "wave_up";
  }
  throw std::logic_error("unreachable schedule kind");
}

ScheduleKind schedule_kind_from_string(const std::string& name) {
  for (ScheduleKind k : all_schedule_kinds()) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown schedule kind: '" + name + "'");
}

const std::vector<ScheduleKind>& all_schedule_kinds() {
  static const std::vector<ScheduleKind> kinds = {
      ScheduleKind::Uniform,     ScheduleKind::Descending,
      ScheduleKind::Ascending,   ScheduleKind::PyramidUp,
      ScheduleKind::PyramidDown, ScheduleKind::WaveDown,
      ScheduleKind::WaveUp,
  };
  return kinds;
}

void ScheduleSpec::validate() const {
  if (n_min < 1 || n_min > n_max) {
    throw std::invalid_argument("schedule requires 1 <= n_min <= n_max");
  }
  if (layers < 1) {
    throw std::invalid_argument("schedule requires layers >= 1");
  }
}

namespace {

double wave_down_value(double t, double n_max, double n_min) {
  const double span = n_max - n_min;
  const double alpha = n_min + 0.3 * span;
  const double beta = n_min + 0.6 * span;
  if (t <= 1.0 / 3.0) {
    return n_max - 3.0 * t * (n_max - alpha);
  }
  if (t <= 2.0 / 3.0) {
    return alpha + 3.0 * (t - 1.0 / 3.0) * (beta - alpha);
  }
  return beta - 3.0 * (t - 2.0 / 3.0) * (beta - n_min);
}

}  // namespace

double schedule_value(ScheduleKind kind, double t, int n_max, int n_min) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw std::domain_error("schedule position t must lie in [0, 1]");
  }
  if (n_min > n_max) {
    throw std::domain_error("schedule requires n_min <= n_max");
  }
  const double hi = static_cast<double>(n_max);
  const double lo = static_cast<double>(n_min);
  const double span = hi - lo;
  switch (kind) {
    case ScheduleKind::Uniform:
      return hi;
    case ScheduleKind::Descending:
      return hi - t * span;
    case ScheduleKind::Ascending:
      return lo + t * span;
    case ScheduleKind::PyramidUp:
      return t <= 0.5 ? lo + 2.0 * t * span : hi - 2.0 * (t - 0.5) * span;
    case ScheduleKind::PyramidDown:
      return t <= 0.5 ? hi - 2.0 * t * span : lo + 2.0 * (t - 0.5) * span;
    case ScheduleKind::WaveDown:
      return wave_down_value(t, hi, lo);
    case ScheduleKind::WaveUp:
      return wave_down_value(1.0 - t, hi, lo);
  }
  throw std::logic_error("unreachable schedule kind");
}

std::vector<int> layer_expert_counts(const ScheduleSpec& spec) {
  spec.validate();
  std::vector<int> counts(static_cast<size_t>(spec.layers));
  for (int l = 0; l < spec.layers; ++l) {
    const double t =
        spec.layers == 1 ? 0.0
                         : static_cast<double>(l) / static_cast<double>(spec.layers - 1);
    const double raw = schedule_value(spec.kind, t, spec.n_max, spec.n_min);
    // round half up
    int value = static_cast<int>(std::floor(raw + 0.5));
    value = std::clamp(value, spec.n_min, spec.n_max);
    counts[static_cast<size_t>(l)] = value;
  }
  return counts;
}

}  // namespace dynamoe
