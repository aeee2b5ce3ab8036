#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "cpt/error.hpp"

namespace cpt {

// Competence schedule: how much of the hardest augmentation the model is
// deemed ready for after t training steps. Root-shaped growth from c0 to 1,
// flat at 1 beyond max_steps.
struct CompetenceConfig {
  double c0 = 0.01;              // initial competence, in (0, 1]
  double p = 2.0;                // root exponent, >= 1
  std::int64_t max_steps = 1;    // steps to full competence (T), >= 1
  double beta_max = 1.0;         // cap on the edge-drop ratio, in [0, 1]

  void validate() const {
    if (!(c0 > 0.0 && c0 <= 1.0))
      throw config_error("curriculum: c0 must lie in (0, 1], got " + std::to_string(c0));
    if (!(p >= 1.0))
      throw config_error("curriculum: p must be >= 1, got " + std::to_string(p));
    if (max_steps < 1)
      throw config_error("curriculum: max_steps must be >= 1, got " +
                         std::to_string(max_steps));
    if (!(beta_max >= 0.0 && beta_max <= 1.0))
      throw config_error("curriculum: beta_max must lie in [0, 1], got " +
                         std::to_string(beta_max));
  }
};

//   c(t) = min(1, (t * (1 - c0^p) / T + c0^p)^(1/p))
// Nondecreasing in t, c(0) = c0, and exactly 1 for every t >= T.
inline double competence(std::int64_t t, const CompetenceConfig& cfg) {
  cfg.validate();
  if (t < 0) throw config_error("competence: negative step " + std::to_string(t));
  // For t >= T the clamped value is analytically 1; branch on t rather than
  // on the rounded argument so the plateau is exact.
  if (t >= cfg.max_steps) return 1.0;
  const double cp = std::pow(cfg.c0, cfg.p);
  const double arg = static_cast<double>(t) * (1.0 - cp) /
                         static_cast<double>(cfg.max_steps) + cp;
  if (arg >= 1.0) return 1.0;
  return std::pow(arg, 1.0 / cfg.p);
}

// Edge-drop ratio for curriculum step t: competence capped by beta_max.
inline double beta_for_epoch(std::int64_t t, const CompetenceConfig& cfg) {
  return std::min(competence(t, cfg), cfg.beta_max);
}

}  // namespace cpt
