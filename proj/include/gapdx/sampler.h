/// @file sampler.h
/// @brief Stratified sampling with minimum allocation, largest-remainder
/// apportionment and paired projection.
///
/// For strata counts n_c, target N and minimum k:
///   m_c = min(k, n_c),  M = sum m_c,  R = N - M
///   q_c = R * n_c / sum n_j  (exact),  a_c = floor(q_c),  L = R - sum a_c
///   delta_c = 1 for the L largest fractional parts q_c - a_c
///   t_c = min(n_c, m_c + a_c + delta_c)
/// Units stranded by the n_c cap are re-apportioned over the strata that still
/// have room (same rule, weights n_c) until sum t_c = N.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gapdx/trace.h"

namespace gapdx {

struct StrataInput {
  std::map<std::string, std::uint64_t> counts;  // stratum name -> n_c
  std::uint64_t target = 0;                     // N
  std::uint64_t minimum = 0;                    // k
  std::uint64_t seed = 0;

  nlohmann::json ToJson() const;
  /// sha256 over counts, target and minimum.
  std::string Hash() const;
};

/// Exact rational value, not reduced.
struct Fraction {
  std::uint64_t num = 0;
  std::uint64_t den = 1;
  bool operator==(const Fraction&) const = default;
};

struct StratumAllocation {
  std::string name;
  std::uint64_t count = 0;        // n_c
  std::uint64_t minimum = 0;      // m_c
  Fraction share;                 // q_c
  std::uint64_t floor_share = 0;  // a_c
  std::uint64_t remainder_bonus = 0;  // delta_c in {0, 1}
  std::uint64_t redistributed = 0;    // units added after the n_c cap
  std::uint64_t take = 0;             // t_c

  bool operator==(const StratumAllocation&) const = default;
};

/// Remainder ties: larger n_c first, then lexicographically smaller name.
inline constexpr const char* kTieBreakRule = "remainder-desc,count-desc,name-asc/v1";

struct StrataPlan {
  std::vector<StratumAllocation> strata;  // sorted by name
  std::uint64_t target = 0;               // N
  std::uint64_t minimum = 0;              // k
  std::uint64_t total_minimum = 0;        // M
  std::uint64_t remainder = 0;            // R
  std::uint64_t leftover = 0;             // L
  std::uint64_t redistribution_passes = 0;
  std::uint64_t seed = 0;
  std::string input_hash;

  const StratumAllocation* Find(const std::string& name) const;
  std::map<std::string, std::uint64_t> Takes() const;

  nlohmann::json ToJson() const;
  static StrataPlan FromJson(const nlohmann::json& j);

  bool operator==(const StrataPlan&) const = default;
};

/// Throws InfeasibleTarget when N > sum n_c or N == 0.
StrataPlan Allocate(const StrataInput& input);

struct KeyList {
  std::vector<StepKey> keys;  // sorted, pairwise distinct
  std::string baseline_run;   // provenance: run the keys were drawn from
  std::uint64_t seed = 0;

  nlohmann::json ToJson() const;
  static KeyList FromJson(const nlohmann::json& j);
};

/// Population member: step key and its stratum name.
using StratumMember = std::pair<StepKey, std::string>;

/// Draws t_c keys per stratum uniformly without replacement; output sorted by
/// key. Throws InfeasibleDraw when a stratum holds fewer than t_c members.
KeyList Draw(const StrataPlan& plan, const std::vector<StratumMember>& population, std::uint64_t seed);

/// The target run's records for exactly the listed keys, in key-list order.
/// Throws MissingKeyError naming every absent key.
std::vector<StepRecord> Project(const KeyList& keys, const std::vector<StepRecord>& target_run);

/// Stratum sizes of a population.
std::map<std::string, std::uint64_t> ClassCounts(const std::vector<StratumMember>& population);

}  // namespace gapdx
