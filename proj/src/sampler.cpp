/// @file sampler.cpp
/// @brief Largest-remainder stratified allocation, seeded drawing, projection.

#include "gapdx/sampler.h"

#include <algorithm>
#include <numeric>
#include <set>

#include "gapdx/errors.h"
#include "gapdx/hash.h"
#include "gapdx/jsonl.h"
#include "gapdx/rng.h"

namespace gapdx {

using json = nlohmann::json;

namespace {

using u128 = unsigned __int128;

struct Apportionment {
  std::vector<std::uint64_t> floors;
  std::vector<std::uint64_t> bonus;
  std::vector<std::uint64_t> numerators;  // units * weight_c, over `denominator`
  std::uint64_t denominator = 0;
  std::uint64_t leftover = 0;
};

// Splits `units` over strata proportionally to `weights` (only indices in
// `eligible`). All shares share the denominator sum(weights[eligible]), so
// fractional parts compare as integer remainders.
Apportionment Apportion(std::uint64_t units, const std::vector<std::uint64_t>& weights,
                        const std::vector<std::string>& names, const std::vector<std::size_t>& eligible) {
  Apportionment out;
  out.floors.assign(weights.size(), 0);
  out.bonus.assign(weights.size(), 0);
  out.numerators.assign(weights.size(), 0);
  u128 total = 0;
  for (std::size_t i : eligible) total += weights[i];
  out.denominator = static_cast<std::uint64_t>(total);
  if (total == 0) return out;

  std::vector<std::uint64_t> remainders(weights.size(), 0);
  std::uint64_t assigned = 0;
  for (std::size_t i : eligible) {
    const u128 product = static_cast<u128>(units) * weights[i];
    out.numerators[i] = static_cast<std::uint64_t>(product);
    out.floors[i] = static_cast<std::uint64_t>(product / total);
    remainders[i] = static_cast<std::uint64_t>(product % total);
    assigned += out.floors[i];
  }
  out.leftover = units - assigned;

  std::vector<std::size_t> order = eligible;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (remainders[a] != remainders[b]) return remainders[a] > remainders[b];
    if (weights[a] != weights[b]) return weights[a] > weights[b];
    return names[a] < names[b];
  });
  for (std::size_t r = 0; r < out.leftover; ++r) out.bonus[order[r]] = 1;
  return out;
}

json FractionJson(const Fraction& f) { return json{{"num", f.num}, {"den", f.den}}; }

}  // namespace

json StrataInput::ToJson() const {
  return json{{"counts", counts}, {"target", target}, {"minimum", minimum}, {"seed", seed}};
}

std::string StrataInput::Hash() const {
  return Sha256Hex(DumpCompact(json{{"counts", counts}, {"target", target}, {"minimum", minimum}}));
}

const StratumAllocation* StrataPlan::Find(const std::string& name) const {
  for (const auto& s : strata) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

std::map<std::string, std::uint64_t> StrataPlan::Takes() const {
  std::map<std::string, std::uint64_t> out;
  for (const auto& s : strata) out[s.name] = s.take;
  return out;
}

StrataPlan Allocate(const StrataInput& input) {
  if (input.counts.empty()) throw InfeasibleTarget("no strata given");
  if (input.target == 0) throw InfeasibleTarget("target size must be positive");
  u128 population = 0;
  for (const auto& [name, n] : input.counts) population += n;
  if (input.target > population) {
    throw InfeasibleTarget("target " + std::to_string(input.target) + " exceeds population " +
                           std::to_string(static_cast<std::uint64_t>(population)));
  }

  const std::size_t size = input.counts.size();
  std::vector<std::string> names;
  std::vector<std::uint64_t> counts;
  for (const auto& [name, n] : input.counts) {
    names.push_back(name);
    counts.push_back(n);
  }

  StrataPlan plan;
  plan.target = input.target;
  plan.minimum = input.minimum;
  plan.seed = input.seed;
  plan.input_hash = input.Hash();
  plan.strata.resize(size);
  for (std::size_t i = 0; i < size; ++i) {
    plan.strata[i].name = names[i];
    plan.strata[i].count = counts[i];
    plan.strata[i].minimum = std::min(input.minimum, counts[i]);
    plan.total_minimum += plan.strata[i].minimum;
  }
  if (plan.total_minimum > plan.target) {
    throw InfeasibleTarget("minimum allocation " + std::to_string(plan.total_minimum) + " exceeds target " +
                           std::to_string(plan.target));
  }
  plan.remainder = plan.target - plan.total_minimum;

  std::vector<std::size_t> all(size);
  std::iota(all.begin(), all.end(), 0);
  const Apportionment first = Apportion(plan.remainder, counts, names, all);
  plan.leftover = first.leftover;
  std::uint64_t placed = 0;
  for (std::size_t i = 0; i < size; ++i) {
    StratumAllocation& s = plan.strata[i];
    s.share = Fraction{first.numerators[i], first.denominator};
    s.floor_share = first.floors[i];
    s.remainder_bonus = first.bonus[i];
    s.take = std::min(s.count, s.minimum + s.floor_share + s.remainder_bonus);
    placed += s.take;
  }

  // Units lost to the n_c cap go back through the same rule over the strata
  // that still have room. Each pass places at least one unit.
  while (placed < plan.target) {
    std::vector<std::size_t> open;
    for (std::size_t i = 0; i < size; ++i) {
      if (plan.strata[i].take < plan.strata[i].count) open.push_back(i);
    }
    if (open.empty()) throw InfeasibleTarget("every stratum is exhausted before reaching the target");
    ++plan.redistribution_passes;
    const Apportionment pass = Apportion(plan.target - placed, counts, names, open);
    for (std::size_t i : open) {
      StratumAllocation& s = plan.strata[i];
      const std::uint64_t room = s.count - s.take;
      const std::uint64_t add = std::min(room, pass.floors[i] + pass.bonus[i]);
      s.take += add;
      s.redistributed += add;
      placed += add;
    }
  }
  return plan;
}

json StrataPlan::ToJson() const {
  json strata_json = json::array();
  for (const auto& s : strata) {
    strata_json.push_back(json{{"name", s.name},
                               {"n", s.count},
                               {"m", s.minimum},
                               {"q", FractionJson(s.share)},
                               {"a", s.floor_share},
                               {"delta", s.remainder_bonus},
                               {"redistributed", s.redistributed},
                               {"t", s.take}});
  }
  return json{{"strata", strata_json},
              {"N", target},
              {"k", minimum},
              {"M", total_minimum},
              {"R", remainder},
              {"L", leftover},
              {"redistribution_passes", redistribution_passes},
              {"seed", seed},
              {"input_hash", input_hash},
              {"tie_break", kTieBreakRule},
              {"rng", std::string(DeterministicRng::kAlgorithm)}};
}

StrataPlan StrataPlan::FromJson(const json& j) {
  try {
    StrataPlan plan;
    for (const auto& s : j.at("strata")) {
      StratumAllocation a;
      a.name = s.at("name").get<std::string>();
      a.count = s.at("n").get<std::uint64_t>();
      a.minimum = s.at("m").get<std::uint64_t>();
      a.share = Fraction{s.at("q").at("num").get<std::uint64_t>(), s.at("q").at("den").get<std::uint64_t>()};
      a.floor_share = s.at("a").get<std::uint64_t>();
      a.remainder_bonus = s.at("delta").get<std::uint64_t>();
      a.redistributed = s.value("redistributed", std::uint64_t{0});
      a.take = s.at("t").get<std::uint64_t>();
      plan.strata.push_back(std::move(a));
    }
    plan.target = j.at("N").get<std::uint64_t>();
    plan.minimum = j.at("k").get<std::uint64_t>();
    plan.total_minimum = j.at("M").get<std::uint64_t>();
    plan.remainder = j.at("R").get<std::uint64_t>();
    plan.leftover = j.at("L").get<std::uint64_t>();
    plan.redistribution_passes = j.value("redistribution_passes", std::uint64_t{0});
    plan.seed = j.value("seed", std::uint64_t{0});
    plan.input_hash = j.value("input_hash", std::string());
    return plan;
  } catch (const json::exception& e) {
    throw ParseError("plan", 0, e.what());
  }
}

json KeyList::ToJson() const {
  json keys_json = json::array();
  for (const auto& k : keys) keys_json.push_back(KeyToJson(k));
  return json{{"keys", keys_json}, {"baseline_run", baseline_run}, {"seed", seed}};
}

KeyList KeyList::FromJson(const json& j) {
  if (!j.is_object() || !j.contains("keys") || !j["keys"].is_array()) {
    throw ParseError("keys", 0, "key list must be an object with a 'keys' array");
  }
  KeyList list;
  for (const auto& k : j["keys"]) list.keys.push_back(KeyFromJson(k));
  list.baseline_run = j.value("baseline_run", std::string());
  list.seed = j.value("seed", std::uint64_t{0});
  std::set<StepKey> distinct(list.keys.begin(), list.keys.end());
  if (distinct.size() != list.keys.size()) throw DuplicateKeyError("key list contains duplicate keys");
  return list;
}

KeyList Draw(const StrataPlan& plan, const std::vector<StratumMember>& population, std::uint64_t seed) {
  std::map<std::string, std::vector<StepKey>> by_stratum;
  std::set<StepKey> seen;
  for (const auto& [key, stratum] : population) {
    if (!seen.insert(key).second) throw DuplicateKeyError("population lists " + ToString(key) + " twice");
    by_stratum[stratum].push_back(key);
  }

  DeterministicRng rng(seed);
  KeyList out;
  out.seed = seed;
  for (const StratumAllocation& s : plan.strata) {
    std::vector<StepKey>& members = by_stratum[s.name];
    if (members.size() < s.take) {
      throw InfeasibleDraw("stratum " + s.name + " has " + std::to_string(members.size()) +
                           " members, plan needs " + std::to_string(s.take));
    }
    std::sort(members.begin(), members.end());
    rng.SampleInPlace(members, static_cast<std::size_t>(s.take));
    out.keys.insert(out.keys.end(), members.begin(), members.end());
  }
  std::sort(out.keys.begin(), out.keys.end());
  return out;
}

std::vector<StepRecord> Project(const KeyList& keys, const std::vector<StepRecord>& target_run) {
  std::map<StepKey, const StepRecord*> index;
  for (const auto& r : target_run) index.emplace(r.key, &r);
  std::vector<std::string> missing;
  std::vector<StepRecord> out;
  out.reserve(keys.keys.size());
  for (const StepKey& key : keys.keys) {
    auto it = index.find(key);
    if (it == index.end()) {
      missing.push_back(ToString(key));
      continue;
    }
    out.push_back(*it->second);
  }
  if (!missing.empty()) throw MissingKeyError(std::move(missing));
  return out;
}

std::map<std::string, std::uint64_t> ClassCounts(const std::vector<StratumMember>& population) {
  std::map<std::string, std::uint64_t> counts;
  for (const auto& member : population) ++counts[member.second];
  return counts;
}

}  // namespace gapdx
