#include "agentcrowd/crowd.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include "agentcrowd/error.hpp"
#include "agentcrowd/util.hpp"

namespace agentcrowd {

using nlohmann::json;

namespace {

const std::vector<TraitInfo>& trait_table() {
  static const std::vector<TraitInfo> table = {
      {Trait::AgeBand, "age_band", "Age", {"19-25", "26-35", "36-50", "51-80"}},
      {Trait::Gender, "gender", "Gender", {"Male", "Female"}},
      {Trait::Ethnicity, "ethnicity", "Ethnicity", {"Asian", "Black", "White", "Mixed", "Other"}},
      {Trait::BirthCountry, "birth_country", "Birth Country", {}},
      {Trait::ResidenceCountry, "residence_country", "Residence Country", {}},
      {Trait::PoliticalParty, "political_party", "Political Faction", {"Democrat", "Republican", "Independent", "Other"}},
      {Trait::PoliticalViews,
       "political_views",
       "Political Views",
       {"Very Liberal", "Liberal", "Moderate", "Conservative", "Very Conservative"}},
      {Trait::EducationLevel,
       "education_level",
       "Education Level",
       {"Less than High School", "High School", "College", "Bachelor's Degree", "Post-graduate Schooling",
        "Post-graduate Degree"}},
      {Trait::IncomeRange, "income_range", "Income", {"<20K", "20K-30K", "30K-50K", "50K-100K", ">100K"}},
      {Trait::ClimateChangeStance, "climate_change_stance", "Climate Change Stance", {"Support", "Oppose", "Neutral"}},
      {Trait::BorderWallStance, "border_wall_stance", "Border Wall Stance", {"Support", "Oppose", "Neutral"}},
      {Trait::Languages, "languages", "Languages", {}},
      {Trait::StudentStatus, "student_status", "Student Status", {"You are", "You are not"}},
      {Trait::EmploymentStatus,
       "employment_status",
       "Employment Status",
       {"Full-time", "Part-time", "Unemployed", "Retired", "Student"}},
  };
  return table;
}

std::vector<std::string> split_languages(std::string_view value) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : value) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

bool category_allowed(const TraitInfo& info, std::string_view value) {
  if (value == kUnspecified) return true;
  if (info.categories.empty()) return !is_blank(value);
  return std::find(info.categories.begin(), info.categories.end(), value) != info.categories.end();
}

std::string agent_id_for(int index, int crowd_size) {
  int width = 2;
  for (int n = crowd_size; n >= 100; n /= 10) ++width;
  auto digits = std::to_string(index + 1);
  if (static_cast<int>(digits.size()) < width) digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
  return "agent_" + digits;
}

}  // namespace

const TraitInfo& trait_info(Trait t) { return trait_table().at(static_cast<std::size_t>(t)); }

std::span<const TraitInfo> all_traits() { return trait_table(); }

std::optional<Trait> trait_from_key(std::string_view key) {
  for (const auto& info : trait_table()) {
    if (info.key == key) return info.trait;
  }
  return std::nullopt;
}

std::string AgentProfile::get(Trait t) const {
  switch (t) {
    case Trait::AgeBand: return age_band;
    case Trait::Gender: return gender;
    case Trait::Ethnicity: return ethnicity;
    case Trait::BirthCountry: return birth_country;
    case Trait::ResidenceCountry: return residence_country;
    case Trait::PoliticalParty: return political_party;
    case Trait::PoliticalViews: return political_views;
    case Trait::EducationLevel: return education_level;
    case Trait::IncomeRange: return income_range;
    case Trait::ClimateChangeStance: return climate_change_stance;
    case Trait::BorderWallStance: return border_wall_stance;
    case Trait::Languages: {
      std::string out;
      for (std::size_t i = 0; i < languages.size(); ++i) out += (i ? ", " : "") + languages[i];
      return out;
    }
    case Trait::StudentStatus: return student_status;
    case Trait::EmploymentStatus: return employment_status;
  }
  return {};
}

void AgentProfile::set(Trait t, std::string_view value) {
  std::string v(value);
  switch (t) {
    case Trait::AgeBand: age_band = v; break;
    case Trait::Gender: gender = v; break;
    case Trait::Ethnicity: ethnicity = v; break;
    case Trait::BirthCountry: birth_country = v; break;
    case Trait::ResidenceCountry: residence_country = v; break;
    case Trait::PoliticalParty: political_party = v; break;
    case Trait::PoliticalViews: political_views = v; break;
    case Trait::EducationLevel: education_level = v; break;
    case Trait::IncomeRange: income_range = v; break;
    case Trait::ClimateChangeStance: climate_change_stance = v; break;
    case Trait::BorderWallStance: border_wall_stance = v; break;
    case Trait::Languages: languages = split_languages(value); break;
    case Trait::StudentStatus: student_status = v; break;
    case Trait::EmploymentStatus: employment_status = v; break;
  }
}

void validate_profile(const AgentProfile& profile) {
  if (is_blank(profile.agent_id)) throw SchemaError("profile: agent_id must be nonempty");
  for (const auto& info : trait_table()) {
    if (info.trait == Trait::Languages) {
      if (profile.languages.empty()) throw SchemaError(profile.agent_id + ": languages must be nonempty");
      for (const auto& l : profile.languages) {
        if (is_blank(l)) throw SchemaError(profile.agent_id + ": blank language entry");
      }
      continue;
    }
    const auto value = profile.get(info.trait);
    if (!category_allowed(info, value)) {
      throw SchemaError(profile.agent_id + ": '" + value + "' is not a valid " + std::string(info.key));
    }
  }
}

json profile_to_json(const AgentProfile& p) {
  json j = {{"agent_id", p.agent_id}};
  for (const auto& info : trait_table()) {
    if (info.trait == Trait::Languages) {
      j["languages"] = p.languages;
    } else {
      j[std::string(info.key)] = p.get(info.trait);
    }
  }
  return j;
}

AgentProfile profile_from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("profile: expected an object");
  AgentProfile p;
  for (const auto& [key, value] : j.items()) {
    if (key == "agent_id") {
      if (!value.is_string()) throw SchemaError("profile: agent_id must be a string");
      p.agent_id = value.get<std::string>();
      continue;
    }
    auto trait = trait_from_key(key);
    if (!trait) throw SchemaError("profile: unexpected field '" + key + "'");
    if (*trait == Trait::Languages) {
      if (!value.is_array()) throw SchemaError("profile: languages must be an array of strings");
      p.languages.clear();
      for (const auto& l : value) {
        if (!l.is_string()) throw SchemaError("profile: languages must be an array of strings");
        p.languages.push_back(l.get<std::string>());
      }
    } else {
      if (!value.is_string()) throw SchemaError("profile: '" + key + "' must be a string");
      p.set(*trait, value.get<std::string>());
    }
  }
  validate_profile(p);
  return p;
}

json profiles_to_json(std::span<const AgentProfile> crowd) {
  json arr = json::array();
  for (const auto& p : crowd) arr.push_back(profile_to_json(p));
  return arr;
}

std::vector<AgentProfile> profiles_from_json(const json& j) {
  if (!j.is_array()) throw SchemaError("profiles: expected an array");
  std::vector<AgentProfile> out;
  std::unordered_set<std::string> ids;
  for (const auto& item : j) {
    out.push_back(profile_from_json(item));
    if (!ids.insert(out.back().agent_id).second) {
      throw DuplicateIdError("duplicate agent_id '" + out.back().agent_id + "'");
    }
  }
  return out;
}

std::vector<AgentProfile> load_profiles(const std::filesystem::path& path) {
  try {
    return profiles_from_json(json::parse(read_text_file(path)));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string crowd_digest(std::span<const AgentProfile> crowd) { return sha256_hex(profiles_to_json(crowd).dump()); }

DemographicSpec demographic_spec_from_json(const json& j) {
  if (!j.is_object() || !j.contains("crowd_size") || !j.contains("traits")) {
    throw SchemaError("demographic spec: expected {crowd_size, traits}");
  }
  for (const auto& [key, _] : j.items()) {
    if (key != "crowd_size" && key != "traits") throw SchemaError("demographic spec: unexpected field '" + key + "'");
  }
  DemographicSpec spec;
  if (!j.at("crowd_size").is_number_integer()) throw SchemaError("demographic spec: crowd_size must be an integer");
  spec.crowd_size = j.at("crowd_size").get<int>();
  const auto& traits = j.at("traits");
  if (!traits.is_object()) throw SchemaError("demographic spec: traits must be an object");
  for (const auto& [key, list] : traits.items()) {
    auto trait = trait_from_key(key);
    if (!trait) throw SchemaError("demographic spec: unknown trait '" + key + "'");
    if (!list.is_array()) throw SchemaError("demographic spec: trait '" + key + "' must list categories");
    TraitTarget tt{*trait, {}};
    for (const auto& entry : list) {
      if (!entry.is_object() || !entry.contains("category") || !entry.at("category").is_string()) {
        throw SchemaError("demographic spec: '" + key + "' entries need a string 'category'");
      }
      CategoryTarget ct;
      ct.category = entry.at("category").get<std::string>();
      for (const auto& [field, value] : entry.items()) {
        if (field == "category") continue;
        if (field == "count") {
          if (!value.is_number_integer()) throw SchemaError("demographic spec: count must be an integer");
          ct.count = value.get<int>();
        } else if (field == "percent") {
          if (!value.is_number()) throw SchemaError("demographic spec: percent must be a number");
          ct.percent = value.get<double>();
        } else {
          throw SchemaError("demographic spec: unexpected field '" + field + "' in '" + key + "'");
        }
      }
      tt.targets.push_back(std::move(ct));
    }
    spec.traits.push_back(std::move(tt));
  }
  // Canonical trait order keeps quota planning independent of JSON key order.
  std::sort(spec.traits.begin(), spec.traits.end(),
            [](const TraitTarget& a, const TraitTarget& b) { return a.trait < b.trait; });
  return spec;
}

DemographicSpec load_demographic_spec(const std::filesystem::path& path) {
  try {
    return demographic_spec_from_json(json::parse(read_text_file(path)));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::vector<int> largest_remainder(std::span<const double> weights, int seats) {
  std::vector<int> out(weights.size(), 0);
  if (seats <= 0 || weights.empty()) return out;
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) throw InfeasibleSpecError("largest_remainder: weights sum to zero");
  struct Item {
    std::size_t index;
    long long remainder;  // fractional part on a 1e-9 grid so near-ties compare equal
  };
  std::vector<Item> items;
  int assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double quota = weights[i] / total * seats;
    const double floor_q = std::floor(quota + 1e-9);
    out[i] = static_cast<int>(floor_q);
    assigned += out[i];
    items.push_back({i, std::llround(std::max(0.0, quota - floor_q) * 1e9)});
  }
  std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.remainder > b.remainder; });
  for (std::size_t k = 0; assigned < seats; ++k, ++assigned) out[items[k % items.size()].index] += 1;
  return out;
}

QuotaPlan plan_quotas(const DemographicSpec& spec) {
  if (spec.crowd_size < 1) throw EmptySpecError("demographic spec: crowd_size must be at least 1");
  QuotaPlan plan;
  const int n = spec.crowd_size;
  std::set<Trait> seen;
  for (const auto& tt : spec.traits) {
    const auto& info = trait_info(tt.trait);
    const std::string tkey(info.key);
    if (!seen.insert(tt.trait).second) throw SchemaError("demographic spec: trait '" + tkey + "' listed twice");
    if (tt.targets.empty()) throw EmptySpecError("demographic spec: trait '" + tkey + "' has no categories");

    std::set<std::string> cats;
    int count_sum = 0;
    std::vector<std::size_t> percent_only;
    double percent_quota = 0.0;
    for (std::size_t i = 0; i < tt.targets.size(); ++i) {
      const auto& t = tt.targets[i];
      if (!cats.insert(t.category).second) {
        throw SchemaError("demographic spec: duplicate category '" + t.category + "' in '" + tkey + "'");
      }
      if (tt.trait == Trait::Languages) {
        for (const auto& l : split_languages(t.category)) {
          if (is_blank(l)) throw SchemaError("demographic spec: blank language in '" + t.category + "'");
        }
      } else if (!category_allowed(info, t.category)) {
        throw SchemaError("demographic spec: '" + t.category + "' is not a valid " + tkey);
      }
      if (!t.count && !t.percent) {
        throw SchemaError("demographic spec: '" + t.category + "' needs a count or a percent");
      }
      if ((t.count && *t.count < 0) || (t.percent && *t.percent < 0.0)) {
        throw SchemaError("demographic spec: negative target for '" + t.category + "'");
      }
      if (t.count) {
        count_sum += *t.count;
        if (t.percent && std::llround(*t.percent * n / 100.0) != *t.count) {
          std::ostringstream w;
          w << tkey << "/" << t.category << ": count " << *t.count << " disagrees with " << *t.percent << "% of "
            << n << "; using the count";
          plan.warnings.push_back(w.str());
        }
      } else {
        percent_only.push_back(i);
        percent_quota += *t.percent * n / 100.0;
      }
    }
    if (count_sum > n) {
      throw InfeasibleSpecError("demographic spec: counts for '" + tkey + "' sum to " + std::to_string(count_sum) +
                                " > crowd_size " + std::to_string(n));
    }
    const int rest = n - count_sum;
    if (percent_quota > rest + 1e-9) {
      throw InfeasibleSpecError("demographic spec: targets for '" + tkey + "' exceed crowd_size");
    }

    std::vector<std::pair<std::string, int>> counts;
    for (const auto& t : tt.targets) counts.emplace_back(t.category, t.count.value_or(0));

    const double residual = rest - percent_quota;
    std::vector<double> weights;
    for (auto i : percent_only) weights.push_back(*tt.targets[i].percent * n / 100.0);
    const bool has_residual = residual > 1e-9;
    if (has_residual) weights.push_back(residual);
    if (!weights.empty() && rest > 0) {
      auto seats = largest_remainder(weights, rest);
      for (std::size_t k = 0; k < percent_only.size(); ++k) counts[percent_only[k]].second += seats[k];
      if (has_residual && seats.back() > 0) {
        auto it = std::find_if(counts.begin(), counts.end(), [](const auto& c) { return c.first == kUnspecified; });
        if (it != counts.end()) {
          it->second += seats.back();
        } else {
          counts.emplace_back(std::string(kUnspecified), seats.back());
        }
      }
    } else if (weights.empty() && rest > 0) {
      counts.emplace_back(std::string(kUnspecified), rest);
    }
    plan.quotas.push_back({tt.trait, std::move(counts)});
  }
  return plan;
}

std::vector<AgentProfile> build_crowd(const DemographicSpec& spec, std::uint64_t seed) {
  const auto plan = plan_quotas(spec);
  std::vector<AgentProfile> crowd(static_cast<std::size_t>(spec.crowd_size));
  for (int i = 0; i < spec.crowd_size; ++i) crowd[static_cast<std::size_t>(i)].agent_id = agent_id_for(i, spec.crowd_size);

  for (const auto& quota : plan.quotas) {
    std::vector<std::string> slots;
    for (const auto& [category, count] : quota.counts) slots.insert(slots.end(), static_cast<std::size_t>(count), category);
    Rng rng(derive_seed(seed, "crowd/" + std::string(trait_info(quota.trait).key)));
    rng.shuffle(slots);
    for (std::size_t i = 0; i < crowd.size(); ++i) crowd[i].set(quota.trait, slots[i]);
  }
  return crowd;
}

std::vector<TraitComposition> marginal_report(std::span<const AgentProfile> crowd) {
  if (crowd.empty()) throw EmptyCrowdError("marginal_report: crowd is empty");
  std::vector<TraitComposition> out;
  const double n = static_cast<double>(crowd.size());
  for (const auto& info : trait_table()) {
    TraitComposition comp{info.trait, {}};
    for (auto c : info.categories) comp.shares.push_back({std::string(c), 0, 0.0});
    for (const auto& p : crowd) {
      const auto value = p.get(info.trait);
      auto it = std::find_if(comp.shares.begin(), comp.shares.end(),
                             [&](const CategoryShare& s) { return s.category == value; });
      if (it == comp.shares.end()) {
        comp.shares.push_back({value, 1, 0.0});
      } else {
        ++it->count;
      }
    }
    for (auto& s : comp.shares) s.percent = 100.0 * s.count / n;
    out.push_back(std::move(comp));
  }
  return out;
}

std::vector<std::string> Assignment::raters_of(std::string_view claim_id) const {
  std::vector<std::string> out;
  for (const auto& [agent, claim] : pairs) {
    if (claim == claim_id) out.push_back(agent);
  }
  return out;
}

Assignment assign_claims(std::span<const AgentProfile> agents, std::span<const Claim> claims,
                         std::optional<int> per_agent_load, int per_claim_raters, std::uint64_t seed) {
  if (agents.empty() || claims.empty()) throw DegenerateDesignError("assign_claims: need at least one agent and one claim");
  const long long a = static_cast<long long>(agents.size());
  const long long c = static_cast<long long>(claims.size());
  const long long r = per_claim_raters;
  if (r < 1 || r > a) {
    throw InfeasibleDesignError("assign_claims: raters per claim must be in 1.." + std::to_string(a) + ", got " +
                                std::to_string(r));
  }
  std::vector<long long> capacity(static_cast<std::size_t>(a));
  Rng rng(derive_seed(seed, "assignment"));
  if (per_agent_load) {
    const long long load = *per_agent_load;
    if (load < 1 || a * load != c * r) {
      throw InfeasibleDesignError("assign_claims: agents*load = " + std::to_string(a * load) +
                                  " != claims*raters = " + std::to_string(c * r));
    }
    if (load > c) throw InfeasibleDesignError("assign_claims: per-agent load exceeds the number of claims");
    std::fill(capacity.begin(), capacity.end(), load);
  } else {
    const long long total = c * r;
    std::fill(capacity.begin(), capacity.end(), total / a);
    std::vector<std::size_t> order(static_cast<std::size_t>(a));
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    for (long long k = 0; k < total % a; ++k) capacity[order[static_cast<std::size_t>(k)]] += 1;
  }

  // Each claim takes the agents with the most remaining capacity (random
  // tie-break). This greedy always realizes a feasible bipartite degree
  // sequence.
  Assignment out;
  out.per_agent_load = per_agent_load;
  out.per_claim_raters = per_claim_raters;
  std::vector<std::size_t> idx(static_cast<std::size_t>(a));
  std::vector<std::uint64_t> tie(static_cast<std::size_t>(a));
  for (std::size_t ci = 0; ci < claims.size(); ++ci) {
    std::iota(idx.begin(), idx.end(), 0);
    for (auto& t : tie) t = rng.next();
    std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) {
      if (capacity[x] != capacity[y]) return capacity[x] > capacity[y];
      return tie[x] < tie[y];
    });
    std::vector<std::size_t> chosen(idx.begin(), idx.begin() + r);
    for (auto ai : chosen) {
      if (capacity[ai] <= 0) throw InfeasibleDesignError("assign_claims: design is not realizable");
      --capacity[ai];
    }
    std::sort(chosen.begin(), chosen.end());
    for (auto ai : chosen) out.pairs.emplace_back(agents[ai].agent_id, claims[ci].id);
  }
  return out;
}

}  // namespace agentcrowd
