#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "agentcrowd/corpus.hpp"

namespace agentcrowd {

// Demographic and ideological variables of one synthetic rater.
enum class Trait : int {
  AgeBand = 0,
  Gender,
  Ethnicity,
  BirthCountry,
  ResidenceCountry,
  PoliticalParty,
  PoliticalViews,
  EducationLevel,
  IncomeRange,
  ClimateChangeStance,
  BorderWallStance,
  Languages,
  StudentStatus,
  EmploymentStatus,
};

inline constexpr int kTraitCount = 14;

// Category used for residual quota and for traits a spec leaves out.
inline constexpr std::string_view kUnspecified = "Unspecified";

struct TraitInfo {
  Trait trait;
  std::string_view key;    // JSON / prompt variable name
  std::string_view label;  // report label
  // Declared categories; empty means free-form (countries, languages).
  std::vector<std::string_view> categories;
};

const TraitInfo& trait_info(Trait t);
std::span<const TraitInfo> all_traits();
std::optional<Trait> trait_from_key(std::string_view key);

struct AgentProfile {
  std::string agent_id;
  std::string age_band{kUnspecified};
  std::string gender{kUnspecified};
  std::string ethnicity{kUnspecified};
  std::string birth_country{kUnspecified};
  std::string residence_country{kUnspecified};
  std::string political_party{kUnspecified};
  std::string political_views{kUnspecified};
  std::string education_level{kUnspecified};
  std::string income_range{kUnspecified};
  std::string climate_change_stance{kUnspecified};
  std::string border_wall_stance{kUnspecified};
  std::vector<std::string> languages{std::string(kUnspecified)};
  std::string student_status{kUnspecified};
  std::string employment_status{kUnspecified};

  // Category string of a trait; languages are joined with ", ".
  std::string get(Trait t) const;
  // Inverse of get(); languages are split on ",".
  void set(Trait t, std::string_view value);

  bool operator==(const AgentProfile&) const = default;
};

// Throws SchemaError when a value lies outside its declared set.
void validate_profile(const AgentProfile& profile);

nlohmann::json profile_to_json(const AgentProfile& p);
AgentProfile profile_from_json(const nlohmann::json& j);
nlohmann::json profiles_to_json(std::span<const AgentProfile> crowd);
// Validates each profile and agent_id uniqueness.
std::vector<AgentProfile> profiles_from_json(const nlohmann::json& j);
std::vector<AgentProfile> load_profiles(const std::filesystem::path& path);
std::string crowd_digest(std::span<const AgentProfile> crowd);

struct CategoryTarget {
  std::string category;
  std::optional<int> count;
  std::optional<double> percent;
};

struct TraitTarget {
  Trait trait;
  std::vector<CategoryTarget> targets;
};

struct DemographicSpec {
  int crowd_size = 0;
  std::vector<TraitTarget> traits;
};

// Parses {crowd_size, traits:{trait_name:[{category, count?|percent?}]}}.
DemographicSpec demographic_spec_from_json(const nlohmann::json& j);
DemographicSpec load_demographic_spec(const std::filesystem::path& path);

// Hamilton apportionment of `seats` proportional to `weights`; ties in the
// fractional remainders go to the earlier index.
std::vector<int> largest_remainder(std::span<const double> weights, int seats);

struct TraitQuota {
  Trait trait;
  std::vector<std::pair<std::string, int>> counts;  // sums to crowd_size
};

struct QuotaPlan {
  std::vector<TraitQuota> quotas;
  std::vector<std::string> warnings;
};

// Realizable per-trait counts. Counts are used verbatim (and win over a
// disagreeing percent, with a warning); percentages are apportioned by
// largest remainder; any residual goes to the Unspecified category.
// Throws EmptySpecError / InfeasibleSpecError / SchemaError.
QuotaPlan plan_quotas(const DemographicSpec& spec);

// Pure function of (spec, seed). Traits absent from the spec stay Unspecified.
std::vector<AgentProfile> build_crowd(const DemographicSpec& spec, std::uint64_t seed);

struct CategoryShare {
  std::string category;
  int count = 0;
  double percent = 0.0;
};

struct TraitComposition {
  Trait trait;
  std::vector<CategoryShare> shares;
};

// Declared categories first (including zero counts), then any other
// observed values in first-seen order. Throws EmptyCrowdError.
std::vector<TraitComposition> marginal_report(std::span<const AgentProfile> crowd);

struct Assignment {
  // Sorted by (claim index, agent index).
  std::vector<std::pair<std::string, std::string>> pairs;  // (agent_id, claim_id)
  std::optional<int> per_agent_load;  // nullopt when balanced
  int per_claim_raters = 0;

  std::vector<std::string> raters_of(std::string_view claim_id) const;
};

// Exact biregular design when `per_agent_load` is given (requires
// agents * load == claims * raters), otherwise a balanced design whose
// agent loads differ by at most one. Deterministic in (inputs, seed).
Assignment assign_claims(std::span<const AgentProfile> agents, std::span<const Claim> claims,
                         std::optional<int> per_agent_load, int per_claim_raters, std::uint64_t seed);

}  // namespace agentcrowd
