#include "saeprobe/synthetic_source.hpp"

#include <algorithm>
#include <array>
#include <set>

#include "saeprobe/error.hpp"
#include "saeprobe/hashing.hpp"

namespace saeprobe {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 8> kSubjects = {
    "The committee", "A local teacher", "The small library", "Our neighbor",
    "The new orchestra", "A quiet student", "The village baker", "The museum guide"};
constexpr std::array<std::string_view, 8> kVerbs = {
    "described", "discussed", "celebrated", "reviewed", "painted", "recorded", "remembered", "planned"};
constexpr std::array<std::string_view, 8> kObjects = {
    "the morning lesson", "a long journey", "the spring festival", "an old recipe",
    "the weekly meeting", "a family dinner", "the garden path", "a winter concert"};
constexpr std::array<std::string_view, 4> kInjectionFrames = {
    "Later reports mentioned {kw} as well.", "Someone asked about {kw} afterwards.",
    "The notes included {kw} too.", "{kw} came up during the evening."};

void check_probability(double value, const std::string& what) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw Error(ErrorKind::validation, what + " must lie in [0, 1]");
  }
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::string_view> context) {
  std::uint64_t h = fnv1a64(std::to_string(seed));
  for (std::string_view part : context) {
    h = fnv1a64("\x1f", h);
    h = fnv1a64(part, h);
  }
  return h;
}

std::string synthesize_text(SyntheticRng& rng, std::span<const KeywordInjection> injections) {
  std::string text;
  text.append(kSubjects[rng.below(kSubjects.size())]);
  text.push_back(' ');
  text.append(kVerbs[rng.below(kVerbs.size())]);
  text.push_back(' ');
  text.append(kObjects[rng.below(kObjects.size())]);
  text.push_back('.');
  for (const auto& injection : injections) {
    const double draw = rng.uniform();
    const std::size_t pick = rng.below(injection.keywords.size());
    const std::size_t frame = rng.below(kInjectionFrames.size());
    if (draw >= injection.rate) continue;
    std::string sentence(kInjectionFrames[frame]);
    sentence.replace(sentence.find("{kw}"), 4, injection.keywords[pick]);
    text.push_back(' ');
    text.append(sentence);
  }
  return text;
}

std::vector<std::string> synthetic_corpus(std::size_t count, std::span<const KeywordInjection> injections,
                                          std::uint64_t seed) {
  for (const auto& injection : injections) {
    check_probability(injection.rate, "injection rate");
    if (injection.keywords.empty()) throw Error(ErrorKind::validation, "injection without keywords");
  }
  SyntheticRng rng(derive_seed(seed, {"corpus"}));
  std::vector<std::string> texts;
  texts.reserve(count);
  for (std::size_t i = 0; i < count; ++i) texts.push_back(synthesize_text(rng, injections));
  return texts;
}

// ---- spec ---------------------------------------------------------------------

void validate_synthetic_spec(const SyntheticSpec& spec, std::uint32_t feature_count) {
  std::set<std::string> pool_ids;
  std::uint64_t total = 0;
  for (const auto& pool : spec.pools) {
    if (pool.size == 0) throw Error(ErrorKind::validation, "pool '" + pool.id + "' is empty");
    if (!pool_ids.insert(pool.id).second) {
      throw Error(ErrorKind::validation, "pool '" + pool.id + "' is declared twice");
    }
    for (const auto& injection : pool.injections) {
      check_probability(injection.rate, "injection rate of pool '" + pool.id + "'");
      if (injection.keywords.empty()) {
        throw Error(ErrorKind::validation, "injection '" + injection.label + "' has no keywords");
      }
    }
    total += pool.size;
  }
  if (total > feature_count) {
    throw Error(ErrorKind::validation, "synthetic pools need " + std::to_string(total) +
                                           " features but the target has " + std::to_string(feature_count));
  }
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& m : spec.memberships) {
    check_probability(m.strength, "association strength of " + m.category + "/" + m.pool);
    check_probability(m.prompt_rate, "prompt rate of " + m.category + "/" + m.pool);
    if (!pool_ids.contains(m.pool)) {
      throw Error(ErrorKind::validation, "membership refers to unknown pool '" + m.pool + "'");
    }
    if (!seen.emplace(m.category, m.pool).second) {
      throw Error(ErrorKind::validation, "category '" + m.category + "' joins pool '" + m.pool + "' twice");
    }
  }
  if (!(spec.min_activation > 0.0 && spec.min_activation < spec.max_activation)) {
    throw Error(ErrorKind::validation, "activation range must satisfy 0 < min < max");
  }
}

SyntheticSpec parse_synthetic_spec(std::string_view document, std::span<const ConceptLexicon> lexicons) {
  json root;
  try {
    root = json::parse(document.begin(), document.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::schema, std::string("synthetic spec is not valid JSON: ") + e.what());
  }
  SyntheticSpec spec;
  try {
    spec.layer = root.value("layer", spec.layer);
    spec.texts_per_feature = root.value("texts_per_feature", spec.texts_per_feature);
    if (root.contains("activation_range")) {
      spec.min_activation = root["activation_range"].at(0).get<double>();
      spec.max_activation = root["activation_range"].at(1).get<double>();
    }
    for (const json& p : root.at("pools")) {
      FeaturePool pool{p.at("id").get<std::string>(), p.at("size").get<std::uint32_t>(), {}};
      for (const json& inj : p.value("injections", json::array())) {
        KeywordInjection injection;
        injection.rate = inj.at("rate").get<double>();
        if (inj.contains("lexicon")) {
          const auto& lex = find_lexicon(lexicons, inj["lexicon"].get<std::string>());
          injection.label = lex.category_id;
          injection.keywords = lex.terms;
        } else {
          injection.label = inj.value("label", std::string("keywords"));
          injection.keywords = inj.at("keywords").get<std::vector<std::string>>();
        }
        pool.injections.push_back(std::move(injection));
      }
      spec.pools.push_back(std::move(pool));
    }
    for (const json& m : root.at("memberships")) {
      spec.memberships.push_back({m.at("category").get<std::string>(), m.at("pool").get<std::string>(),
                                  m.value("strength", 1.0), m.value("prompt_rate", 1.0)});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::schema, std::string("synthetic spec: ") + e.what());
  }
  return spec;
}

json to_json(const SyntheticSpec& spec) {
  json pools = json::array();
  for (const auto& pool : spec.pools) {
    json injections = json::array();
    for (const auto& inj : pool.injections) {
      injections.push_back({{"label", inj.label}, {"keywords", inj.keywords}, {"rate", inj.rate}});
    }
    pools.push_back({{"id", pool.id}, {"size", pool.size}, {"injections", std::move(injections)}});
  }
  json memberships = json::array();
  for (const auto& m : spec.memberships) {
    memberships.push_back(
        {{"category", m.category}, {"pool", m.pool}, {"strength", m.strength}, {"prompt_rate", m.prompt_rate}});
  }
  return {{"layer", spec.layer},
          {"texts_per_feature", spec.texts_per_feature},
          {"activation_range", {spec.min_activation, spec.max_activation}},
          {"pools", std::move(pools)},
          {"memberships", std::move(memberships)}};
}

SyntheticSpec default_synthetic_spec(std::span<const ConceptLexicon> lexicons) {
  SyntheticSpec spec;
  std::vector<KeywordInjection> crime;
  std::vector<KeywordInjection> regions;
  for (const auto& lex : lexicons) {
    if (lex.kind == LexiconKind::crime_index) crime.push_back({lex.category_id, lex.terms, 0.02});
    if (lex.kind == LexiconKind::geo_region) regions.push_back({lex.category_id, lex.terms, 0.01});
  }

  FeaturePool shared{"shared_violence", 40, {}};
  for (auto inj : crime) {
    inj.rate = 0.06;
    shared.injections.push_back(std::move(inj));
  }
  spec.pools.push_back(std::move(shared));

  for (const auto& lex : lexicons) {
    if (lex.kind == LexiconKind::religion) {
      FeaturePool pool{lex.category_id + "_private", 60, crime};
      pool.injections.insert(pool.injections.end(), regions.begin(), regions.end());
      spec.pools.push_back(std::move(pool));
      spec.memberships.push_back({lex.category_id, lex.category_id + "_private", 1.0, 0.25});
      spec.memberships.push_back({lex.category_id, "shared_violence", 0.3, 0.5});
    } else if (lex.kind == LexiconKind::bias_probe) {
      FeaturePool pool{lex.category_id + "_private", 30, crime};
      for (auto& inj : pool.injections) inj.rate = 0.10;
      spec.pools.push_back(std::move(pool));
      spec.memberships.push_back({lex.category_id, lex.category_id + "_private", 1.0, 0.5});
      spec.memberships.push_back({lex.category_id, "shared_violence", 1.0, 0.5});
    }
  }
  return spec;
}

// ---- source -------------------------------------------------------------------

SyntheticSource::SyntheticSource(SyntheticSpec spec, std::uint64_t seed, TargetRegistry registry)
    : spec_(std::move(spec)), seed_(seed), registry_(std::move(registry)) {
  std::uint32_t smallest = UINT32_MAX;
  for (const auto& target : registry_.targets()) smallest = std::min(smallest, target.feature_count);
  validate_synthetic_spec(spec_, smallest);
  for (const auto& pool : spec_.pools) {
    slots_.push_back({&pool, used_indices_});
    used_indices_ += pool.size;
  }
}

const SyntheticSource::PoolSlot& SyntheticSource::slot(std::string_view pool) const {
  for (const auto& s : slots_) {
    if (s.pool->id == pool) return s;
  }
  throw Error(ErrorKind::not_found, "no synthetic pool '" + std::string(pool) + "'");
}

std::vector<bool> SyntheticSource::links(const SaeTarget& target, const PoolMembership& membership) const {
  const PoolSlot& s = slot(membership.pool);
  SyntheticRng rng(derive_seed(seed_, {"link", target.label(), membership.category, membership.pool}));
  std::vector<bool> linked(s.pool->size);
  for (std::uint32_t j = 0; j < s.pool->size; ++j) linked[j] = rng.uniform() < membership.strength;
  return linked;
}

ActivationRecord SyntheticSource::fetch_top_features(const SaeTarget& target, const Prompt& prompt,
                                                     std::size_t k) {
  if (k == 0) throw Error(ErrorKind::validation, "k must be at least 1");
  const SaeTarget& known = registry_.require(target.id());

  ActivationRecord record;
  record.prompt = prompt;
  record.target = known;
  record.retrieved_at = "1970-01-01T00:00:00Z";
  record.provenance = Provenance::synthetic;

  bool member = false;
  SyntheticRng rng(derive_seed(seed_, {"prompt", known.label(), prompt.category_id, prompt.text}));
  const double span = spec_.max_activation - spec_.min_activation;
  for (const auto& m : spec_.memberships) {
    if (m.category != prompt.category_id) continue;
    member = true;
    const PoolSlot& s = slot(m.pool);
    const std::vector<bool> linked = links(known, m);
    for (std::uint32_t j = 0; j < s.pool->size; ++j) {
      if (!linked[j]) continue;
      const double include = rng.uniform();
      const double value = rng.uniform();
      if (include >= m.prompt_rate) continue;
      FeatureActivation feature;
      feature.key = {known.id(), spec_.layer, s.offset + j};
      feature.activation_value = spec_.min_activation + span * value;
      record.features.push_back(std::move(feature));
    }
  }
  if (!member) {
    throw Error(ErrorKind::configuration,
                "synthetic spec has no pool membership for category '" + prompt.category_id + "'");
  }
  canonicalize(record, k);
  for (auto& feature : record.features) feature.top_texts = texts_for(feature.key);
  return record;
}

std::vector<std::string> SyntheticSource::texts_for(const FeatureKey& key) const {
  const PoolSlot* owner = nullptr;
  for (const auto& s : slots_) {
    if (key.index >= s.offset && key.index < s.offset + s.pool->size) owner = &s;
  }
  SyntheticRng rng(derive_seed(seed_, {"texts", key.target.label(), std::to_string(key.layer),
                                       std::to_string(key.index)}));
  std::vector<std::string> texts;
  texts.reserve(spec_.texts_per_feature);
  for (std::size_t i = 0; i < spec_.texts_per_feature; ++i) {
    texts.push_back(synthesize_text(rng, owner->pool->injections));
  }
  return texts;
}

std::vector<std::string> SyntheticSource::fetch_feature_texts(const FeatureKey& key, std::size_t max_texts) {
  registry_.require(key.target);
  if (key.layer != spec_.layer || key.index >= used_indices_) {
    throw Error(ErrorKind::not_found, "synthetic source has no feature " + key.target.label() + "@" +
                                          std::to_string(key.layer) + "/" + std::to_string(key.index));
  }
  std::vector<std::string> texts = texts_for(key);
  if (texts.size() > max_texts) texts.resize(max_texts);
  return texts;
}

std::vector<FeatureKey> SyntheticSource::planted_links(const SaeTarget& target, std::string_view category,
                                                       std::string_view pool) const {
  auto it = std::find_if(spec_.memberships.begin(), spec_.memberships.end(),
                         [&](const PoolMembership& m) { return m.category == category && m.pool == pool; });
  if (it == spec_.memberships.end()) return {};
  const PoolSlot& s = slot(pool);
  const std::vector<bool> linked = links(target, *it);
  std::vector<FeatureKey> out;
  for (std::uint32_t j = 0; j < s.pool->size; ++j) {
    if (linked[j]) out.push_back({target.id(), spec_.layer, s.offset + j});
  }
  return out;
}

std::vector<FeatureKey> SyntheticSource::pool_features(const SaeTarget& target, std::string_view pool) const {
  const PoolSlot& s = slot(pool);
  std::vector<FeatureKey> out;
  for (std::uint32_t j = 0; j < s.pool->size; ++j) out.push_back({target.id(), spec_.layer, s.offset + j});
  return out;
}

std::unique_ptr<ActivationSource> make_synthetic_source(SyntheticSpec spec, std::uint64_t seed,
                                                        TargetRegistry registry) {
  return std::make_unique<SyntheticSource>(std::move(spec), seed, std::move(registry));
}

}  // namespace saeprobe
