#include "cetk/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <set>
#include <stdexcept>

#include "cetk/random.hpp"

namespace cetk {

namespace {

// Embedding layout. Dimension 0 carries the causal connectives, 1 and 2 the
// shared "cause-ness" and "effect-ness" components, then one axis per family,
// then a block for everything else.
constexpr std::size_t kConnectiveAxis = 0;
constexpr std::size_t kCauseAxis = 1;
constexpr std::size_t kEffectAxis = 2;
constexpr std::size_t kFirstFamilyAxis = 3;
constexpr std::size_t kNeutralAxes = 8;

constexpr double kConnectiveNorm = 3.0;
constexpr double kSharedWeight = 0.6;
constexpr double kFamilyWeight = 0.8;
constexpr double kFunctionNorm = 0.15;

const std::set<std::string>& connectives() {
  static const std::set<std::string> words = {"causes", "leads",    "because", "gives",
                                               "triggers", "caused", "results"};
  return words;
}

const std::set<std::string>& function_words() {
  static const std::set<std::string> words = {
      "i",  "me", "my",   "a",    "the", "to",   "of",  "by", "in",    "is", "for",
      "on", "at", "and",  "with", "us",  "we",   "are", "was", "there", "this", "all",
      "an", "it", "just", "so",   "has", "have", "about"};
  return words;
}

// A template item is either a literal word or a role placeholder.
struct Item {
  std::string word;
  std::optional<Role> slot;
};

using Template = std::vector<Item>;

Template parse_template(const std::string& pattern) {
  Template out;
  std::size_t i = 0;
  while (i < pattern.size()) {
    std::size_t j = pattern.find(' ', i);
    if (j == std::string::npos) j = pattern.size();
    const std::string w = pattern.substr(i, j - i);
    if (w == "{C}") {
      out.push_back({"", Role::Cause});
    } else if (w == "{E}") {
      out.push_back({"", Role::Effect});
    } else if (!w.empty()) {
      out.push_back({w, std::nullopt});
    }
    i = j + 1;
  }
  return out;
}

const std::vector<Template>& causal_templates() {
  static const std::vector<Template> t = [] {
    std::vector<Template> v;
    for (const char* p : {"honestly {C} causes {E} for me", "i swear {C} always leads to {E}",
                          "i get {E} because of {C} every time",
                          "{C} gives me {E} every single week", "my doctor says {C} triggers {E}",
                          "{E} is caused by {C} in my case", "all this {C} results in {E} lately"}) {
      v.push_back(parse_template(p));
    }
    return v;
  }();
  return t;
}

const std::vector<Template>& distractor_templates() {
  static const std::vector<Template> t = [] {
    std::vector<Template> v;
    for (const char* p : {"just finished a long morning run in the park",
                          "the weather today is lovely and calm", "talked with my friends about {C} at lunch today",
                          "reading a long article on {E} this morning",
                          "the new cafe downtown has really great coffee and cake",
                          "watching a movie with friends tonight at home",
                          "my sister visited us for the weekend finally",
                          "we are planning a trip to the mountains soon",
                          "{C} was the topic of the podcast today",
                          "there is a documentary about {E} on tonight"}) {
      v.push_back(parse_template(p));
    }
    return v;
  }();
  return t;
}

std::vector<std::string> split_words(const std::string& phrase) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i <= phrase.size()) {
    std::size_t j = phrase.find(' ', i);
    if (j == std::string::npos) j = phrase.size();
    if (j > i) out.push_back(phrase.substr(i, j - i));
    i = j + 1;
  }
  return out;
}

class VectorFactory {
 public:
  VectorFactory(std::size_t dim, double noise, std::uint64_t seed)
      : dim_(dim), noise_(noise), rng_(seed) {}

  Vector noisy() {
    Vector v(dim_);
    for (double& x : v) x = noise_ * rng_.normal();
    return v;
  }

  Vector neutral(double norm) {
    Vector dir(kNeutralAxes);
    double n2 = 0.0;
    for (double& x : dir) {
      x = rng_.normal();
      n2 += x * x;
    }
    Vector v = noisy();
    const double scale = norm / std::sqrt(n2);
    for (std::size_t i = 0; i < kNeutralAxes; ++i) v[dim_ - kNeutralAxes + i] += scale * dir[i];
    return v;
  }

 private:
  std::size_t dim_;
  double noise_;
  Rng rng_;
};

struct Generated {
  std::string text;
  std::vector<Span> spans;
  bool causal = false;
};

Generated realize(const Template& tmpl, const std::vector<std::string>& cause_words,
                  const std::vector<std::string>& effect_words, const std::string& ending) {
  Generated g;
  std::vector<std::string> words;
  for (const Item& item : tmpl) {
    if (!item.slot) {
      words.push_back(item.word);
      continue;
    }
    const auto& fill = *item.slot == Role::Cause ? cause_words : effect_words;
    const std::size_t start = words.size();
    words.insert(words.end(), fill.begin(), fill.end());
    g.spans.push_back({*item.slot, start, words.size()});
  }
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i > 0) g.text += ' ';
    g.text += words[i];
  }
  g.text += ending;
  return g;
}

}  // namespace

std::vector<SyntheticFamily> default_families() {
  return {
      {"stress", "Mental", Role::Cause, {"stress", "work stress", "exam pressure", "deadline pressure"}, true},
      {"smoking", "Substance", Role::Cause, {"smoking", "cigarettes", "heavy smoking", "vaping"}, true},
      {"alcohol", "Substance", Role::Cause, {"alcohol", "binge drinking", "cheap wine", "drinking"}, true},
      {"poor sleep", "Lifestyle", Role::Cause, {"poor sleep", "sleep deprivation", "late nights", "night shifts"}, true},
      {"junk food", "Diet", Role::Cause, {"junk food", "fast food", "sugary snacks", "soda"}, true},
      {"pollution", "Environment", Role::Cause, {"air pollution", "smog", "traffic fumes", "dust"}, true},
      {"solar", "Environment", Role::Cause, {"solar flares", "sunspots"}, false},
      {"headache", "Pain", Role::Effect, {"headaches", "migraines", "throbbing headaches"}, true},
      {"anxiety", "Mental health", Role::Effect, {"anxiety", "panic attacks", "constant worry"}, true},
      {"insomnia", "Sleep", Role::Effect, {"insomnia", "sleeplessness", "broken rest"}, true},
      {"cough", "Respiratory", Role::Effect, {"chronic cough", "wheezing", "coughing fits"}, true},
      {"weight gain", "Metabolic", Role::Effect, {"weight gain", "obesity", "belly fat"}, true},
      {"fatigue", "Energy", Role::Effect, {"fatigue", "exhaustion", "low energy"}, true},
  };
}

std::vector<SyntheticPair> default_pairs() {
  return {
      {"stress", "anxiety", 120},     {"stress", "headache", 80},   {"stress", "insomnia", 60},
      {"smoking", "cough", 110},      {"alcohol", "headache", 70},  {"alcohol", "fatigue", 40},
      {"poor sleep", "fatigue", 90},  {"junk food", "weight gain", 100},
      {"pollution", "cough", 64},     {"poor sleep", "anxiety", 48},
      {"smoking", "anxiety", 12},  // the rare pair
      {"solar", "fatigue", 6},     // the rare, unseeded family
  };
}

SyntheticCorpus generate_synthetic(const SyntheticConfig& config) {
  if (config.pair_scale == 0) throw std::invalid_argument("pair_scale must be positive");
  SyntheticCorpus corpus;
  corpus.families = default_families();
  corpus.pairs = default_pairs();
  // The rare unseeded family keeps its count so it stays under the cluster
  // min count at every scale.
  for (std::size_t i = 0; i + 1 < corpus.pairs.size(); ++i) {
    corpus.pairs[i].count *= config.pair_scale;
  }
  corpus.rare_pair = corpus.pairs[corpus.pairs.size() - 2];
  corpus.rare_family = corpus.pairs.back().cause;

  const std::size_t dim = kFirstFamilyAxis + corpus.families.size() + kNeutralAxes;
  corpus.embeddings = EmbeddingTable(dim);
  VectorFactory vf(dim, config.noise, config.seed ^ 0xA5A5A5A5ULL);

  // Family vocabularies.
  for (std::size_t f = 0; f < corpus.families.size(); ++f) {
    const auto& fam = corpus.families[f];
    const std::size_t shared = fam.role == Role::Cause ? kCauseAxis : kEffectAxis;
    for (const auto& phrase : fam.phrases) {
      for (const auto& w : split_words(phrase)) {
        if (corpus.embeddings.contains(w)) continue;
        Vector v = vf.noisy();
        v[shared] += kSharedWeight;
        v[kFirstFamilyAxis + f] += kFamilyWeight;
        corpus.embeddings.add(w, std::move(v));
      }
    }
  }
  for (const auto& w : connectives()) {
    Vector v = vf.noisy();
    v[kConnectiveAxis] += kConnectiveNorm;
    corpus.embeddings.add(w, std::move(v));
  }
  auto ensure_word = [&](const std::string& w) {
    if (corpus.embeddings.contains(w)) return;
    const bool fn = function_words().count(w) > 0;
    corpus.embeddings.add(w, vf.neutral(fn ? kFunctionNorm : 1.0));
  };
  for (const auto* group : {&causal_templates(), &distractor_templates()}) {
    for (const auto& tmpl : *group) {
      for (const auto& item : tmpl) {
        if (!item.slot) ensure_word(item.word);
      }
    }
  }

  auto family_index = [&](const std::string& label) {
    for (std::size_t i = 0; i < corpus.families.size(); ++i) {
      if (corpus.families[i].label == label) return i;
    }
    throw std::logic_error("unknown family " + label);
  };

  Rng rng(config.seed);
  auto pick_phrase = [&](std::size_t fam) -> const std::string& {
    const auto& ph = corpus.families[fam].phrases;
    return ph[static_cast<std::size_t>(rng.below(ph.size()))];
  };
  auto pick_ending = [&]() -> std::string {
    const auto r = rng.below(4);
    return r == 0 ? "." : (r == 1 ? "!" : "");
  };

  std::vector<Generated> sentences;
  std::map<std::string, std::map<std::string, std::size_t>> phrase_freq;  // family -> phrase
  const auto& causal = causal_templates();
  for (const auto& pair : corpus.pairs) {
    const std::size_t cf = family_index(pair.cause);
    const std::size_t ef = family_index(pair.effect);
    for (std::size_t n = 0; n < pair.count; ++n) {
      const std::string& cp = pick_phrase(cf);
      const std::string& ep = pick_phrase(ef);
      ++phrase_freq[pair.cause][cp];
      ++phrase_freq[pair.effect][ep];
      const auto& tmpl = causal[static_cast<std::size_t>(rng.below(causal.size()))];
      Generated g = realize(tmpl, split_words(cp), split_words(ep), pick_ending());
      g.causal = true;
      sentences.push_back(std::move(g));
    }
  }

  std::vector<std::size_t> cause_fams;
  std::vector<std::size_t> effect_fams;
  for (std::size_t i = 0; i < corpus.families.size(); ++i) {
    (corpus.families[i].role == Role::Cause ? cause_fams : effect_fams).push_back(i);
  }
  const auto& distractors = distractor_templates();
  for (std::size_t n = 0; n < config.non_causal; ++n) {
    const auto& tmpl = distractors[static_cast<std::size_t>(rng.below(distractors.size()))];
    const auto& cp = pick_phrase(cause_fams[static_cast<std::size_t>(rng.below(cause_fams.size()))]);
    const auto& ep =
        pick_phrase(effect_fams[static_cast<std::size_t>(rng.below(effect_fams.size()))]);
    Generated g = realize(tmpl, split_words(cp), split_words(ep), pick_ending());
    // Topic mentions in chatter are not cause/effect spans.
    g.spans.clear();
    sentences.push_back(std::move(g));
  }

  rng.shuffle(std::span<Generated>(sentences));

  // Filter fodder goes to the end so kept sentences keep their order.
  static const std::vector<std::string> extras = {
      "so tired today", "love this song", "good morning everyone", "coffee time",
      "is stress making everyone sick lately?", "why does my head hurt every morning?",
  };
  std::vector<std::string> extra_texts;
  for (std::size_t n = 0; n < config.filtered_extras; ++n) {
    extra_texts.push_back(extras[n % extras.size()]);
  }

  const std::size_t total = sentences.size() + extra_texts.size();
  const int width = static_cast<int>(std::to_string(total).size());
  auto make_id = [&](std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "syn%0*zu", width, i + 1);
    return std::string(buf);
  };
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    Tweet t;
    t.id = make_id(i);
    t.text = sentences[i].text;
    corpus.tweets.push_back(t);
    corpus.annotations.push_back({t.id + ":0", sentences[i].causal, sentences[i].spans});
  }
  for (std::size_t i = 0; i < extra_texts.size(); ++i) {
    Tweet t;
    t.id = make_id(sentences.size() + i);
    t.text = extra_texts[i];
    corpus.tweets.push_back(t);
  }

  // Seeds: first two phrases of each seeded family.
  for (const auto& fam : corpus.families) {
    if (!fam.seeded) continue;
    for (std::size_t i = 0; i < std::min<std::size_t>(2, fam.phrases.size()); ++i) {
      corpus.seeds.push_back({fam.phrases[i], fam.label, fam.parent});
    }
  }

  // Expected frequency tables.
  std::map<std::string, std::string> cluster_label;  // family -> cluster label
  std::map<std::string, std::size_t> family_count;
  for (const auto& fam : corpus.families) {
    std::size_t occurrences = 0;
    for (const auto& [phrase, n] : phrase_freq[fam.label]) occurrences += n;
    if (fam.seeded) {
      cluster_label[fam.label] = fam.label;
      family_count[fam.label] = occurrences + std::min<std::size_t>(2, fam.phrases.size());
    } else {
      // An unseeded family opens its cluster with its first phrase in
      // canonical order: most frequent, then lexicographically smallest.
      std::string best;
      std::size_t best_n = 0;
      for (const auto& [phrase, n] : phrase_freq[fam.label]) {
        if (n > best_n) {
          best = phrase;
          best_n = n;
        }
      }
      cluster_label[fam.label] = best;
      family_count[fam.label] = occurrences;
    }
  }
  std::set<std::string> surviving;
  for (const auto& [fam, count] : family_count) {
    if (count >= kDefaultMinClusterCount) {
      surviving.insert(fam);
      corpus.expected_cluster_counts[cluster_label[fam]] = count;
    }
  }

  corpus.min_edge = corpus.rare_pair.count + 1;
  for (const auto& p : corpus.pairs) {
    if (!surviving.count(p.cause) || !surviving.count(p.effect)) continue;
    if (&p != &corpus.pairs[corpus.pairs.size() - 2] && p.count < corpus.min_edge) {
      throw std::logic_error("pair design leaves another edge under the threshold");
    }
    if (p.count >= corpus.min_edge) {
      corpus.expected_edges[{cluster_label[p.cause], cluster_label[p.effect]}] = p.count;
    }
  }
  return corpus;
}

}  // namespace cetk
