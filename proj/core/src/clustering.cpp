#include "cetk/clustering.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>

#include "cetk/error.hpp"
#include "cetk/text.hpp"
#include "json.hpp"

namespace cetk {

using ojson = nlohmann::ordered_json;

void ClusterConfig::validate() const {
  if (!(similarity_threshold > 0.0 && similarity_threshold <= 1.0)) {
    throw std::invalid_argument("similarity threshold must be in (0, 1]");
  }
  if (min_count < 1) throw std::invalid_argument("min_count must be at least 1");
}

const Cluster* ClusterSet::find(std::size_t id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &clusters_[it->second];
}

const Cluster* ClusterSet::find_label(std::string_view label) const {
  for (const auto& c : clusters_) {
    if (c.label == label) return &c;
  }
  return nullptr;
}

const Cluster* ClusterSet::find_member(std::string_view phrase) const {
  auto it = member_index_.find(std::string(phrase));
  return it == member_index_.end() ? nullptr : find(it->second);
}

Cluster& ClusterSet::mutable_cluster(std::size_t id) {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw Error(ErrorCode::UnknownCluster, std::to_string(id));
  return clusters_[it->second];
}

Cluster& ClusterSet::create(std::string label, std::string parent) {
  Cluster c;
  c.id = next_id_++;
  c.label = std::move(label);
  c.parent = std::move(parent);
  by_id_[c.id] = clusters_.size();
  clusters_.push_back(std::move(c));
  return clusters_.back();
}

void ClusterSet::add_member(std::size_t cluster_id, std::string phrase, Vector vector) {
  Cluster& c = mutable_cluster(cluster_id);
  auto it = member_index_.find(phrase);
  if (it == member_index_.end() || it->second > cluster_id) member_index_[phrase] = cluster_id;
  c.members.push_back({std::move(phrase), std::move(vector)});
}

void ClusterSet::add_count(std::size_t cluster_id, std::size_t n) {
  mutable_cluster(cluster_id).count += n;
}

std::size_t ClusterSet::total_count() const {
  std::size_t t = 0;
  for (const auto& c : clusters_) t += c.count;
  return t;
}

void ClusterSet::insert_existing(Cluster cluster) {
  next_id_ = std::max(next_id_, cluster.id + 1);
  by_id_[cluster.id] = clusters_.size();
  for (const auto& m : cluster.members) {
    auto it = member_index_.find(m.phrase);
    if (it == member_index_.end() || it->second > cluster.id) member_index_[m.phrase] = cluster.id;
  }
  clusters_.push_back(std::move(cluster));
}

Vector phrase_vector(std::string_view phrase, const EmbeddingTable& table) {
  const auto tokens = tokenize(phrase);
  if (tokens.empty()) throw Error(ErrorCode::EmptyPhrase, "phrase '" + std::string(phrase) + "'");
  return mean_pool(std::span<const Token>(tokens), table);
}

ClusterSet seed_clusters(std::span<const SeedPhrase> seeds, const EmbeddingTable& table) {
  if (seeds.empty()) throw Error(ErrorCode::EmptySeed, "no seed phrases");
  ClusterSet set;
  std::map<std::string, std::size_t> label_to_id;
  for (const auto& seed : seeds) {
    if (seed.cluster.empty()) throw Error(ErrorCode::EmptySeed, "seed with empty cluster label");
    auto it = label_to_id.find(seed.cluster);
    if (it == label_to_id.end()) {
      const std::size_t id = set.create(seed.cluster, seed.parent).id;
      it = label_to_id.emplace(seed.cluster, id).first;
    }
    const Cluster* c = set.find(it->second);
    const bool present = std::any_of(c->members.begin(), c->members.end(),
                                     [&](const ClusterMember& m) { return m.phrase == seed.phrase; });
    if (!present) set.add_member(it->second, seed.phrase, phrase_vector(seed.phrase, table));
    set.add_count(it->second, 1);
  }
  return set;
}

Assignment assign(std::string_view phrase, ClusterSet& clusters, const EmbeddingTable& table,
                  const ClusterConfig& config, std::size_t occurrences) {
  config.validate();
  if (const Cluster* c = clusters.find_member(phrase)) {
    clusters.add_count(c->id, occurrences);
    return {c->id, 1.0, false};
  }
  Vector v = phrase_vector(phrase, table);

  double best = -2.0;
  std::size_t best_id = 0;
  bool found = false;
  for (const auto& c : clusters.clusters()) {
    for (const auto& m : c.members) {
      const double s = cosine(v, m.vector);
      if (!found || s > best || (s == best && c.id < best_id)) {
        best = s;
        best_id = c.id;
        found = true;
      }
    }
  }

  if (found && best >= config.similarity_threshold) {
    clusters.add_member(best_id, std::string(phrase), std::move(v));
    clusters.add_count(best_id, occurrences);
    return {best_id, best, false};
  }
  Cluster& fresh = clusters.create(std::string(phrase), std::string(kAutoClusterParent));
  const std::size_t id = fresh.id;
  clusters.add_member(id, std::string(phrase), std::move(v));
  clusters.add_count(id, occurrences);
  return {id, found ? best : 0.0, true};
}

ClusterSet prune(const ClusterSet& clusters, const ClusterConfig& config) {
  return clusters.filtered([&](const Cluster& c) { return c.count >= config.min_count; });
}

std::vector<ClusterReportRow> cluster_report(const ClusterSet& clusters, std::size_t k) {
  std::vector<ClusterReportRow> rows;
  for (const auto& c : clusters.clusters()) rows.push_back({c.id, c.parent, c.label, c.count});
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return a.count != b.count ? a.count > b.count : a.id < b.id;
  });
  if (rows.size() > k) rows.resize(k);
  return rows;
}

std::vector<std::pair<std::string, std::size_t>> canonical_phrase_order(
    std::span<const std::string> phrases) {
  std::map<std::string, std::size_t> freq;
  for (const auto& p : phrases) ++freq[p];
  std::vector<std::pair<std::string, std::size_t>> out(freq.begin(), freq.end());
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

SeedPhrase seed_from_json(std::string_view text) {
  try {
    const auto obj = ojson::parse(text);
    SeedPhrase s;
    s.phrase = obj.at("phrase").get<std::string>();
    s.cluster = obj.at("cluster").get<std::string>();
    s.parent = obj.at("parent").get<std::string>();
    return s;
  } catch (const ojson::exception& e) {
    throw Error(ErrorCode::SchemaError, e.what());
  }
}

std::string seed_to_json(const SeedPhrase& seed) {
  ojson obj;
  obj["phrase"] = seed.phrase;
  obj["cluster"] = seed.cluster;
  obj["parent"] = seed.parent;
  return obj.dump();
}

std::vector<SeedPhrase> read_seeds(std::istream& in) {
  std::vector<SeedPhrase> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(seed_from_json(line));
    } catch (const Error& e) {
      throw Error(ErrorCode::SchemaError, e.detail(), line_no);
    }
  }
  return out;
}

std::string cluster_to_json(const Cluster& cluster) {
  ojson members = ojson::array();
  for (const auto& m : cluster.members) members.push_back(m.phrase);
  ojson obj;
  obj["id"] = cluster.id;
  obj["label"] = cluster.label;
  obj["parent"] = cluster.parent;
  obj["count"] = cluster.count;
  obj["members"] = std::move(members);
  return obj.dump();
}

void write_clusters(const ClusterSet& clusters, std::ostream& out) {
  for (const auto& c : clusters.clusters()) out << cluster_to_json(c) << '\n';
}

ClusterSet read_clusters(std::istream& in, const EmbeddingTable& table) {
  ClusterSet set;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto obj = ojson::parse(line);
      Cluster c;
      c.id = obj.at("id").get<std::size_t>();
      c.label = obj.at("label").get<std::string>();
      c.parent = obj.at("parent").get<std::string>();
      c.count = obj.at("count").get<std::size_t>();
      for (const auto& m : obj.at("members")) {
        auto phrase = m.get<std::string>();
        Vector v = phrase_vector(phrase, table);
        c.members.push_back({std::move(phrase), std::move(v)});
      }
      if (c.members.empty()) throw Error(ErrorCode::SchemaError, "cluster without members");
      if (set.find(c.id)) throw Error(ErrorCode::SchemaError, "duplicate cluster id");
      set.insert_existing(std::move(c));
    } catch (const ojson::exception& e) {
      throw Error(ErrorCode::SchemaError, e.what(), line_no);
    }
  }
  return set;
}

}  // namespace cetk
