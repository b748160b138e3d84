#include "truthsr/dataset.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

namespace truthsr {

namespace {

void validate(const Interaction& it) {
  check_data(!it.user_id.empty(), "interaction has empty user_id");
  check_data(!it.item_id.empty(), "interaction has empty item_id");
  check_data(it.timestamp >= 0, "interaction has negative timestamp");
}

std::vector<Interaction> dedup(std::vector<Interaction> in) {
  std::set<std::tuple<std::string, std::string, std::int64_t>> seen;
  std::vector<Interaction> out;
  out.reserve(in.size());
  for (auto& it : in) {
    if (seen.emplace(it.user_id, it.item_id, it.timestamp).second) {
      out.push_back(std::move(it));
    }
  }
  return out;
}

}  // namespace

Dataset Dataset::build(std::vector<Interaction> interactions) {
  Dataset d;
  d.interactions_ = dedup(std::move(interactions));
  check_data(!d.interactions_.empty(), "dataset is empty");
  for (const auto& it : d.interactions_) {
    validate(it);
    if (d.item_vocab_.emplace(it.item_id, static_cast<int>(d.item_names_.size())).second) {
      d.item_names_.push_back(it.item_id);
    }
  }
  check_data(d.item_names_.size() >= 2, "dataset needs at least two distinct items");
  d.build_indexes();
  return d;
}

Dataset Dataset::build_with_vocab(std::vector<Interaction> interactions,
                                  std::vector<std::string> vocab) {
  Dataset d;
  d.interactions_ = dedup(std::move(interactions));
  check_data(!d.interactions_.empty(), "dataset is empty");
  check_data(vocab.size() >= 2, "vocabulary needs at least two items");
  d.item_names_ = std::move(vocab);
  for (std::size_t i = 0; i < d.item_names_.size(); ++i) {
    check_data(d.item_vocab_.emplace(d.item_names_[i], static_cast<int>(i)).second,
               "duplicate item in vocabulary: " + d.item_names_[i]);
  }
  for (const auto& it : d.interactions_) {
    validate(it);
    check_data(d.item_vocab_.count(it.item_id) > 0,
               "item not covered by vocabulary: " + it.item_id);
  }
  d.build_indexes();
  return d;
}

void Dataset::build_indexes() {
  for (std::size_t pos = 0; pos < interactions_.size(); ++pos) {
    const auto& it = interactions_[pos];
    auto [uit, fresh] = user_index_.try_emplace(it.user_id);
    if (fresh) user_names_.push_back(it.user_id);
    uit->second.push_back(pos);
    item_index_[it.item_id].push_back(pos);
  }
  auto by_time = [this](std::size_t a, std::size_t b) {
    return interactions_[a].timestamp < interactions_[b].timestamp;
  };
  for (auto& [user, positions] : user_index_) {
    std::stable_sort(positions.begin(), positions.end(), by_time);
  }
  for (auto& [item, positions] : item_index_) {
    std::stable_sort(positions.begin(), positions.end(), by_time);
  }
}

const std::vector<std::size_t>& Dataset::user_positions(const std::string& user) const {
  auto it = user_index_.find(user);
  check_data(it != user_index_.end(), "unknown user: " + user);
  return it->second;
}

const std::vector<std::size_t>& Dataset::item_positions(const std::string& item) const {
  auto it = item_index_.find(item);
  check_data(it != item_index_.end(), "unknown item: " + item);
  return it->second;
}

int Dataset::item_id(const std::string& item) const {
  auto it = item_vocab_.find(item);
  check_data(it != item_vocab_.end(), "unknown item: " + item);
  return it->second;
}

int SplitDataset::item_id(const std::string& item) const {
  auto it = item_vocab.find(item);
  check_data(it != item_vocab.end(), "unknown item: " + item);
  return it->second;
}

Dataset load_interactions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open interaction file: " + path.string());

  std::vector<Interaction> interactions;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    std::ostringstream os;
    os << path.string() << ":" << line_no << ": " << what;
    throw ParseError(os.str());
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) fail("line is not a JSON object");
    Interaction it;
    for (const char* key : {"user", "item", "ts"}) {
      if (!j.contains(key)) fail(std::string("missing \"") + key + "\" field");
    }
    if (!j["user"].is_string() || j["user"].get<std::string>().empty()) {
      fail("\"user\" must be a non-empty string");
    }
    if (!j["item"].is_string() || j["item"].get<std::string>().empty()) {
      fail("\"item\" must be a non-empty string");
    }
    if (!j["ts"].is_number_integer() || j["ts"].get<std::int64_t>() < 0) {
      fail("\"ts\" must be a non-negative integer");
    }
    it.user_id = j["user"].get<std::string>();
    it.item_id = j["item"].get<std::string>();
    it.timestamp = j["ts"].get<std::int64_t>();
    for (auto [key, dst] : {std::pair{"review_id", &it.review_id}, {"image_id", &it.image_id}}) {
      if (j.contains(key) && !j[key].is_null()) {
        if (!j[key].is_string()) fail(std::string("\"") + key + "\" must be a string or null");
        *dst = j[key].get<std::string>();
      }
    }
    interactions.push_back(std::move(it));
  }

  if (interactions.empty()) throw DataError("empty interaction file: " + path.string());
  return Dataset::build(std::move(interactions));
}

void save_interactions(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open interaction file for writing: " + path.string());
  for (const auto& it : d.interactions()) {
    nlohmann::json j;
    j["user"] = it.user_id;
    j["item"] = it.item_id;
    j["ts"] = it.timestamp;
    if (!it.review_id.empty()) j["review_id"] = it.review_id;
    if (!it.image_id.empty()) j["image_id"] = it.image_id;
    out << j.dump() << '\n';
  }
  if (!out) throw DataError("failed writing interaction file: " + path.string());
}

Dataset k_core_filter(const Dataset& d, int k) {
  check_data(k >= 1, "k_core_filter requires k >= 1");

  std::vector<Interaction> retained = d.interactions();
  for (;;) {
    std::unordered_map<std::string, int> user_cnt, item_cnt;
    for (const auto& it : retained) {
      ++user_cnt[it.user_id];
      ++item_cnt[it.item_id];
    }
    std::vector<Interaction> next;
    next.reserve(retained.size());
    for (auto& it : retained) {
      if (user_cnt[it.user_id] >= k && item_cnt[it.item_id] >= k) {
        next.push_back(std::move(it));
      }
    }
    const bool stable = next.size() == retained.size();
    retained = std::move(next);
    if (stable) break;
    if (retained.empty()) break;
  }

  std::set<std::string> items;
  for (const auto& it : retained) items.insert(it.item_id);
  if (retained.empty() || items.size() < 2) {
    throw DataError("k-core filter (k=" + std::to_string(k) + ") left an empty dataset");
  }
  return Dataset::build(std::move(retained));
}

SplitDataset chronological_split(const Dataset& d) {
  SplitDataset split;
  split.item_names = d.item_names();
  for (std::size_t i = 0; i < split.item_names.size(); ++i) {
    split.item_vocab.emplace(split.item_names[i], static_cast<int>(i));
  }

  std::vector<Interaction> train_pool;
  for (const auto& user : d.users()) {
    const auto& positions = d.user_positions(user);
    if (positions.size() < 3) {
      ++split.dropped_users;
      continue;
    }
    UserSplit us;
    us.user = user;
    for (std::size_t i = 0; i + 2 < positions.size(); ++i) {
      us.train_seq.push_back(d.interactions()[positions[i]]);
      train_pool.push_back(d.interactions()[positions[i]]);
    }
    us.val_target = d.interactions()[positions[positions.size() - 2]];
    us.test_target = d.interactions()[positions[positions.size() - 1]];
    split.users.push_back(std::move(us));
  }

  if (split.users.empty()) {
    throw DataError("chronological_split: no users with at least 3 interactions");
  }
  split.train = Dataset::build_with_vocab(std::move(train_pool), split.item_names);
  return split;
}

}  // namespace truthsr
