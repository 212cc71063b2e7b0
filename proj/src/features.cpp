#include "embercall/features.hpp"

#include <algorithm>
#include <set>
#include <tuple>
#include <unordered_map>

#include "embercall/models/serialize.hpp"

namespace embercall {

Variant parse_variant(std::string_view s) {
  if (s == "M1") return Variant::M1;
  if (s == "M2") return Variant::M2;
  if (s == "M3") return Variant::M3;
  if (s == "M4") return Variant::M4;
  if (s == "concat5s") return Variant::Concat5s;
  if (s == "logit_softmax") return Variant::LogitSoftmax;
  throw ValidationError("unknown feature variant '" + std::string(s) + "' (expected M1..M4, concat5s or logit_softmax)");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::M1:
      return "M1";
    case Variant::M2:
      return "M2";
    case Variant::M3:
      return "M3";
    case Variant::M4:
      return "M4";
    case Variant::Concat5s:
      return "concat5s";
    case Variant::LogitSoftmax:
      return "logit_softmax";
  }
  return {};
}

std::size_t feature_dim(Variant v, std::size_t embed_dim, std::size_t class_dim) {
  switch (v) {
    case Variant::M1:
      return embed_dim;
    case Variant::M2:
    case Variant::M3:
    case Variant::Concat5s:
      return 2 * embed_dim;
    case Variant::M4:
      return 3 * embed_dim;
    case Variant::LogitSoftmax:
      return class_dim;
  }
  return 0;
}

namespace {

std::unordered_map<int, const Token*> by_start(std::span<const Token> tokens) {
  std::unordered_map<int, const Token*> m;
  for (const auto& t : tokens) m.emplace(t.start_time, &t);
  return m;
}

template <class F>
void for_each_interval(std::span<const Token> tokens, F&& emit) {
  if (tokens.empty()) return;
  const auto index = by_start(tokens);
  int last = 0;
  for (const auto& t : tokens) last = std::max(last, t.start_time);
  for (int k = 0; 5 * k + 2 <= last; ++k) {
    const auto a = index.find(5 * k);
    const auto b = index.find(5 * k + 2);
    if (a == index.end() || b == index.end()) continue;
    if (a->second->values.size() != b->second->values.size())
      throw ValidationError("align_5s: tokens of different dimension");
    emit(k, a->second->values, b->second->values);
  }
}

void append(std::vector<double>& out, std::span<const double> v) { out.insert(out.end(), v.begin(), v.end()); }

}  // namespace

std::vector<IntervalFeature> align_5s(std::span<const Token> tokens) {
  std::vector<IntervalFeature> out;
  for_each_interval(tokens, [&](int k, std::span<const float> a, std::span<const float> b) {
    IntervalFeature f{k, std::vector<double>(a.size())};
    for (std::size_t i = 0; i < a.size(); ++i) f.values[i] = (static_cast<double>(a[i]) + static_cast<double>(b[i])) / 2.0;
    out.push_back(std::move(f));
  });
  return out;
}

std::vector<IntervalFeature> concat_5s(std::span<const Token> tokens) {
  std::vector<IntervalFeature> out;
  for_each_interval(tokens, [&](int k, std::span<const float> a, std::span<const float> b) {
    IntervalFeature f{k, {}};
    f.values.reserve(a.size() + b.size());
    f.values.insert(f.values.end(), a.begin(), a.end());
    f.values.insert(f.values.end(), b.begin(), b.end());
    out.push_back(std::move(f));
  });
  return out;
}

std::vector<double> track_embedding(std::span<const Token> tokens) {
  if (tokens.empty()) throw ValidationError("track_embedding: no tokens");
  std::vector<double> mean(tokens.front().values.size(), 0.0);
  for (const auto& t : tokens) {
    if (t.values.size() != mean.size()) throw ValidationError("track_embedding: tokens of different dimension");
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += t.values[i];
  }
  for (double& v : mean) v /= static_cast<double>(tokens.size());
  return mean;
}

std::optional<std::vector<double>> build_context(Variant variant, std::span<const double> current,
                                                 std::optional<std::span<const double>> next,
                                                 std::optional<std::span<const double>> track) {
  const bool needs_next = variant == Variant::M2 || variant == Variant::M4;
  const bool needs_track = variant == Variant::M3 || variant == Variant::M4;
  if (variant == Variant::Concat5s || variant == Variant::LogitSoftmax)
    throw ValidationError("build_context: " + to_string(variant) + " is not a context variant");
  if ((needs_next && !next) || (needs_track && !track)) return std::nullopt;
  std::vector<double> out(current.begin(), current.end());
  if (needs_next) append(out, *next);
  if (needs_track) append(out, *track);
  return out;
}

FeatureVector logit_features(std::span<const float> logits) {
  FeatureVector f;
  f.variant = Variant::LogitSoftmax;
  f.values = softmax(logits);
  return f;
}

std::vector<FeatureVector> interpolate_groups(const std::map<std::string, std::vector<std::vector<double>>>& tokens_by_class,
                                              int group_size, int count, std::uint64_t seed) {
  if (group_size < 2) throw ValidationError("interpolate_groups: group size must be at least 2");
  std::vector<const std::string*> classes;
  for (const auto& [label, tokens] : tokens_by_class)
    if (!tokens.empty()) classes.push_back(&label);
  if (classes.size() < static_cast<std::size_t>(group_size))
    throw ValidationError("interpolate_groups: need at least " + std::to_string(group_size) +
                          " classes with tokens, have " + std::to_string(classes.size()));

  Rng rng(seed);
  std::vector<std::size_t> deck;
  auto refill = [&] {
    deck.resize(classes.size());
    for (std::size_t i = 0; i < deck.size(); ++i) deck[i] = i;
    rng.shuffle(deck);
  };
  std::vector<FeatureVector> out;
  for (int n = 0; n < count; ++n) {
    std::vector<std::size_t> group;
    while (group.size() < static_cast<std::size_t>(group_size)) {
      if (deck.empty()) refill();
      // Take the first card not already in this group; a fresh deck always has one.
      auto it = std::find_if(deck.rbegin(), deck.rend(), [&](std::size_t c) {
        return std::find(group.begin(), group.end(), c) == group.end();
      });
      if (it == deck.rend()) {
        refill();
        continue;
      }
      group.push_back(*it);
      deck.erase(std::next(it).base());
    }
    FeatureVector f;
    f.variant = Variant::M1;
    std::set<std::string> labels;
    for (std::size_t c : group) {
      const auto& tokens = tokens_by_class.at(*classes[c]);
      const auto& tok = tokens[rng.index(tokens.size())];
      if (f.values.empty()) f.values.assign(tok.size(), 0.0);
      if (tok.size() != f.values.size()) throw ValidationError("interpolate_groups: tokens of different dimension");
      for (std::size_t i = 0; i < tok.size(); ++i) f.values[i] += tok[i];
      labels.insert(*classes[c]);
    }
    for (double& v : f.values) v /= static_cast<double>(group.size());
    f.labels.assign(labels.begin(), labels.end());
    f.weight = 1.0 / static_cast<double>(f.labels.size());
    out.push_back(std::move(f));
  }
  return out;
}

namespace {

std::vector<double> to_double(std::span<const float> v) { return {v.begin(), v.end()}; }

std::vector<std::string> merge_labels(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::set<std::string> s(a.begin(), a.end());
  s.insert(b.begin(), b.end());
  if (s.size() > 1) s.erase(kNoCall);
  return {s.begin(), s.end()};
}

}  // namespace

FeatureSet assemble_features(std::span<const EmbeddingRow* const> rows,
                             std::span<const std::vector<std::string>> labels, Variant variant) {
  if (rows.size() != labels.size()) throw ValidationError("assemble_features: rows and labels differ in length");
  FeatureSet set;
  set.variant = variant;

  auto emit = [&](std::vector<double> values, std::vector<std::string> lbls, const std::string& track_stem) {
    FeatureVector f;
    f.values = std::move(values);
    f.variant = variant;
    f.labels = std::move(lbls);
    if (f.labels.empty()) f.labels = {kNoCall};
    f.weight = 1.0 / static_cast<double>(f.labels.size());
    set.features.push_back(std::move(f));
    set.groups.push_back(parent_stem(track_stem));
    ++set.stats.emitted;
  };

  if (variant == Variant::LogitSoftmax || variant == Variant::M1) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      auto values = variant == Variant::M1 ? to_double(rows[i]->embedding) : logit_features(rows[i]->prediction_vec).values;
      emit(std::move(values), labels[i], rows[i]->track_stem);
    }
    return set;
  }

  // Group rows into (track_stem, track_type) channels, keeping first-seen order.
  using Key = std::pair<std::string, std::string>;
  std::map<Key, std::vector<std::size_t>> channels;
  std::vector<Key> order;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Key key{rows[i]->track_stem, rows[i]->track_type};
    auto [it, inserted] = channels.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(i);
  }

  for (const auto& key : order) {
    auto idx = channels[key];
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return rows[a]->start_time < rows[b]->start_time; });
    std::vector<Token> tokens;
    for (std::size_t i : idx) tokens.push_back({rows[i]->start_time, rows[i]->embedding});

    if (variant == Variant::Concat5s) {
      std::unordered_map<int, std::size_t> at;
      for (std::size_t i : idx) at.emplace(rows[i]->start_time, i);
      for (auto& f : concat_5s(tokens))
        emit(std::move(f.values), merge_labels(labels[at[5 * f.interval]], labels[at[5 * f.interval + 2]]), key.first);
      continue;
    }

    const std::vector<double> track = track_embedding(tokens);
    std::unordered_map<int, std::size_t> at;
    for (std::size_t i : idx) at.emplace(rows[i]->start_time, i);
    for (std::size_t i : idx) {
      const auto current = to_double(rows[i]->embedding);
      std::optional<std::vector<double>> next;
      if (auto it = at.find(rows[i]->start_time + 1); it != at.end()) next = to_double(rows[it->second]->embedding);
      auto values = build_context(variant, current,
                                  next ? std::optional<std::span<const double>>(*next) : std::nullopt,
                                  std::optional<std::span<const double>>(track));
      if (!values) {
        ++set.stats.missing_next;
        continue;
      }
      emit(std::move(*values), labels[i], key.first);
    }
  }
  return set;
}

std::vector<std::vector<double>> interval_features(Variant variant, std::span<const EmbedderOutput> windows) {
  std::vector<Token> tokens;
  tokens.reserve(windows.size());
  for (const auto& w : windows) tokens.push_back({w.start_time, w.embedding});
  std::vector<std::vector<double>> out;

  if (variant == Variant::Concat5s) {
    for (auto& f : concat_5s(tokens)) out.push_back(std::move(f.values));
    return out;
  }
  if (variant == Variant::LogitSoftmax) {
    std::vector<Token> logit_tokens;
    for (const auto& w : windows) logit_tokens.push_back({w.start_time, w.logits});
    std::unordered_map<int, const EmbedderOutput*> at;
    for (const auto& w : windows) at.emplace(w.start_time, &w);
    for (const auto& f : align_5s(logit_tokens)) {
      const auto a = softmax(at[5 * f.interval]->logits);
      const auto b = softmax(at[5 * f.interval + 2]->logits);
      std::vector<double> mean(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) mean[i] = (a[i] + b[i]) / 2.0;
      out.push_back(std::move(mean));
    }
    return out;
  }

  const auto aligned = align_5s(tokens);
  if (aligned.empty()) return out;
  const std::vector<double> track = track_embedding(tokens);
  for (std::size_t i = 0; i < aligned.size(); ++i) {
    const auto& next = aligned[std::min(i + 1, aligned.size() - 1)].values;
    out.push_back(*build_context(variant, aligned[i].values, std::span<const double>(next), std::span<const double>(track)));
  }
  return out;
}

void write_feature_matrix(const fs::path& path, std::span<const FeatureVector> features) {
  const std::size_t dim = features.empty() ? 0 : features.front().values.size();
  std::vector<double> flat;
  flat.reserve(features.size() * dim);
  for (const auto& f : features) {
    if (f.values.size() != dim) throw ValidationError("write_feature_matrix: rows have different dimensions");
    flat.insert(flat.end(), f.values.begin(), f.values.end());
  }
  const nlohmann::json header = {{"rows", features.size()},
                                 {"dim", dim},
                                 {"variant", features.empty() ? "" : to_string(features.front().variant)}};
  atomic_write_bytes(path, header.dump() + "\n" + models::encode_params(flat));
}

}  // namespace embercall
